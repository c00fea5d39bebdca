#pragma once

// File formats: the complex-array checkpoint (text header + little-endian
// float64 re/im pairs), atomic writes, and CSV helpers.
//
// Checkpoint layout:
//
//   # nqs-complex-array v1
//   kind fnn | rbm | dense
//   layers 14 56 42 1        (fnn)
//   sites 14                 (rbm, dense)
//   hidden 70                (rbm)
//   count 3277
//   meta <key> <value>       (zero or more, free-form value)
//   end
//   <count * 16 bytes: re, im as IEEE-754 binary64, little-endian>

#include "nqs/ansatz.hpp"
#include "nqs/oracle.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

namespace nqs {

/// Writes to a sibling temporary file, then renames over path.
void atomic_write(const std::filesystem::path& path, const std::string& content);

std::string read_text(const std::filesystem::path& path);

using Metadata = std::map<std::string, std::string>;

struct ComplexArrayFile {
  std::string kind;
  std::vector<int> layers;  ///< fnn
  int sites = 0;            ///< rbm, dense
  int hidden = 0;           ///< rbm
  Metadata meta;
  Eigen::VectorXcd values;
};

std::string encode_complex_array(const ComplexArrayFile& file);
ComplexArrayFile decode_complex_array(const std::string& bytes);

void write_complex_array(const std::filesystem::path& path, const ComplexArrayFile& file);
ComplexArrayFile read_complex_array(const std::filesystem::path& path);

void save_ansatz(const std::filesystem::path& path, const Ansatz& psi, const Metadata& meta = {});

struct LoadedAnsatz {
  std::unique_ptr<Ansatz> state;
  Metadata meta;
};

LoadedAnsatz load_ansatz(const std::filesystem::path& path);

void save_dense_state(const std::filesystem::path& path, const DenseState& psi, const Metadata& meta = {});
DenseState load_dense_state(const std::filesystem::path& path);

/// 17 significant digits; nan and inf spelled as such.
std::string format_double(double value);

/// Comma-separated table with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void add_row(std::vector<std::string> row);
  std::string render() const;
  /// Index of a header column; ConfigError when absent.
  std::size_t column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

}  // namespace nqs
