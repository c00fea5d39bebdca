#include "nqs/io.hpp"

#include "nqs/errors.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <variant>

namespace nqs {

namespace {

constexpr const char* kMagic = "# nqs-complex-array v1";

std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  std::uint64_t out = 0;
  for (int i = 0; i < 8; ++i) out |= ((v >> (8 * i)) & 0xffULL) << (8 * (7 - i));
  return out;
}

void append_double(std::string& out, double x) {
  const std::uint64_t bits = to_little_endian(std::bit_cast<std::uint64_t>(x));
  char buf[8];
  std::memcpy(buf, &bits, 8);
  out.append(buf, 8);
}

double read_double(const char* p) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, p, 8);
  return std::bit_cast<double>(to_little_endian(bits));
}

int parse_int(const std::string& token, const std::string& what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("checkpoint: bad integer for " + what + ": '" + token + "'");
  }
}

}  // namespace

void atomic_write(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string encode_complex_array(const ComplexArrayFile& file) {
  std::ostringstream head;
  head << kMagic << '\n' << "kind " << file.kind << '\n';
  if (file.kind == "fnn") {
    head << "layers";
    for (int n : file.layers) head << ' ' << n;
    head << '\n';
  } else {
    head << "sites " << file.sites << '\n';
    if (file.kind == "rbm") head << "hidden " << file.hidden << '\n';
  }
  head << "count " << file.values.size() << '\n';
  for (const auto& [key, value] : file.meta) {
    if (key.find_first_of(" \n") != std::string::npos || value.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint metadata must be single-line and keys space-free");
    }
    head << "meta " << key << ' ' << value << '\n';
  }
  head << "end\n";
  std::string out = head.str();
  out.reserve(out.size() + 16 * static_cast<std::size_t>(file.values.size()));
  for (Eigen::Index i = 0; i < file.values.size(); ++i) {
    append_double(out, file.values(i).real());
    append_double(out, file.values(i).imag());
  }
  return out;
}

ComplexArrayFile decode_complex_array(const std::string& bytes) {
  ComplexArrayFile file;
  std::size_t pos = 0;
  const auto next_line = [&]() {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) throw ConfigError("checkpoint: truncated header");
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    return line;
  };
  if (next_line() != kMagic) throw ConfigError("checkpoint: missing '" + std::string(kMagic) + "' header");
  long count = -1;
  for (;;) {
    const std::string line = next_line();
    if (line == "end") break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "kind") {
      ls >> file.kind;
    } else if (key == "layers") {
      std::string tok;
      while (ls >> tok) file.layers.push_back(parse_int(tok, "layers"));
    } else if (key == "sites") {
      std::string tok;
      ls >> tok;
      file.sites = parse_int(tok, "sites");
    } else if (key == "hidden") {
      std::string tok;
      ls >> tok;
      file.hidden = parse_int(tok, "hidden");
    } else if (key == "count") {
      std::string tok;
      ls >> tok;
      count = parse_int(tok, "count");
    } else if (key == "meta") {
      std::string name;
      ls >> name;
      std::string value;
      std::getline(ls, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      file.meta[name] = value;
    } else {
      throw ConfigError("checkpoint: unknown header line '" + line + "'");
    }
  }
  if (file.kind != "fnn" && file.kind != "rbm" && file.kind != "dense") {
    throw ConfigError("checkpoint: unknown kind '" + file.kind + "'");
  }
  if (count < 0) throw ConfigError("checkpoint: missing count");
  if (bytes.size() - pos != 16 * static_cast<std::size_t>(count)) {
    throw DimensionError("checkpoint: payload holds " + std::to_string(bytes.size() - pos) + " bytes, header promises " +
                         std::to_string(16 * count));
  }
  file.values.resize(count);
  for (long i = 0; i < count; ++i) {
    const char* p = bytes.data() + pos + 16 * static_cast<std::size_t>(i);
    file.values(i) = Complex(read_double(p), read_double(p + 8));
  }
  return file;
}

void write_complex_array(const std::filesystem::path& path, const ComplexArrayFile& file) {
  atomic_write(path, encode_complex_array(file));
}

ComplexArrayFile read_complex_array(const std::filesystem::path& path) { return decode_complex_array(read_text(path)); }

void save_ansatz(const std::filesystem::path& path, const Ansatz& psi, const Metadata& meta) {
  ComplexArrayFile file;
  const AnsatzShape shape = psi.shape();
  if (const auto* fnn = std::get_if<FnnShape>(&shape)) {
    file.kind = "fnn";
    file.layers = fnn->layer_sizes;
  } else {
    const auto& rbm = std::get<RbmShape>(shape);
    file.kind = "rbm";
    file.sites = rbm.num_sites;
    file.hidden = rbm.num_hidden;
  }
  file.meta = meta;
  file.values = psi.parameters();
  write_complex_array(path, file);
}

LoadedAnsatz load_ansatz(const std::filesystem::path& path) {
  ComplexArrayFile file = read_complex_array(path);
  AnsatzShape shape;
  if (file.kind == "fnn") {
    shape = FnnShape{file.layers};
  } else if (file.kind == "rbm") {
    shape = RbmShape{file.sites, file.hidden};
  } else {
    throw ConfigError(path.string() + " holds a dense state, not network parameters");
  }
  validate_shape(shape);
  if (file.values.size() != parameter_count(shape)) {
    throw DimensionError(path.string() + ": parameter count does not match the stored shape");
  }
  return LoadedAnsatz{make_ansatz(shape, std::move(file.values)), std::move(file.meta)};
}

void save_dense_state(const std::filesystem::path& path, const DenseState& psi, const Metadata& meta) {
  ComplexArrayFile file;
  file.kind = "dense";
  file.sites = psi.num_sites;
  file.meta = meta;
  file.values = psi.amplitudes;
  write_complex_array(path, file);
}

DenseState load_dense_state(const std::filesystem::path& path) {
  ComplexArrayFile file = read_complex_array(path);
  if (file.kind != "dense") throw ConfigError(path.string() + " does not hold a dense state");
  if (file.sites < 1 || file.sites > kMaxEnumeratedSites || file.values.size() != (Eigen::Index{1} << file.sites)) {
    throw DimensionError(path.string() + ": amplitude count does not match 2^sites");
  }
  return DenseState{file.sites, std::move(file.values)};
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

void CsvTable::add_row(std::vector<std::string> row) {
  if (row.size() != header.size()) throw DimensionError("CSV row width differs from the header");
  rows.push_back(std::move(row));
}

std::string CsvTable::render() const {
  std::string out;
  const auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i > 0) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw ConfigError("CSV table has no column '" + name + "'");
}

CsvTable parse_csv(const std::string& text) {
  CsvTable table;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      table.add_row(std::move(cells));
    }
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) { return parse_csv(read_text(path)); }

}  // namespace nqs
