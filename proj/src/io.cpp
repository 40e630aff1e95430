#include "rbflow/io.hpp"

#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace rbflow {

static_assert(std::endian::native == std::endian::little, "binary tensor layout assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'R', 'B', 'T', 'F'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("tensor_core: truncated tensor file");
  return v;
}

}  // namespace

void write_tensor_field(std::ostream& os, const TensorField& t) {
  os.write(kMagic, 4);
  put<std::uint32_t>(os, kVersion);
  put<std::int32_t>(os, t.n());
  put<std::int32_t>(os, t.rank());
  put<std::int32_t>(os, t.grid().dim());
  for (int d : t.grid().dims()) put<std::int32_t>(os, d);
  os.write(reinterpret_cast<const char*>(t.data().data()), static_cast<std::streamsize>(t.data().size() * sizeof(double)));
  if (!os) throw std::runtime_error("tensor_core: failed writing tensor field");
}

TensorField read_tensor_field(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw std::runtime_error("tensor_core: not an RBTF file");
  if (get<std::uint32_t>(is) != kVersion) throw std::runtime_error("tensor_core: unsupported RBTF version");
  const int n = get<std::int32_t>(is), rank = get<std::int32_t>(is), d = get<std::int32_t>(is);
  if (n < 1 || n > 16 || rank < 0 || rank > 8 || d < 1 || d > 8) throw std::runtime_error("tensor_core: bad RBTF header");
  std::vector<int> dims(d);
  for (auto& x : dims) x = get<std::int32_t>(is);
  TensorField t(Grid(dims), n, rank);
  auto& data = t.data();
  if (!is.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double))))
    throw std::runtime_error("tensor_core: truncated RBTF payload");
  return t;
}

void save_tensor_field(const std::string& path, const TensorField& t) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("tensor_core: cannot open " + path);
  write_tensor_field(os, t);
}

TensorField load_tensor_field(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("tensor_core: cannot open " + path);
  return read_tensor_field(is);
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(std::ostream& os, std::vector<std::string> header) : os_(os), header_(std::move(header)) {
  row_cells(header_);
}

void CsvWriter::row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(format_double(v));
  row_cells(cells);
}

void CsvWriter::row_cells(const std::vector<std::string>& cells) {
  if (cells.size() != header_.size()) throw std::invalid_argument("csv: row width differs from header");
  for (std::size_t i = 0; i < cells.size(); ++i) os_ << (i ? "," : "") << cells[i];
  os_ << '\n';
}

CsvTable read_csv(std::istream& is) {
  CsvTable t;
  std::string line;
  int lineno = 0;
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line);
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size())
      throw std::runtime_error("csv: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                               " cells, header has " + std::to_string(t.header.size()));
    std::vector<double> row;
    for (const auto& c : cells) {
      double v = 0.0;
      const auto r = std::from_chars(c.data(), c.data() + c.size(), v);
      if (r.ec != std::errc() || r.ptr != c.data() + c.size()) {
        if (c == "inf" || c == "-inf" || c == "nan") {
          v = c == "nan" ? std::numeric_limits<double>::quiet_NaN()
                         : (c[0] == '-' ? -1.0 : 1.0) * std::numeric_limits<double>::infinity();
        } else {
          throw std::runtime_error("csv: line " + std::to_string(lineno) + ": '" + c + "' is not a number");
        }
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.header.empty()) throw std::runtime_error("csv: missing header");
  return t;
}

void write_fiber_csv(std::ostream& os, const FourTensord& t) {
  CsvWriter w(os, {"i", "j", "k", "l", "value"});
  const int n = t.n();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) w.row({double(i), double(j), double(k), double(l), t(i, j, k, l)});
}

}  // namespace rbflow
