#pragma once

#include "rbflow/algebra.hpp"
#include "rbflow/grid.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace rbflow {

/// Binary tensor-field layout, little-endian:
///   "RBTF", u32 version = 1, i32 n, i32 rank, i32 d, i32 dims[d],
///   then points * n^rank doubles, point-major, components row-major.
void write_tensor_field(std::ostream& os, const TensorField& t);
TensorField read_tensor_field(std::istream& is);
void save_tensor_field(const std::string& path, const TensorField& t);
TensorField load_tensor_field(const std::string& path);

/// 17 significant digits; round-trips every finite double.
std::string format_double(double v);

/// CSV table with a fixed header; rows are written as they come.
class CsvWriter {
 public:
  CsvWriter(std::ostream& os, std::vector<std::string> header);
  void row(const std::vector<double>& values);
  /// Mixed row of preformatted cells.
  void row_cells(const std::vector<std::string>& cells);
  std::size_t columns() const { return header_.size(); }

 private:
  std::ostream& os_;
  std::vector<std::string> header_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

/// Parses a numeric CSV with header; throws runtime_error naming the line on malformed input.
CsvTable read_csv(std::istream& is);

/// One line per component: i,j,k,l,value.
void write_fiber_csv(std::ostream& os, const FourTensord& t);

}  // namespace rbflow
