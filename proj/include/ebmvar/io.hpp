// Copyright 2026 The ebmvar Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef EBMVAR_IO_HPP
#define EBMVAR_IO_HPP

// Locale-free CSV, binary path dumps and coordinate-format matrices.

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ebmvar/errors.hpp"
#include "ebmvar/model_core.hpp"
#include "ebmvar/sde_engine.hpp"
#include "ebmvar/spatial_model.hpp"

namespace ebmvar::io {

// 17 significant digits, locale independent.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 32> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x, std::chars_format::general, 17);
  return {buf.data(), res.ptr};
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  CsvWriter& header(std::initializer_list<std::string_view> cols) {
    for (auto c : cols) cell(c);
    return end_row();
  }
  CsvWriter& cell(std::string_view s) {
    if (!first_) os_ << ',';
    os_ << s;
    first_ = false;
    return *this;
  }
  CsvWriter& cell(double x) { return cell(std::string_view(format_double(x))); }
  CsvWriter& cell(std::size_t n) { return cell(std::string_view(std::to_string(n))); }
  CsvWriter& cell(int n) { return cell(std::string_view(std::to_string(n))); }
  CsvWriter& end_row() {
    os_ << '\n';
    first_ = true;
    return *this;
  }

 private:
  std::ostream& os_;
  bool first_ = true;
};

inline void write_variance_curve(std::ostream& os, const std::vector<VariancePoint>& pts) {
  CsvWriter w(os);
  w.header({"lambda", "T_star", "branch", "b", "sigma0", "sigma1", "var_inf"});
  for (const auto& p : pts) {
    w.cell(p.lambda).cell(p.T_star).cell(p.error ? "error" : to_string(p.branch))
        .cell(p.b).cell(p.sigma0).cell(p.sigma1).cell(p.var_inf).end_row();
  }
}

// Columns time,path_0,...; vector-valued bundles use path_<p>_<c>.
inline void write_bundle_csv(std::ostream& os, const PathBundle& b) {
  CsvWriter w(os);
  w.cell("time");
  for (std::size_t p = 0; p < b.n_paths; ++p) {
    if (b.dim == 1) {
      w.cell("path_" + std::to_string(p));
    } else {
      for (std::size_t c = 0; c < b.dim; ++c)
        w.cell("path_" + std::to_string(p) + "_" + std::to_string(c));
    }
  }
  w.end_row();
  for (std::size_t t = 0; t < b.n_times(); ++t) {
    w.cell(b.times[t]);
    for (std::size_t p = 0; p < b.n_paths; ++p)
      for (std::size_t c = 0; c < b.dim; ++c) w.cell(b.at(p, t, c));
    w.end_row();
  }
}

inline void write_moments_csv(std::ostream& os, const PathBundle& b,
                              const std::vector<Moments>& m) {
  CsvWriter w(os);
  w.header({"time", "mean", "variance", "se_mean", "se_variance", "n"});
  for (std::size_t t = 0; t < m.size(); ++t) {
    w.cell(b.times[t]).cell(m[t].mean).cell(m[t].variance).cell(m[t].se_mean)
        .cell(m[t].se_variance).cell(m[t].n).end_row();
  }
}

inline constexpr std::array<char, 8> kPathMagic = {'E', 'B', 'M', 'V', 'P', 'T', 'H', '1'};

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  os.write(b.data(), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  std::array<unsigned char, 8> b{};
  if (!is.read(reinterpret_cast<char*>(b.data()), 8)) fail(ErrorKind::config, "truncated path dump");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

// Layout (little-endian): magic[8], n_paths, n_times, dim, seed as u64, then
// n_times f64 times, then values [path][time][comp] as f64.
inline void write_bundle_binary(std::ostream& os, const PathBundle& b) {
  os.write(kPathMagic.data(), kPathMagic.size());
  detail::put_u64(os, b.n_paths);
  detail::put_u64(os, b.n_times());
  detail::put_u64(os, b.dim);
  detail::put_u64(os, b.config.seed);
  for (double t : b.times) detail::put_u64(os, std::bit_cast<std::uint64_t>(t));
  for (double v : b.values) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
}

inline PathBundle read_bundle_binary(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), 8) || magic != kPathMagic) fail(ErrorKind::config, "bad path dump magic");
  PathBundle b;
  b.n_paths = detail::get_u64(is);
  const auto n_times = detail::get_u64(is);
  b.dim = detail::get_u64(is);
  b.config.seed = detail::get_u64(is);
  b.config.n_paths = b.n_paths;
  b.times.resize(n_times);
  for (auto& t : b.times) t = std::bit_cast<double>(detail::get_u64(is));
  b.values.resize(b.n_paths * n_times * b.dim);
  for (auto& v : b.values) v = std::bit_cast<double>(detail::get_u64(is));
  return b;
}

// MatrixMarket coordinate format, 1-based indices.
inline void write_matrix_market(std::ostream& os, const SparseMatrix& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n';
  // Row-major order for stable, readable output.
  Eigen::SparseMatrix<double, Eigen::RowMajor> r = a;
  for (int k = 0; k < r.outerSize(); ++k)
    for (decltype(r)::InnerIterator it(r, k); it; ++it)
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << format_double(it.value()) << '\n';
}

inline void write_matrix_market(std::ostream& os, const Eigen::MatrixXd& a) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << a.rows() << ' ' << a.cols() << ' ' << a.size() << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      os << i + 1 << ' ' << j + 1 << ' ' << format_double(a(i, j)) << '\n';
}

inline SparseMatrix read_matrix_market(std::istream& is) {
  std::string line;
  do {
    if (!std::getline(is, line)) fail(ErrorKind::config, "empty matrix file");
  } while (!line.empty() && line[0] == '%');
  long rows = 0, cols = 0, nnz = 0;
  if (std::sscanf(line.c_str(), "%ld %ld %ld", &rows, &cols, &nnz) != 3)
    fail(ErrorKind::config, "bad matrix size line");
  std::vector<Eigen::Triplet<double>> trips;
  for (long k = 0; k < nnz; ++k) {
    long i = 0, j = 0;
    std::string v;
    if (!(is >> i >> j >> v)) fail(ErrorKind::config, "truncated matrix file");
    trips.emplace_back(i - 1, j - 1, std::stod(v));
  }
  SparseMatrix a(rows, cols);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

// Long format: i,j,x,y,value over interior nodes (1-based i, j).
inline void write_field_csv(std::ostream& os, const Grid2D& g, const Eigen::VectorXd& v) {
  require(v.size() == g.dim(), "field size must equal grid dimension");
  CsvWriter w(os);
  w.header({"i", "j", "x", "y", "value"});
  for (Eigen::Index m = 0; m < g.dim(); ++m) {
    const auto [i, j] = g.node(m);
    const auto [x, y] = g.coords(m);
    w.cell(i).cell(j).cell(x).cell(y).cell(v[m]).end_row();
  }
}

}  // namespace ebmvar::io

#endif  // EBMVAR_IO_HPP
