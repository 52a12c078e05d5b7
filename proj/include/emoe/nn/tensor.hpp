#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace emoe::nn {

/// Thrown when an operation produces a NaN or infinity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Every tensor in the network is 2-D;
/// batches of sequences are stacked along the rows.
struct Mat {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> d;

  Mat() = default;
  Mat(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), d(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return d[i * cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return d[i * cols + j]; }
  double* row(std::size_t i) { return d.data() + i * cols; }
  const double* row(std::size_t i) const { return d.data() + i * cols; }
  std::size_t size() const { return d.size(); }
  bool empty() const { return d.empty(); }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }

  friend bool operator==(const Mat&, const Mat&) = default;
};

inline std::string shape_str(const Mat& m) { return std::to_string(m.rows) + "x" + std::to_string(m.cols); }

inline bool all_finite(const Mat& m) {
  for (double v : m.d)
    if (!std::isfinite(v)) return false;
  return true;
}

namespace kernel {

// c += a * b
inline void gemm_nn(const Mat& a, const Mat& b, Mat& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t i = 0; i < n; ++i) {
    double* ci = c.row(i);
    const double* ai = a.row(i);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ai[p];
      if (aip == 0.0) continue;
      const double* bp = b.row(p);
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

// c += a * b^T
inline void gemm_nt(const Mat& a, const Mat& b, Mat& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.rows;
  for (std::size_t i = 0; i < n; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < m; ++j) {
      const double* bj = b.row(j);
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += ai[p] * bj[p];
      ci[j] += s;
    }
  }
}

// c += a^T * b
inline void gemm_tn(const Mat& a, const Mat& b, Mat& c) {
  const std::size_t n = a.rows, k = a.cols, m = b.cols;
  for (std::size_t p = 0; p < n; ++p) {
    const double* ap = a.row(p);
    const double* bp = b.row(p);
    for (std::size_t i = 0; i < k; ++i) {
      const double aip = ap[i];
      if (aip == 0.0) continue;
      double* ci = c.row(i);
      for (std::size_t j = 0; j < m; ++j) ci[j] += aip * bp[j];
    }
  }
}

}  // namespace kernel
}  // namespace emoe::nn
