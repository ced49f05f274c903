#ifndef DCLM_TENSOR_HPP
#define DCLM_TENSOR_HPP

#include <cmath>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace dclm {

// Dense row-major matrix of doubles. Column vectors are n x 1.
struct Tensor {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Tensor() = default;

  Tensor(int r, int c) : rows(r), cols(c) {
    if (r < 1 || c < 1) {
      throw std::invalid_argument("Tensor: dimensions must be positive, got " +
                                  std::to_string(r) + "x" + std::to_string(c));
    }
    data.assign(static_cast<std::size_t>(r) * c, 0.0);
  }

  static Tensor zeros(int r, int c) { return Tensor(r, c); }

  // Column vector from a list of entries.
  static Tensor column(std::initializer_list<double> xs) {
    Tensor t(static_cast<int>(xs.size()), 1);
    int i = 0;
    for (double x : xs) t.data[i++] = x;
    return t;
  }

  static Tensor of(std::initializer_list<std::initializer_list<double>> rows_in) {
    int r = static_cast<int>(rows_in.size());
    int c = r > 0 ? static_cast<int>(rows_in.begin()->size()) : 0;
    Tensor t(r, c);
    int i = 0;
    for (const auto& row : rows_in) {
      if (static_cast<int>(row.size()) != c) {
        throw std::invalid_argument("Tensor::of: ragged rows");
      }
      for (double x : row) t.data[i++] = x;
    }
    return t;
  }

  int size() const { return rows * cols; }

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  double& at(int i) { return data[static_cast<std::size_t>(i)]; }
  double at(int i) const { return data[static_cast<std::size_t>(i)]; }

  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  bool is_column() const { return cols == 1; }

  bool all_finite() const {
    for (double x : data) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  void fill(double v) {
    for (double& x : data) x = v;
  }

  void set_zero() { fill(0.0); }

  std::string shape_str() const {
    return std::to_string(rows) + "x" + std::to_string(cols);
  }
};

inline void require_same_shape(const Tensor& a, const Tensor& b, const char* where) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(where) + ": shape mismatch " + a.shape_str() +
                                " vs " + b.shape_str());
  }
}

}  // namespace dclm

#endif  // DCLM_TENSOR_HPP
