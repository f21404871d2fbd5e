#pragma once
// Dense row-major tensors of 64-bit floats, rank 0 (scalar) to 2 (matrix).

#include <array>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace intrasum {

// When on, tensor creation rejects NaN/Inf payloads. Tests enable it; the
// training loop leaves it off and checks the loss value instead.
inline bool& checked_mode() {
  static bool on = false;
  return on;
}

struct Tensor {
  uint8_t rank = 0;
  std::array<size_t, 2> dim{{0, 0}};
  std::vector<double> v;

  Tensor() = default;

  static Tensor scalar(double x) {
    Tensor t;
    t.rank = 0;
    t.v.assign(1, x);
    t.maybe_check("Tensor::scalar");
    return t;
  }

  static Tensor vec(size_t n, double fill = 0.0) {
    Tensor t;
    t.rank = 1;
    t.dim[0] = n;
    t.v.assign(n, fill);
    return t;
  }

  static Tensor vec(std::vector<double> values) {
    Tensor t;
    t.rank = 1;
    t.dim[0] = values.size();
    t.v = std::move(values);
    t.maybe_check("Tensor::vec");
    return t;
  }

  static Tensor vec(std::initializer_list<double> values) {
    return vec(std::vector<double>(values));
  }

  static Tensor mat(size_t r, size_t c, double fill = 0.0) {
    Tensor t;
    t.rank = 2;
    t.dim = {r, c};
    t.v.assign(r * c, fill);
    return t;
  }

  static Tensor mat(size_t r, size_t c, std::vector<double> values) {
    if (values.size() != r * c)
      throw std::invalid_argument("Tensor::mat: value count " +
                                  std::to_string(values.size()) +
                                  " does not match shape " + std::to_string(r) +
                                  "x" + std::to_string(c));
    Tensor t;
    t.rank = 2;
    t.dim = {r, c};
    t.v = std::move(values);
    t.maybe_check("Tensor::mat");
    return t;
  }

  size_t size() const { return v.size(); }
  size_t rows() const { return rank == 2 ? dim[0] : (rank == 1 ? dim[0] : 1); }
  size_t cols() const { return rank == 2 ? dim[1] : 1; }

  double& operator[](size_t i) { return v[i]; }
  double operator[](size_t i) const { return v[i]; }
  double& at(size_t r, size_t c) { return v[r * dim[1] + c]; }
  double at(size_t r, size_t c) const { return v[r * dim[1] + c]; }

  double item() const {
    if (v.size() != 1)
      throw std::logic_error("Tensor::item: tensor has " +
                             std::to_string(v.size()) + " elements");
    return v[0];
  }

  bool same_shape(const Tensor& o) const {
    return rank == o.rank && (rank == 0 || dim[0] == o.dim[0]) &&
           (rank < 2 || dim[1] == o.dim[1]);
  }

  std::string shape_str() const {
    std::ostringstream os;
    os << "[";
    if (rank >= 1) os << dim[0];
    if (rank == 2) os << "x" << dim[1];
    os << "]";
    return os.str();
  }

  void check_finite(const char* where) const {
    for (double x : v)
      if (!std::isfinite(x))
        throw std::invalid_argument(std::string(where) +
                                    ": non-finite value in tensor " +
                                    shape_str());
  }

  void maybe_check(const char* where) const {
    if (checked_mode()) check_finite(where);
  }

  // Resize to match another tensor's shape, reusing capacity, zero-filled.
  void reshape_zero_like(const Tensor& o) {
    rank = o.rank;
    dim = o.dim;
    v.assign(o.v.size(), 0.0);
  }
};

inline double l2_norm(const Tensor& t) {
  double s = 0.0;
  for (double x : t.v) s += x * x;
  return std::sqrt(s);
}

}  // namespace intrasum
