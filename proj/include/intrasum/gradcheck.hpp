#pragma once
// Central-difference gradient checking.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include "intrasum/common.hpp"
#include "intrasum/tensor.hpp"

namespace intrasum {

struct FdReport {
  double max_rel_err = 0.0;
  size_t coords_checked = 0;
};

// Compares an analytic gradient against central finite differences of a
// scalar function. `point` is perturbed in place and restored; `f` must
// re-evaluate the function at the current contents of `point`.
//
// Error per coordinate is |analytic - numeric| / max(1, |analytic|), so
// near-zero gradients are compared absolutely. When max_coords is smaller
// than the tensor, a random subset of coordinates is checked.
inline FdReport finite_difference_check(const std::function<double()>& f,
                                        Tensor& point, const Tensor& analytic,
                                        double step,
                                        size_t max_coords = SIZE_MAX,
                                        Rng* rng = nullptr) {
  if (!point.same_shape(analytic))
    throw std::invalid_argument(
        "finite_difference_check: gradient shape " + analytic.shape_str() +
        " does not match point " + point.shape_str());
  std::vector<size_t> coords(point.size());
  std::iota(coords.begin(), coords.end(), size_t{0});
  if (max_coords < coords.size()) {
    if (rng != nullptr) rng->shuffle(coords);
    coords.resize(max_coords);
  }
  FdReport rep;
  for (size_t i : coords) {
    const double saved = point.v[i];
    point.v[i] = saved + step;
    const double fp = f();
    point.v[i] = saved - step;
    const double fm = f();
    point.v[i] = saved;
    const double numeric = (fp - fm) / (2.0 * step);
    const double a = analytic.v[i];
    const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
    rep.max_rel_err = std::max(rep.max_rel_err, err);
    rep.coords_checked += 1;
  }
  return rep;
}

}  // namespace intrasum
