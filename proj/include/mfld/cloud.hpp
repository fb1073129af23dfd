#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "mfld/errors.hpp"

namespace mfld {

using ConstVec = std::span<const double>;
using OutVec = std::span<double>;

// Non-owning view of an empirical measure on R^p: `size()` points stored
// row-major, with optional weights (empty => uniform 1/N).
class CloudView {
 public:
  CloudView() = default;
  CloudView(ConstVec points, std::size_t dim, ConstVec weights = {})
      : points_(points), dim_(dim), weights_(weights) {}

  std::size_t size() const { return dim_ == 0 ? 0 : points_.size() / dim_; }
  std::size_t dim() const { return dim_; }
  bool weighted() const { return !weights_.empty(); }
  ConstVec data() const { return points_; }
  ConstVec weights() const { return weights_; }

  ConstVec point(std::size_t i) const { return points_.subspan(i * dim_, dim_); }
  double operator()(std::size_t i, std::size_t c) const { return points_[i * dim_ + c]; }
  double weight(std::size_t i) const {
    return weights_.empty() ? 1.0 / static_cast<double>(size()) : weights_[i];
  }

  // Integral of f(point_i) against the measure.
  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    const std::size_t n = size();
    if (weights_.empty()) {
      for (std::size_t i = 0; i < n; ++i) acc += f(point(i));
      return acc / static_cast<double>(n);
    }
    for (std::size_t i = 0; i < n; ++i) acc += weights_[i] * f(point(i));
    return acc;
  }

  double mean(std::size_t c) const {
    return expect([c](ConstVec a) { return a[c]; });
  }

  double second_moment() const {
    return expect([](ConstVec a) {
      double s = 0.0;
      for (double v : a) s += v * v;
      return s;
    });
  }

 private:
  ConstVec points_;
  std::size_t dim_ = 0;
  ConstVec weights_;
};

// Owning cloud. Uniform weights unless `weights` is filled.
struct EmpiricalCloud {
  std::size_t dim = 1;
  std::vector<double> points;
  std::vector<double> weights;

  EmpiricalCloud() = default;
  EmpiricalCloud(std::size_t p, std::vector<double> pts, std::vector<double> w = {})
      : dim(p), points(std::move(pts)), weights(std::move(w)) {
    require(dim > 0 && points.size() % dim == 0, "cloud: point buffer not a multiple of dim");
    require(weights.empty() || weights.size() == points.size() / dim,
            "cloud: weight count does not match point count");
  }

  std::size_t size() const { return points.size() / dim; }
  CloudView view() const { return {points, dim, weights}; }
  operator CloudView() const { return view(); }
};

inline bool all_finite(ConstVec v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace mfld
