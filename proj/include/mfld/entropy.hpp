#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "mfld/cloud.hpp"

namespace mfld {

inline constexpr double kBandwidthFloor = 1e-6;
inline constexpr double kLogDensityFloor = -690.0;

// Gaussian product-kernel density estimate of a (possibly weighted) cloud,
// diagonal bandwidth from Silverman's rule h_c = sd_c (4 / ((p + 2) n))^(1/(p+4)).
class GaussianKde {
 public:
  explicit GaussianKde(const CloudView& cloud) : cloud_(cloud) {
    const std::size_t n = cloud.size(), p = cloud.dim();
    require(n >= 1 && p >= 1, "kde: empty cloud");
    double sum_w2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum_w2 += cloud.weight(i) * cloud.weight(i);
    const double n_eff = 1.0 / sum_w2;
    const double factor =
        std::pow(4.0 / ((static_cast<double>(p) + 2.0) * n_eff), 1.0 / (static_cast<double>(p) + 4.0));
    bandwidth_.resize(p);
    inv_two_h2_.resize(p);
    log_norm_ = 0.0;
    for (std::size_t c = 0; c < p; ++c) {
      const double mu = cloud.mean(c);
      const double var = cloud.expect([&](ConstVec a) { return (a[c] - mu) * (a[c] - mu); });
      // Zero spread up to rounding of the mean.
      if (!(std::sqrt(std::max(var, 0.0)) > 1e-13 * (1.0 + std::abs(mu)))) degenerate_ = true;
      const double h = std::max(kBandwidthFloor, std::sqrt(std::max(var, 0.0)) * factor);
      bandwidth_[c] = h;
      inv_two_h2_[c] = 1.0 / (2.0 * h * h);
      log_norm_ -= 0.5 * std::log(2.0 * std::numbers::pi * h * h);
    }
  }

  // True if some coordinate has zero spread: the measure is singular.
  bool degenerate() const { return degenerate_; }
  const std::vector<double>& bandwidth() const { return bandwidth_; }

  // log of the density estimate at `a`; `skip` excludes one particle
  // (leave-one-out) and renormalises the remaining weights.
  double log_density(ConstVec a, std::size_t skip = npos) const {
    const std::size_t n = cloud_.size(), p = cloud_.dim();
    double total = 0.0, wsum = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      if (l == skip) continue;
      const double w = cloud_.weight(l);
      wsum += w;
      total += w * std::exp(-exponent(a, l, p));
    }
    if (!(wsum > 0.0)) return kLogDensityFloor;
    if (total > 0.0) return std::max(kLogDensityFloor, std::log(total / wsum) + log_norm_);
    // Every kernel underflowed; redo in log-sum-exp form.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < n; ++l)
      if (l != skip) best = std::min(best, exponent(a, l, p));
    double acc = 0.0;
    for (std::size_t l = 0; l < n; ++l)
      if (l != skip) acc += cloud_.weight(l) * std::exp(best - exponent(a, l, p));
    return std::max(kLogDensityFloor, std::log(acc / wsum) - best + log_norm_);
  }

  // Mass the estimate assigns to (lo, hi] for p = 1.
  double interval_mass(double lo, double hi) const {
    double acc = 0.0;
    const double h = bandwidth_[0];
    for (std::size_t l = 0; l < cloud_.size(); ++l) {
      const double x = cloud_(l, 0);
      acc += cloud_.weight(l) * 0.5 *
             (std::erfc((lo - x) / (std::numbers::sqrt2 * h)) -
              std::erfc((hi - x) / (std::numbers::sqrt2 * h)));
    }
    return acc;
  }

  struct GridMasses {
    std::vector<double> cells;  // mass of each of the equal cells of [lo, hi]
    double outside = 0.0;       // mass outside [lo, hi]
  };

  // p = 1: mass of each of `n` equal cells of [lo, hi]. Kernels wider than
  // half a cell use the midpoint rule with a multiplicative recurrence along
  // the grid (two exp calls per particle); narrower ones integrate the kernel
  // CDF exactly. Kernels are truncated at 8 bandwidths.
  GridMasses grid_masses(double lo, double hi, std::size_t n) const {
    GridMasses out;
    out.cells.assign(n, 0.0);
    const double h = bandwidth_[0], delta = (hi - lo) / static_cast<double>(n);
    const double reach = 8.0 * h;
    double inside = 0.0;
    for (std::size_t l = 0; l < cloud_.size(); ++l) {
      const double x = cloud_(l, 0), w = cloud_.weight(l);
      const double first = std::floor((x - reach - lo) / delta);
      const double last = std::floor((x + reach - lo) / delta);
      if (last < 0.0 || first >= static_cast<double>(n)) continue;
      const auto b0 = static_cast<std::size_t>(std::max(first, 0.0));
      const auto b1 = static_cast<std::size_t>(std::min(last, static_cast<double>(n - 1)));
      if (h >= 0.5 * delta) {
        const double scale = w * delta / (std::sqrt(2.0 * std::numbers::pi) * h);
        double e = (lo + (static_cast<double>(b0) + 0.5) * delta - x) / h;
        double g = std::exp(-0.5 * e * e);
        double ratio = std::exp(-(e * delta / h) - 0.5 * (delta / h) * (delta / h));
        const double shrink = std::exp(-(delta / h) * (delta / h));
        for (std::size_t b = b0; b <= b1; ++b) {
          const double mass = scale * g;
          out.cells[b] += mass;
          inside += mass;
          g *= ratio;
          ratio *= shrink;
        }
      } else {
        const double inv = 1.0 / (std::numbers::sqrt2 * h);
        for (std::size_t b = b0; b <= b1; ++b) {
          const double a0 = lo + static_cast<double>(b) * delta, a1 = a0 + delta;
          const double mass = w * 0.5 * (std::erfc((a0 - x) * inv) - std::erfc((a1 - x) * inv));
          out.cells[b] += mass;
          inside += mass;
        }
      }
    }
    double total = 0.0;
    for (std::size_t l = 0; l < cloud_.size(); ++l) total += cloud_.weight(l);
    out.outside = std::max(0.0, total - inside);
    return out;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  double exponent(ConstVec a, std::size_t l, std::size_t p) const {
    double e = 0.0;
    for (std::size_t c = 0; c < p; ++c) {
      const double diff = a[c] - cloud_(l, c);
      e += diff * diff * inv_two_h2_[c];
    }
    return e;
  }

  CloudView cloud_;
  std::vector<double> bandwidth_;
  std::vector<double> inv_two_h2_;
  double log_norm_ = 0.0;
  bool degenerate_ = false;
};

// Relative entropy Ent(m) = int [log m - log gamma] dm with gamma = exp(-U),
// estimated by a leave-one-out Gaussian KDE. Biased by O(h^2) + O(1/N).
// Returns +inf for singular (zero-spread) clouds.
inline double entropy_estimate(const CloudView& cloud, const std::function<double(ConstVec)>& prior_potential) {
  require(cloud.size() >= 2, "entropy: need at least 2 particles");
  const GaussianKde kde(cloud);
  if (kde.degenerate()) return std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto a = cloud.point(i);
    acc += cloud.weight(i) * (kde.log_density(a, i) + prior_potential(a));
  }
  return acc;
}

// int f (log f + U) over [lo, hi] by the composite midpoint rule, for a
// one-dimensional density given pointwise. Used to check entropy identities
// on exact densities.
inline double entropy_quadrature(const std::function<double(double)>& density,
                                 const std::function<double(double)>& prior_potential, double lo,
                                 double hi, std::size_t nodes) {
  const double h = (hi - lo) / static_cast<double>(nodes);
  double acc = 0.0;
  for (std::size_t l = 0; l < nodes; ++l) {
    const double a = lo + (static_cast<double>(l) + 0.5) * h;
    const double f = density(a);
    if (f > 0.0) acc += f * (std::log(f) + prior_potential(a)) * h;
  }
  return acc;
}

}  // namespace mfld
