#pragma once

#include <cmath>
#include <vector>

#include "mfld/particle_control.hpp"

namespace mfld {

struct CloudMoments {
  std::vector<double> per_cell;  // [j][k]: (1/N) sum_i |theta|^q
  double aggregate = 0.0;        // (1/MNK) sum |theta|^q
  double stderr_ = 0.0;          // over all M N K particles
  double mean = 0.0;             // pooled first coordinate mean
  double mean_stderr = 0.0;
  double variance = 0.0;         // pooled first coordinate variance
  double variance_stderr = 0.0;
};

inline double norm_pow(ConstVec a, double q) {
  double s = 0.0;
  for (double v : a) s += v * v;
  if (q == 2.0) return s;
  return std::pow(std::sqrt(s), q);
}

// Exact empirical moments. Pooled statistics use sample standard errors
// treating all particles as one sample.
inline CloudMoments cloud_moments(const ParticleControl& pc, double q) {
  require(q >= 1.0, "moments: q must be >= 1");
  CloudMoments out;
  const std::size_t cells = pc.outer_count * pc.steps();
  out.per_cell.resize(cells);
  std::vector<double> s1(cells), s2(cells), x1(cells), x2(cells), x3(cells), x4(cells);
#pragma omp parallel for schedule(static)
  for (std::size_t cell = 0; cell < cells; ++cell) {
    const auto cl = pc.cloud(cell / pc.steps(), cell % pc.steps());
    double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0, b4 = 0.0;
    for (std::size_t i = 0; i < cl.size(); ++i) {
      const double v = norm_pow(cl.point(i), q);
      a1 += v;
      a2 += v * v;
      const double x = cl(i, 0);
      b1 += x;
      b2 += x * x;
      b3 += x * x * x;
      b4 += x * x * x * x;
    }
    out.per_cell[cell] = a1 / static_cast<double>(cl.size());
    s1[cell] = a1, s2[cell] = a2, x1[cell] = b1, x2[cell] = b2, x3[cell] = b3, x4[cell] = b4;
  }
  double a1 = 0.0, a2 = 0.0, b1 = 0.0, b2 = 0.0, b3 = 0.0, b4 = 0.0;
  for (std::size_t cell = 0; cell < cells; ++cell) {
    a1 += s1[cell], a2 += s2[cell], b1 += x1[cell], b2 += x2[cell], b3 += x3[cell], b4 += x4[cell];
  }
  const double n = static_cast<double>(cells * pc.particles);
  out.aggregate = a1 / n;
  out.stderr_ = std::sqrt(std::max(0.0, a2 / n - out.aggregate * out.aggregate) / n);
  out.mean = b1 / n;
  out.variance = b2 / n - out.mean * out.mean;
  out.mean_stderr = std::sqrt(std::max(0.0, out.variance) / n);
  // Fourth central moment for the standard error of the sample variance.
  const double m = out.mean;
  const double mu4 = b4 / n - 4.0 * m * b3 / n + 6.0 * m * m * b2 / n - 3.0 * m * m * m * m;
  out.variance_stderr = std::sqrt(std::max(0.0, mu4 - out.variance * out.variance) / n);
  return out;
}

}  // namespace mfld
