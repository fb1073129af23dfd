#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "mfld/errors.hpp"
#include "mfld/rng.hpp"

namespace mfld {

// Uniform grid t_k = k T / K on [0, T].
struct TimeGrid {
  double horizon = 1.0;
  std::size_t steps = 1;

  double dt() const { return horizon / static_cast<double>(steps); }
  double node(std::size_t k) const {
    return k == steps ? horizon : static_cast<double>(k) * horizon / static_cast<double>(steps);
  }
  std::vector<double> nodes() const {
    std::vector<double> out(steps + 1);
    for (std::size_t k = 0; k <= steps; ++k) out[k] = node(k);
    return out;
  }
};

inline TimeGrid make_time_grid(double horizon, std::size_t steps) {
  require(std::isfinite(horizon) && horizon > 0.0, "time grid: horizon must be finite and > 0");
  require(steps >= 1, "time grid: steps must be >= 1");
  return TimeGrid{horizon, steps};
}

// Increments dW[j][k] in R^noise_dim over [t_k, t_{k+1}], k = 0..K-1.
struct BrownianBundle {
  TimeGrid grid;
  std::size_t outer_count = 0;
  std::size_t noise_dim = 1;
  std::uint64_t seed = 0;
  std::vector<double> increments;  // [j][k][l]

  const double* at(std::size_t j, std::size_t k) const {
    return increments.data() + (j * grid.steps + k) * noise_dim;
  }
};

// Path j depends only on (seed, j, K, noise_dim), so growing M leaves
// existing paths untouched.
inline BrownianBundle sample_brownian(std::uint64_t seed, const TimeGrid& grid,
                                      std::size_t outer_count, std::size_t noise_dim) {
  require(outer_count >= 1, "brownian: outer_count must be >= 1");
  require(noise_dim >= 1, "brownian: noise_dim must be >= 1");
  BrownianBundle bb{grid, outer_count, noise_dim, seed, {}};
  bb.increments.resize(outer_count * grid.steps * noise_dim);
  const CounterRng rng(seed, Stream::brownian);
  const double scale = std::sqrt(grid.dt());
  const std::size_t per_path = grid.steps * noise_dim;
#pragma omp parallel for schedule(static)
  for (std::size_t j = 0; j < outer_count; ++j) {
    double* out = bb.increments.data() + j * per_path;
    rng.fill_normals(out, per_path, static_cast<std::uint32_t>(j), 0u, 0u);
    for (std::size_t l = 0; l < per_path; ++l) out[l] *= scale;
  }
  return bb;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t{b[i]} << (8 * i);
  return v;
}

}  // namespace detail

// Binary replay file: little-endian u64 header (M, K, noise_dim, seed), then
// the increments as little-endian IEEE doubles in [j][k][l] order.
inline void write_brownian(const BrownianBundle& bb, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  detail::put_u64(os, bb.outer_count);
  detail::put_u64(os, bb.grid.steps);
  detail::put_u64(os, bb.noise_dim);
  detail::put_u64(os, bb.seed);
  for (double v : bb.increments) detail::put_u64(os, std::bit_cast<std::uint64_t>(v));
  if (!os) throw std::runtime_error("write failed: " + path);
}

// The file does not carry the horizon; the caller supplies it.
inline BrownianBundle read_brownian(const std::string& path, double horizon) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  BrownianBundle bb;
  bb.outer_count = detail::get_u64(is);
  const auto steps = detail::get_u64(is);
  bb.noise_dim = detail::get_u64(is);
  bb.seed = detail::get_u64(is);
  bb.grid = make_time_grid(horizon, steps);
  bb.increments.resize(bb.outer_count * steps * bb.noise_dim);
  for (double& v : bb.increments) v = std::bit_cast<double>(detail::get_u64(is));
  if (!is) throw std::runtime_error("truncated brownian file: " + path);
  return bb;
}

}  // namespace mfld
