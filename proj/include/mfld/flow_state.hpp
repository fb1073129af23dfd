#pragma once

#include <cmath>
#include <cstdint>

#include "mfld/adjoint.hpp"
#include "mfld/forward.hpp"
#include "mfld/particle_control.hpp"

namespace mfld {

struct FlowConfig {
  double sigma = 1.0;
  double ds = 1e-3;
  double total_s = 8.0;
  std::size_t refresh_stride = 1;      // Langevin steps between forward/adjoint refreshes
  std::size_t checkpoint_stride = 200;  // 0: only the initial and final checkpoints
  AdjointMode adjoint_mode = AdjointMode::regression;
  std::uint64_t inner_seed = 1;
  bool record_fixed_point = true;  // foc_spread and gibbs_residual columns

  std::size_t total_steps() const {
    return static_cast<std::size_t>(std::llround(total_s / ds));
  }
};

inline void validate(const FlowConfig& cfg, bool allow_zero_sigma = false) {
  require(std::isfinite(cfg.sigma) && (cfg.sigma > 0.0 || (allow_zero_sigma && cfg.sigma == 0.0)),
          "flow: sigma must be > 0");
  require(std::isfinite(cfg.ds) && cfg.ds > 0.0, "flow: ds must be > 0");
  require(std::isfinite(cfg.total_s) && cfg.total_s >= 0.0, "flow: total_s must be >= 0");
  require(cfg.total_s == 0.0 || cfg.total_s >= cfg.ds, "flow: total_s must be >= ds");
  require(cfg.refresh_stride >= 1, "flow: refresh_stride must be >= 1");
}

// MFLD state at algorithmic time s = step * ds. traj/adjoint belong to the
// control as it was at the last refresh. The inner noise is counter based,
// so `step` is all the generator state there is.
struct FlowState {
  std::uint64_t step = 0;
  double ds = 0.0;
  ParticleControl control;
  TrajectoryBundle traj;
  AdjointBundle adjoint;

  double s() const { return static_cast<double>(step) * ds; }
};

}  // namespace mfld
