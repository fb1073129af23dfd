#pragma once

#include "mfld/adjoint.hpp"
#include "mfld/cloud.hpp"
#include "mfld/config.hpp"
#include "mfld/csv.hpp"
#include "mfld/diagnostics.hpp"
#include "mfld/entropy.hpp"
#include "mfld/errors.hpp"
#include "mfld/experiment.hpp"
#include "mfld/fixed_point.hpp"
#include "mfld/flat_check.hpp"
#include "mfld/flow.hpp"
#include "mfld/flow_state.hpp"
#include "mfld/forward.hpp"
#include "mfld/hamiltonian.hpp"
#include "mfld/lq_problem.hpp"
#include "mfld/moments.hpp"
#include "mfld/nn_problem.hpp"
#include "mfld/noise.hpp"
#include "mfld/objective.hpp"
#include "mfld/particle_control.hpp"
#include "mfld/problem.hpp"
#include "mfld/rng.hpp"
#include "mfld/wasserstein.hpp"
