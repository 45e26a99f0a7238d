#pragma once

#include <span>
#include <string>
#include <vector>

#include "reachbot/chain.hpp"

namespace reachbot {

struct IkParams {
    double damping = 0.05;      // DLS damping factor
    int max_iters = 200;        // total DLS steps across all starts
    double tolerance = 1e-3;    // meters
    double step_clamp = 0.2;    // radians, per joint per iteration
    std::string frame = "right_hand";
    // Joints allowed to move; empty = all. The head pair never shifts the
    // hand, so arm IK lists the hip/arm joints only.
    std::vector<std::string> active_joints;
    // When a start stalls (no residual improvement for stall_window steps),
    // the solver retries from deterministically seeded configurations inside
    // the limits, still within the max_iters budget.
    int restarts = 6;
    int stall_window = 12;
};

struct IkResult {
    std::vector<double> q;
    double residual = 0.0;
    bool converged = false;
    int iterations = 0;
};

// Damped least squares: dq = J^T (J J^T + d^2 I)^{-1} e, with per-joint step
// clamping and limit projection each iteration. Returns the best iterate
// seen; non-convergence is a result state, not an error.
IkResult solve_ik(const KinematicChain& chain, const Vec3& target, std::span<const double> q0,
                  const IkParams& params);

}  // namespace reachbot
