#pragma once

#include <array>
#include <span>
#include <vector>

#include "reachbot/chain.hpp"
#include "reachbot/geom.hpp"
#include "reachbot/rng.hpp"

namespace reachbot {

inline constexpr int kObsDim = 18;
inline constexpr int kActDim = 6;

// Layout: joint angles (6, limit-normalized), hand position (3), target
// position (3), head forward direction (3), head-to-target direction (3).
// Every component lies in [-1, 1].
using Observation = std::array<double, kObsDim>;

struct RewardWeights {
    double w1 = 0.75;
    double w2 = 0.25;
};

// exp(-|hand - target|)
double arm_reward(const Vec3& hand, const Vec3& target);

// exp(-|head_dir - head_to_target|); both inputs must be unit vectors
// (within 1e-6) or the call is rejected.
double head_reward(const Vec3& head_dir, const Vec3& head_to_target);

double combined_reward(double a_r, double h_r, const RewardWeights& w);

struct TargetRanges {
    double x_lo = 0.65, x_hi = 0.85;
    double y_lo = -0.3, y_hi = 1.0;
    double z_lo = 0.55, z_hi = 0.9;
    double y_offset = 0.05;  // applied after sampling
};

Vec3 sample_target(Rng& rng, const TargetRanges& ranges);

struct EnvParams {
    TargetRanges target_ranges;
    double dt = 0.02;          // 50 Hz control tick
    int max_steps = 250;       // 5 s episode horizon
    RewardWeights weights;
    double pos_norm_bound = 1.2;  // meters; positions divided by this, then clamped
};

Observation build_observation(const KinematicChain& chain, std::span<const double> q,
                              const Vec3& target, const EnvParams& params);

struct StepResult {
    Observation obs;
    double reward = 0.0;
    bool done = false;
    double hand_target_dist = 0.0;
    bool self_collision = false;
};

// The reaching task: velocity actions integrated kinematically at 50 Hz,
// dense reward every step, terminated by timeout or self-collision.
// Single-owner mutable state; run one instance per rollout worker.
class ReachEnv {
  public:
    ReachEnv(const KinematicChain& chain, EnvParams params, std::uint64_t seed);

    Observation reset();
    StepResult step(std::span<const double> action);

    Observation observe() const;
    double current_reward() const;

    const std::vector<double>& q() const { return q_; }
    const Vec3& target() const { return target_; }
    int step_count() const { return step_count_; }
    bool done() const { return done_; }
    const EnvParams& params() const { return params_; }
    const KinematicChain& chain() const { return chain_; }

    // Dynamic-target mode for perception-fed rollouts.
    void set_target(const Vec3& t) { target_ = t; }

    Vec3 hand_position() const;

  private:
    const KinematicChain& chain_;
    EnvParams params_;
    Rng rng_;
    std::vector<double> q_;
    Vec3 target_;
    int step_count_ = 0;
    bool done_ = true;  // must reset before stepping
};

}  // namespace reachbot
