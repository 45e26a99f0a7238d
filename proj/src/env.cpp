#include "reachbot/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reachbot {

double arm_reward(const Vec3& hand, const Vec3& target) {
    return std::exp(-distance(hand, target));
}

double head_reward(const Vec3& head_dir, const Vec3& head_to_target) {
    if (std::abs(head_dir.norm() - 1.0) > 1e-6 || std::abs(head_to_target.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument("head_reward: direction inputs must be unit vectors");
    }
    return std::exp(-distance(head_dir, head_to_target));
}

double combined_reward(double a_r, double h_r, const RewardWeights& w) {
    return w.w1 * a_r + w.w2 * h_r;
}

Vec3 sample_target(Rng& rng, const TargetRanges& r) {
    if (r.x_lo > r.x_hi || r.y_lo > r.y_hi || r.z_lo > r.z_hi) {
        throw std::invalid_argument("sample_target: invalid ranges (lo > hi)");
    }
    Vec3 t{rng.uniform(r.x_lo, r.x_hi), rng.uniform(r.y_lo, r.y_hi), rng.uniform(r.z_lo, r.z_hi)};
    t.y += r.y_offset;
    return t;
}

namespace {

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Direction from the head frame origin to the target; falls back to base +x
// if the target sits on the head origin.
Vec3 head_to_target_dir(const Vec3& head_pos, const Vec3& target) {
    const Vec3 d = target - head_pos;
    if (d.norm() < 1e-12) return {1, 0, 0};
    return d.normalized();
}

}  // namespace

Observation build_observation(const KinematicChain& chain, std::span<const double> q,
                              const Vec3& target, const EnvParams& params) {
    if (chain.joint_count() != kActDim) {
        throw std::invalid_argument("build_observation: chain must have 6 joints");
    }
    const FkResult fk = chain.forward_kinematics(q);
    const Vec3 hand = chain.frame_pose(fk, "right_hand").translation;
    const RigidTransform& head = chain.frame_pose(fk, "head");
    const Vec3 head_dir = head.rotation * Vec3{1, 0, 0};
    const Vec3 to_target = head_to_target_dir(head.translation, target);

    Observation obs{};
    const auto& joints = chain.joints();
    for (int i = 0; i < kActDim; ++i) {
        const Joint& j = joints[static_cast<std::size_t>(i)];
        obs[static_cast<std::size_t>(i)] = 2.0 * (q[static_cast<std::size_t>(i)] - j.lo) / (j.hi - j.lo) - 1.0;
    }
    const double b = params.pos_norm_bound;
    obs[6] = clamp_unit(hand.x / b);
    obs[7] = clamp_unit(hand.y / b);
    obs[8] = clamp_unit(hand.z / b);
    obs[9] = clamp_unit(target.x / b);
    obs[10] = clamp_unit(target.y / b);
    obs[11] = clamp_unit(target.z / b);
    obs[12] = head_dir.x;
    obs[13] = head_dir.y;
    obs[14] = head_dir.z;
    obs[15] = to_target.x;
    obs[16] = to_target.y;
    obs[17] = to_target.z;
    return obs;
}

ReachEnv::ReachEnv(const KinematicChain& chain, EnvParams params, std::uint64_t seed)
    : chain_(chain), params_(std::move(params)), rng_(seed), q_(chain.joint_count(), 0.0) {
    if (chain_.joint_count() != kActDim) {
        throw std::invalid_argument("ReachEnv: chain must have 6 joints");
    }
    if (!chain_.has_frame("right_hand") || !chain_.has_frame("head")) {
        throw std::invalid_argument("ReachEnv: chain must define right_hand and head frames");
    }
}

Observation ReachEnv::reset() {
    std::fill(q_.begin(), q_.end(), 0.0);
    target_ = sample_target(rng_, params_.target_ranges);
    step_count_ = 0;
    done_ = false;
    return observe();
}

Observation ReachEnv::observe() const {
    return build_observation(chain_, q_, target_, params_);
}

Vec3 ReachEnv::hand_position() const {
    const FkResult fk = chain_.forward_kinematics(q_);
    return chain_.frame_pose(fk, "right_hand").translation;
}

double ReachEnv::current_reward() const {
    const FkResult fk = chain_.forward_kinematics(q_);
    const Vec3 hand = chain_.frame_pose(fk, "right_hand").translation;
    const RigidTransform& head = chain_.frame_pose(fk, "head");
    const Vec3 head_dir = head.rotation * Vec3{1, 0, 0};
    const Vec3 d = target_ - head.translation;
    const Vec3 to_target = d.norm() < 1e-12 ? Vec3{1, 0, 0} : d.normalized();
    return combined_reward(arm_reward(hand, target_), head_reward(head_dir, to_target),
                           params_.weights);
}

StepResult ReachEnv::step(std::span<const double> action) {
    if (done_) throw std::logic_error("ReachEnv::step called on a finished episode");
    if (action.size() != static_cast<std::size_t>(kActDim)) {
        throw std::invalid_argument("ReachEnv::step: action must have 6 components");
    }

    const auto& joints = chain_.joints();
    for (int i = 0; i < kActDim; ++i) {
        const auto idx = static_cast<std::size_t>(i);
        const double a = std::clamp(action[idx], -1.0, 1.0);
        q_[idx] = std::clamp(q_[idx] + a * joints[idx].velocity_limit * params_.dt,
                             joints[idx].lo, joints[idx].hi);
    }
    ++step_count_;

    StepResult out;
    out.reward = current_reward();
    out.hand_target_dist = distance(hand_position(), target_);
    out.self_collision = chain_.check_self_collision(q_);
    done_ = out.self_collision || step_count_ >= params_.max_steps;
    out.done = done_;
    out.obs = observe();
    return out;
}

}  // namespace reachbot
