#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "reachbot/env.hpp"

namespace reachbot {

inline constexpr int kHidden = 64;
inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Parameter blocks in flat-storage order: actor 18-64-64-6 (tanh hidden,
// linear output), critic 18-64-64-1, then the state-independent log_std.
enum class Block {
    ActorW0, ActorB0, ActorW1, ActorB1, ActorW2, ActorB2,
    CriticW0, CriticB0, CriticW1, CriticB1, CriticW2, CriticB2,
    LogStd,
};

struct BlockInfo {
    Block id;
    const char* name;
    std::size_t rows, cols, offset;
};

const std::array<BlockInfo, 13>& param_layout();
std::size_t param_count();

struct PolicyParams {
    std::vector<double> flat;

    std::span<double> block(Block b);
    std::span<const double> block(Block b) const;
};

// Orthogonal init (gain sqrt(2) on hidden layers, 0.01 on the action head,
// 1.0 on the value head), zero biases, log_std = -0.5.
PolicyParams init_policy(std::uint64_t seed);

void clamp_log_std(PolicyParams& params);

struct ActorCriticOut {
    std::array<double, kActDim> mean;
    std::array<double, kActDim> std;
    double value = 0.0;
};

// Post-tanh hidden activations kept for the backward pass.
struct ForwardCache {
    std::array<double, kObsDim> obs;
    std::array<double, kHidden> a_h0, a_h1;
    std::array<double, kHidden> c_h0, c_h1;
};

ActorCriticOut actor_critic_forward(const PolicyParams& params, std::span<const double> obs,
                                    ForwardCache* cache = nullptr);

// Accumulate d(loss)/d(params) into `grads` (flat, param_count() long) given
// the loss sensitivity at the network outputs.
void backward_actor(const PolicyParams& params, const ForwardCache& cache,
                    std::span<const double> d_mean, std::span<double> grads);
void backward_critic(const PolicyParams& params, const ForwardCache& cache, double d_value,
                     std::span<double> grads);

double gaussian_log_prob(std::span<const double> mean, std::span<const double> std,
                         std::span<const double> action);
double gaussian_entropy(std::span<const double> std);

// Versioned binary checkpoint (shape header + row-major values); save/load
// round-trips bit-exactly. Writes are staged to a temp file then renamed.
void save_policy(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_policy(const std::filesystem::path& path);

}  // namespace reachbot
