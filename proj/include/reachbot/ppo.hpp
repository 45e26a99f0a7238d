#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "reachbot/env.hpp"
#include "reachbot/policy.hpp"

namespace reachbot {

struct PpoConfig {
    // 0.9 rather than the usual 0.99: the reaching reward is an immediate
    // function of state, and at desk-scale step budgets the shorter credit
    // horizon is what lets the critic fit (see README notes on training).
    double gamma = 0.9;
    // Discount used for the logged episode returns (the learning-curve
    // metric), independent of the optimization discount.
    double metric_gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_eps = 0.2;
    double learning_rate = 3e-4;
    int n_steps = 2048;  // transitions per update, across all envs
    int epochs = 10;
    int minibatch = 64;
    double value_coef = 0.5;
    double entropy_coef = 0.0;
    double grad_norm_clip = 0.5;
    long total_steps = 300000;
    int n_envs = 1;
    int checkpoint_every = 50;  // updates between checkpoints
    int stats_window = 300;     // episodes in the logged running means

    void validate() const;
};

// Flattened [env][t] layout; each env contributes a contiguous segment of
// steps_per_env transitions with its own bootstrap value.
struct RolloutBuffer {
    int n_envs = 1;
    int steps_per_env = 0;

    std::vector<Observation> obs;
    std::vector<std::array<double, kActDim>> actions;
    std::vector<double> log_prob_old;
    std::vector<double> rewards;
    std::vector<double> values_old;
    std::vector<std::uint8_t> dones;
    std::vector<double> bootstrap_values;  // per env

    // Episodes that finished inside this rollout, for logging.
    std::vector<double> ep_rewards;
    std::vector<double> ep_disc_returns;
    std::vector<double> ep_final_dists;

    std::size_t size() const { return obs.size(); }
    std::size_t index(int env, int t) const {
        return static_cast<std::size_t>(env) * static_cast<std::size_t>(steps_per_env) +
               static_cast<std::size_t>(t);
    }
};

// Rolling statistics over the most recent episodes.
class EpisodeWindow {
  public:
    explicit EpisodeWindow(std::size_t capacity) : capacity_(capacity) {}

    void push(double v) {
        if (items_.size() == capacity_) items_.erase(items_.begin());
        items_.push_back(v);
    }
    bool empty() const { return items_.empty(); }
    double mean() const;

  private:
    std::size_t capacity_;
    std::vector<double> items_;
};

// Owns the environment set plus per-episode accounting that spans rollout
// boundaries. Envs are stepped sequentially in index order, so collection is
// deterministic for any n_envs.
class RolloutCollector {
  public:
    // metric_gamma and stats_window only affect the logged per-episode
    // statistics; the optimization discount enters through compute_gae.
    RolloutCollector(const KinematicChain& chain, const EnvParams& env_params, int n_envs,
                     std::uint64_t seed, double metric_gamma = 0.99,
                     std::size_t stats_window = 300);

    RolloutBuffer collect(const PolicyParams& params, int n_steps);

    long total_env_steps() const { return total_env_steps_; }

    // stats_window-episode running means, the values a train log row reports.
    double running_ep_reward() const { return ep_reward_window_.mean(); }
    double running_disc_return() const { return disc_return_window_.mean(); }
    double running_final_dist() const { return final_dist_window_.mean(); }

  private:
    struct EpisodeAccum {
        double reward_sum = 0.0;
        double disc_sum = 0.0;
        double discount = 1.0;
    };

    std::vector<ReachEnv> envs_;
    std::vector<Observation> last_obs_;
    std::vector<EpisodeAccum> accum_;
    Rng action_rng_;
    double metric_gamma_;
    long total_env_steps_ = 0;
    EpisodeWindow ep_reward_window_;
    EpisodeWindow disc_return_window_;
    EpisodeWindow final_dist_window_;
};

// delta_t = r_t + gamma * V(s_{t+1}) * (1 - done_t) - V(s_t)
// A_t     = delta_t + gamma * lambda * (1 - done_t) * A_{t+1}
// returns = advantages + values
void compute_gae(const RolloutBuffer& buffer, double gamma, double lambda,
                 std::vector<double>& advantages, std::vector<double>& returns);

struct LossStats {
    double total = 0.0;
    double policy = 0.0;
    double value = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
};

// Clipped-surrogate PPO loss over one minibatch; advantages must already be
// normalized for the update. When `grads` is non-null it receives the exact
// gradient of the total loss (accumulated; caller zeroes it).
LossStats ppo_loss(const PolicyParams& params, const RolloutBuffer& buffer,
                   std::span<const std::size_t> idx, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config,
                   std::vector<double>* grads);

struct AdamState {
    std::vector<double> m, v;
    long t = 0;

    static AdamState zeros();
};

struct UpdateStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double approx_kl = 0.0;
};

// Several epochs of shuffled minibatch Adam steps with global gradient-norm
// clipping. Throws on divergence (non-finite loss or parameters).
UpdateStats update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer,
                   const PpoConfig& config, Rng& rng);

struct TrainLogRow {
    long update = 0;
    long steps = 0;
    double mean_ep_reward = 0.0;
    double mean_disc_return = 0.0;
    double pi_loss = 0.0;
    double v_loss = 0.0;
    double approx_kl = 0.0;
    double mean_final_dist = 0.0;
};

std::string trainlog_csv_header();
std::string trainlog_csv_row(const TrainLogRow& row);
std::vector<TrainLogRow> read_trainlog_csv(const std::filesystem::path& path);

struct TrainResult {
    PolicyParams params;
    std::vector<TrainLogRow> log;
};

// Full collect/update loop. When out_dir is set, writes trainlog.csv,
// periodic checkpoints and policy_final.bin (all staged-then-renamed).
TrainResult train(const KinematicChain& chain, const EnvParams& env_params,
                  const PpoConfig& config, std::uint64_t seed,
                  const std::optional<std::filesystem::path>& out_dir,
                  std::ostream* progress);

struct EvalReport {
    int episodes = 0;
    double mean_final_dist = 0.0;
    double median_final_dist = 0.0;
    double mean_ep_reward = 0.0;
    double success_rate = 0.0;  // final distance < 0.1 m
};

// Deterministic evaluation: mean action, fresh seeded targets per episode.
EvalReport evaluate_policy(const KinematicChain& chain, const EnvParams& env_params,
                           const PolicyParams& params, int n_episodes, std::uint64_t seed);

}  // namespace reachbot
