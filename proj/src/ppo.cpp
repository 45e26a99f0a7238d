#include "reachbot/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "reachbot/kernels.hpp"

namespace reachbot {

void PpoConfig::validate() const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("ppo: gamma must be in [0,1]");
    if (!(metric_gamma >= 0.0 && metric_gamma <= 1.0)) {
        throw std::invalid_argument("ppo: metric_gamma must be in [0,1]");
    }
    if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) {
        throw std::invalid_argument("ppo: gae_lambda must be in [0,1]");
    }
    if (!(clip_eps > 0.0)) throw std::invalid_argument("ppo: clip_eps must be > 0");
    if (n_steps <= 0) throw std::invalid_argument("ppo: n_steps must be > 0");
    if (epochs <= 0) throw std::invalid_argument("ppo: epochs must be > 0");
    if (minibatch <= 0 || minibatch > n_steps) {
        throw std::invalid_argument("ppo: minibatch must be in (0, n_steps]");
    }
    if (n_envs <= 0) throw std::invalid_argument("ppo: n_envs must be > 0");
    if (n_steps % n_envs != 0) throw std::invalid_argument("ppo: n_steps must divide by n_envs");
    if (total_steps <= 0) throw std::invalid_argument("ppo: total_steps must be > 0");
    if (checkpoint_every <= 0) throw std::invalid_argument("ppo: checkpoint_every must be > 0");
    if (stats_window <= 0) throw std::invalid_argument("ppo: stats_window must be > 0");
}

double EpisodeWindow::mean() const {
    if (items_.empty()) return std::numeric_limits<double>::quiet_NaN();
    double s = 0.0;
    for (const double v : items_) s += v;
    return s / static_cast<double>(items_.size());
}

RolloutCollector::RolloutCollector(const KinematicChain& chain, const EnvParams& env_params,
                                   int n_envs, std::uint64_t seed, double metric_gamma,
                                   std::size_t stats_window)
    : action_rng_(derive_seed(seed, 0)),
      metric_gamma_(metric_gamma),
      ep_reward_window_(stats_window),
      disc_return_window_(stats_window),
      final_dist_window_(stats_window) {
    envs_.reserve(static_cast<std::size_t>(n_envs));
    for (int e = 0; e < n_envs; ++e) {
        envs_.emplace_back(chain, env_params, derive_seed(seed, static_cast<std::uint64_t>(e) + 1));
    }
    last_obs_.resize(envs_.size());
    accum_.resize(envs_.size());
    for (std::size_t e = 0; e < envs_.size(); ++e) last_obs_[e] = envs_[e].reset();
}

RolloutBuffer RolloutCollector::collect(const PolicyParams& params, int n_steps) {
    const int n_envs = static_cast<int>(envs_.size());
    if (n_steps <= 0 || n_steps % n_envs != 0) {
        throw std::invalid_argument("collect: n_steps must be a positive multiple of n_envs");
    }
    RolloutBuffer buf;
    buf.n_envs = n_envs;
    buf.steps_per_env = n_steps / n_envs;
    const auto total = static_cast<std::size_t>(n_steps);
    buf.obs.resize(total);
    buf.actions.resize(total);
    buf.log_prob_old.resize(total);
    buf.rewards.resize(total);
    buf.values_old.resize(total);
    buf.dones.resize(total);
    buf.bootstrap_values.resize(static_cast<std::size_t>(n_envs));

    for (int e = 0; e < n_envs; ++e) {
        ReachEnv& env = envs_[static_cast<std::size_t>(e)];
        EpisodeAccum& acc = accum_[static_cast<std::size_t>(e)];
        for (int t = 0; t < buf.steps_per_env; ++t) {
            const std::size_t i = buf.index(e, t);
            buf.obs[i] = last_obs_[static_cast<std::size_t>(e)];

            const ActorCriticOut fwd = actor_critic_forward(params, buf.obs[i]);
            std::array<double, kActDim> action;
            for (int k = 0; k < kActDim; ++k) {
                const auto ki = static_cast<std::size_t>(k);
                action[ki] = fwd.mean[ki] + fwd.std[ki] * action_rng_.normal();
            }
            buf.actions[i] = action;
            buf.log_prob_old[i] = gaussian_log_prob(fwd.mean, fwd.std, action);
            buf.values_old[i] = fwd.value;

            const StepResult sr = env.step(action);
            buf.rewards[i] = sr.reward;
            buf.dones[i] = sr.done ? 1 : 0;
            ++total_env_steps_;

            acc.reward_sum += sr.reward;
            acc.disc_sum += acc.discount * sr.reward;
            acc.discount *= metric_gamma_;

            if (sr.done) {
                buf.ep_rewards.push_back(acc.reward_sum);
                buf.ep_disc_returns.push_back(acc.disc_sum);
                buf.ep_final_dists.push_back(sr.hand_target_dist);
                ep_reward_window_.push(acc.reward_sum);
                disc_return_window_.push(acc.disc_sum);
                final_dist_window_.push(sr.hand_target_dist);
                acc = EpisodeAccum{};
                last_obs_[static_cast<std::size_t>(e)] = env.reset();
            } else {
                last_obs_[static_cast<std::size_t>(e)] = sr.obs;
            }
        }
        buf.bootstrap_values[static_cast<std::size_t>(e)] =
            actor_critic_forward(params, last_obs_[static_cast<std::size_t>(e)]).value;
    }
    return buf;
}

void compute_gae(const RolloutBuffer& buffer, double gamma, double lambda,
                 std::vector<double>& advantages, std::vector<double>& returns) {
    advantages.assign(buffer.size(), 0.0);
    returns.assign(buffer.size(), 0.0);
    for (int e = 0; e < buffer.n_envs; ++e) {
        double next_adv = 0.0;
        for (int t = buffer.steps_per_env - 1; t >= 0; --t) {
            const std::size_t i = buffer.index(e, t);
            const double nonterminal = buffer.dones[i] ? 0.0 : 1.0;
            const double next_value = (t == buffer.steps_per_env - 1)
                                          ? buffer.bootstrap_values[static_cast<std::size_t>(e)]
                                          : buffer.values_old[i + 1];
            const double delta =
                buffer.rewards[i] + gamma * next_value * nonterminal - buffer.values_old[i];
            next_adv = delta + gamma * lambda * nonterminal * next_adv;
            advantages[i] = next_adv;
            returns[i] = next_adv + buffer.values_old[i];
        }
    }
}

LossStats ppo_loss(const PolicyParams& params, const RolloutBuffer& buffer,
                   std::span<const std::size_t> idx, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config,
                   std::vector<double>* grads) {
    if (idx.empty()) throw std::invalid_argument("ppo_loss: empty minibatch");
    const double w = 1.0 / static_cast<double>(idx.size());
    const double eps = config.clip_eps;

    LossStats stats;
    ForwardCache cache;
    const auto log_std_info = param_layout()[static_cast<std::size_t>(Block::LogStd)];

    for (const std::size_t i : idx) {
        const ActorCriticOut fwd = actor_critic_forward(params, buffer.obs[i], &cache);
        const double logp_new = gaussian_log_prob(fwd.mean, fwd.std, buffer.actions[i]);
        const double ratio = std::exp(logp_new - buffer.log_prob_old[i]);
        if (!std::isfinite(ratio)) {
            throw std::runtime_error("ppo_loss: non-finite probability ratio at sample " +
                                     std::to_string(i));
        }
        const double adv = advantages[i];
        const double clipped_ratio = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
        const double surr_unclipped = ratio * adv;
        const double surr_clipped = clipped_ratio * adv;
        const bool use_unclipped = surr_unclipped <= surr_clipped;
        const double surr = use_unclipped ? surr_unclipped : surr_clipped;

        const double v_err = fwd.value - returns[i];
        const double entropy = gaussian_entropy(fwd.std);

        stats.policy += w * (-surr);
        stats.value += w * (v_err * v_err);
        stats.entropy += w * entropy;
        stats.approx_kl += w * (buffer.log_prob_old[i] - logp_new);

        if (grads) {
            // d(total)/d(logp_new); clipped branch has zero pathwise gradient
            const double d_logp = -w * (use_unclipped ? surr_unclipped : 0.0);
            std::array<double, kActDim> d_mean;
            for (int k = 0; k < kActDim; ++k) {
                const auto ki = static_cast<std::size_t>(k);
                const double z = (buffer.actions[i][ki] - fwd.mean[ki]) / fwd.std[ki];
                d_mean[ki] = d_logp * (z / fwd.std[ki]);
                const double d_log_sigma = d_logp * (z * z - 1.0) - config.entropy_coef * w;
                (*grads)[log_std_info.offset + ki] += d_log_sigma;
            }
            backward_actor(params, cache, d_mean, *grads);
            backward_critic(params, cache, w * config.value_coef * 2.0 * v_err, *grads);
        }
    }

    stats.total = stats.policy + config.value_coef * stats.value - config.entropy_coef * stats.entropy;
    if (!std::isfinite(stats.total)) throw std::runtime_error("ppo_loss: non-finite loss");
    return stats;
}

AdamState AdamState::zeros() {
    AdamState s;
    s.m.assign(param_count(), 0.0);
    s.v.assign(param_count(), 0.0);
    return s;
}

namespace {

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-8;

void check_finite(const PolicyParams& params) {
    for (const double v : params.flat) {
        if (!std::isfinite(v)) {
            throw std::runtime_error("ppo: parameters diverged (non-finite value)");
        }
    }
}

}  // namespace

UpdateStats update(PolicyParams& params, AdamState& adam, const RolloutBuffer& buffer,
                   const PpoConfig& config, Rng& rng) {
    const auto& ops = kern::active_ops();
    const std::size_t n = buffer.size();

    std::vector<double> advantages, returns;
    compute_gae(buffer, config.gamma, config.gae_lambda, advantages, returns);

    // Normalize advantages once per update.
    double mean = 0.0;
    for (const double a : advantages) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (const double a : advantages) var += (a - mean) * (a - mean);
    var /= static_cast<double>(n);
    const double inv_std = 1.0 / (std::sqrt(var) + 1e-8);
    for (double& a : advantages) a = (a - mean) * inv_std;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> grads(param_count(), 0.0);
    UpdateStats stats;
    long batches = 0;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.minibatch)) {
            const std::size_t count =
                std::min(static_cast<std::size_t>(config.minibatch), n - start);
            std::fill(grads.begin(), grads.end(), 0.0);
            const LossStats loss =
                ppo_loss(params, buffer, {order.data() + start, count}, advantages, returns,
                         config, &grads);

            const double norm = std::sqrt(ops.sum_sq(grads.data(), grads.size()));
            if (!std::isfinite(norm)) throw std::runtime_error("ppo: non-finite gradient norm");
            if (norm > config.grad_norm_clip && norm > 0.0) {
                ops.scale(grads.data(), config.grad_norm_clip / norm, grads.size());
            }

            ++adam.t;
            const double bc1 = 1.0 - std::pow(kAdamBeta1, static_cast<double>(adam.t));
            const double bc2 = 1.0 - std::pow(kAdamBeta2, static_cast<double>(adam.t));
            ops.adam_step(params.flat.data(), grads.data(), adam.m.data(), adam.v.data(),
                          params.flat.size(), config.learning_rate, kAdamBeta1, kAdamBeta2,
                          kAdamEps, bc1, bc2);
            clamp_log_std(params);

            stats.policy_loss += loss.policy;
            stats.value_loss += loss.value;
            stats.entropy += loss.entropy;
            stats.approx_kl += loss.approx_kl;
            ++batches;
        }
        check_finite(params);
    }

    const double inv_batches = 1.0 / static_cast<double>(batches);
    stats.policy_loss *= inv_batches;
    stats.value_loss *= inv_batches;
    stats.entropy *= inv_batches;
    stats.approx_kl *= inv_batches;
    return stats;
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

}  // namespace

std::string trainlog_csv_header() {
    return "update,steps,mean_ep_reward,mean_disc_return,pi_loss,v_loss,approx_kl,mean_final_dist";
}

std::string trainlog_csv_row(const TrainLogRow& r) {
    std::string out = std::to_string(r.update) + "," + std::to_string(r.steps);
    for (const double v : {r.mean_ep_reward, r.mean_disc_return, r.pi_loss, r.v_loss,
                           r.approx_kl, r.mean_final_dist}) {
        out += "," + format_double(v);
    }
    return out;
}

std::vector<TrainLogRow> read_trainlog_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open train log " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != trainlog_csv_header()) {
        throw std::runtime_error("train log " + path.string() + ": unexpected header");
    }
    std::vector<TrainLogRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 8) {
            throw std::runtime_error("train log " + path.string() + ": malformed row '" + line + "'");
        }
        TrainLogRow r;
        try {
            r.update = std::stol(fields[0]);
            r.steps = std::stol(fields[1]);
            r.mean_ep_reward = std::stod(fields[2]);
            r.mean_disc_return = std::stod(fields[3]);
            r.pi_loss = std::stod(fields[4]);
            r.v_loss = std::stod(fields[5]);
            r.approx_kl = std::stod(fields[6]);
            r.mean_final_dist = std::stod(fields[7]);
        } catch (const std::exception&) {
            throw std::runtime_error("train log " + path.string() + ": malformed row '" + line + "'");
        }
        rows.push_back(r);
    }
    return rows;
}

TrainResult train(const KinematicChain& chain, const EnvParams& env_params,
                  const PpoConfig& config, std::uint64_t seed,
                  const std::optional<std::filesystem::path>& out_dir, std::ostream* progress) {
    config.validate();

    TrainResult result;
    result.params = init_policy(seed);
    AdamState adam = AdamState::zeros();
    RolloutCollector collector(chain, env_params, config.n_envs, derive_seed(seed, 100),
                               config.metric_gamma, static_cast<std::size_t>(config.stats_window));
    Rng update_rng(derive_seed(seed, 200));

    if (out_dir) std::filesystem::create_directories(*out_dir);

    std::string csv = trainlog_csv_header() + "\n";
    long update_idx = 0;
    while (collector.total_env_steps() < config.total_steps) {
        const RolloutBuffer buffer = collector.collect(result.params, config.n_steps);
        const UpdateStats stats = update(result.params, adam, buffer, config, update_rng);
        ++update_idx;

        TrainLogRow row;
        row.update = update_idx;
        row.steps = collector.total_env_steps();
        row.mean_ep_reward = collector.running_ep_reward();
        row.mean_disc_return = collector.running_disc_return();
        row.pi_loss = stats.policy_loss;
        row.v_loss = stats.value_loss;
        row.approx_kl = stats.approx_kl;
        row.mean_final_dist = collector.running_final_dist();
        result.log.push_back(row);
        csv += trainlog_csv_row(row) + "\n";

        if (progress) {
            (*progress) << "update " << row.update << " steps " << row.steps << " disc_return "
                        << row.mean_disc_return << " final_dist " << row.mean_final_dist
                        << " kl " << row.approx_kl << "\n";
            progress->flush();
        }

        if (out_dir && update_idx % config.checkpoint_every == 0) {
            char name[64];
            std::snprintf(name, sizeof(name), "checkpoint_%06ld.bin", update_idx);
            save_policy(*out_dir / name, result.params);
        }
    }

    if (out_dir) {
        save_policy(*out_dir / "policy_final.bin", result.params);
        atomic_write_text(*out_dir / "trainlog.csv", csv);
    }
    return result;
}

EvalReport evaluate_policy(const KinematicChain& chain, const EnvParams& env_params,
                           const PolicyParams& params, int n_episodes, std::uint64_t seed) {
    if (n_episodes <= 0) throw std::invalid_argument("evaluate_policy: n_episodes must be > 0");

    ReachEnv env(chain, env_params, derive_seed(seed, 300));
    std::vector<double> final_dists;
    double reward_total = 0.0;
    int successes = 0;

    for (int ep = 0; ep < n_episodes; ++ep) {
        Observation obs = env.reset();
        double final_dist = 0.0;
        while (true) {
            const ActorCriticOut fwd = actor_critic_forward(params, obs);
            const StepResult sr = env.step(fwd.mean);
            reward_total += sr.reward;
            obs = sr.obs;
            if (sr.done) {
                final_dist = sr.hand_target_dist;
                break;
            }
        }
        final_dists.push_back(final_dist);
        if (final_dist < 0.1) ++successes;
    }

    EvalReport report;
    report.episodes = n_episodes;
    report.mean_final_dist = 0.0;
    for (const double v : final_dists) report.mean_final_dist += v;
    report.mean_final_dist /= static_cast<double>(n_episodes);
    std::vector<double> sorted = final_dists;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = sorted.size() / 2;
    report.median_final_dist = (sorted.size() % 2 == 1)
                                   ? sorted[half]
                                   : 0.5 * (sorted[half - 1] + sorted[half]);
    report.mean_ep_reward = reward_total / static_cast<double>(n_episodes);
    report.success_rate = static_cast<double>(successes) / static_cast<double>(n_episodes);
    return report;
}

}  // namespace reachbot
