// reachbot command line: train / eval / rollout / ik-check / export.
// Exit codes: 0 success, 1 usage or config error, 2 runtime failure.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "reachbot/config.hpp"
#include "reachbot/ik.hpp"
#include "reachbot/kernels.hpp"
#include "reachbot/percept.hpp"
#include "reachbot/policy.hpp"
#include "reachbot/ppo.hpp"

namespace fs = std::filesystem;
using namespace reachbot;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void atomic_write_text(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

RunConfig load_config_checked(const std::string& path) {
    try {
        return load_config(path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
}

std::vector<std::string> arm_joint_names(const KinematicChain& chain) {
    std::vector<std::string> names;
    for (const int j : chain.ancestor_joints("right_hand")) {
        names.push_back(chain.joints()[static_cast<std::size_t>(j)].name);
    }
    return names;
}

int cmd_train(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
              std::optional<long> total_steps_override) {
    RunConfig cfg = load_config_checked(config_path);
    if (total_steps_override) cfg.ppo.total_steps = *total_steps_override;
    try {
        cfg.ppo.validate();
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    std::cout << "kernels: " << kern::active_ops().name << "\n";
    train(cfg.chain, cfg.env, cfg.ppo, seed, fs::path(out_dir), &std::cout);
    std::cout << "wrote " << out_dir << "/trainlog.csv and " << out_dir << "/policy_final.bin\n";
    return 0;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint, int episodes,
             std::uint64_t seed) {
    RunConfig cfg = load_config_checked(config_path);
    const PolicyParams params = load_policy(checkpoint);
    const EvalReport report = evaluate_policy(cfg.chain, cfg.env, params, episodes, seed);
    std::cout << "episodes " << report.episodes << "\n"
              << "mean_final_dist " << fmt(report.mean_final_dist) << "\n"
              << "median_final_dist " << fmt(report.median_final_dist) << "\n"
              << "mean_ep_reward " << fmt(report.mean_ep_reward) << "\n"
              << "success_rate_0.1m " << fmt(report.success_rate) << "\n";
    return 0;
}

int cmd_rollout(const std::string& config_path, const std::string& checkpoint, int steps,
                std::uint64_t seed, const std::string& out_file,
                const std::vector<double>& fixed_target, const std::string& depth_dir,
                const std::string& detections_path) {
    RunConfig cfg = load_config_checked(config_path);
    const PolicyParams params = load_policy(checkpoint);

    const bool percept_mode = !depth_dir.empty();
    if (percept_mode == !fixed_target.empty()) {
        throw UsageError("rollout: pass either --target x,y,z or --depth-dir with --detections");
    }

    EnvParams env_params = cfg.env;
    env_params.max_steps = steps;
    ReachEnv env(cfg.chain, env_params, derive_seed(seed, 400));
    Observation obs = env.reset();

    std::optional<TargetPipeline> pipeline;
    std::vector<DetectionRecord> detections;
    bool have_target = false;
    if (percept_mode) {
        pipeline.emplace(cfg.perception, derive_seed(seed, 500));
        detections = read_detections(detections_path);
    } else {
        env.set_target({fixed_target[0], fixed_target[1], fixed_target[2]});
        have_target = true;
    }

    std::string csv = "step,q0,q1,q2,q3,q4,q5,hand_x,hand_y,hand_z,"
                      "target_x,target_y,target_z,reward,dist\n";
    long published_count = 0;

    for (int t = 0; t < steps; ++t) {
        if (percept_mode) {
            // One camera frame per control tick, id = step index.
            const fs::path frame_path = fs::path(depth_dir) / ("frame_" + std::to_string(t) + ".pgm");
            if (fs::exists(frame_path)) {
                const DepthImage depth = read_pgm16(frame_path);
                std::vector<DetectionBox> boxes;
                for (const DetectionRecord& rec : detections) {
                    if (rec.frame_id == t) boxes.push_back(rec.box);
                }
                const FkResult fk = cfg.chain.forward_kinematics(env.q());
                const RigidTransform camera_pose =
                    cfg.chain.frame_pose(fk, "head").compose(cfg.perception.camera_mount);
                const auto est = pipeline->process(depth, boxes, camera_pose,
                                                   static_cast<double>(t) * env_params.dt);
                if (est) {
                    env.set_target(est->point_base);
                    have_target = true;
                    ++published_count;
                }
            }
        }

        // Hold still until the first target is known.
        std::array<double, kActDim> action{};
        if (have_target) {
            action = actor_critic_forward(params, obs).mean;
        }
        const StepResult sr = env.step(action);
        obs = sr.obs;

        csv += std::to_string(t);
        for (const double qv : env.q()) csv += "," + fmt(qv);
        const Vec3 hand = env.hand_position();
        for (const double v : {hand.x, hand.y, hand.z, env.target().x, env.target().y,
                               env.target().z, sr.reward, sr.hand_target_dist}) {
            csv += "," + fmt(v);
        }
        csv += "\n";
        if (sr.done && t + 1 < steps) {
            std::cerr << "rollout: episode ended early at step " << t
                      << (sr.self_collision ? " (self-collision)" : " (horizon)") << "\n";
            break;
        }
    }

    if (percept_mode && published_count == 0) {
        throw std::runtime_error("rollout: no valid target was ever published from " +
                                 detections_path);
    }
    atomic_write_text(out_file, csv);
    std::cout << "wrote " << out_file << "\n";
    return 0;
}

int cmd_ik_check(const std::string& config_path, int n_targets, std::uint64_t seed) {
    RunConfig cfg = load_config_checked(config_path);
    Rng rng(derive_seed(seed, 600));
    IkParams ik;
    ik.active_joints = arm_joint_names(cfg.chain);

    std::vector<double> q0(cfg.chain.joint_count(), 0.0);
    std::vector<double> residuals;
    int reachable = 0;
    for (int i = 0; i < n_targets; ++i) {
        const Vec3 target = sample_target(rng, cfg.env.target_ranges);
        const IkResult res = solve_ik(cfg.chain, target, q0, ik);
        residuals.push_back(res.residual);
        if (res.converged) ++reachable;
    }
    std::sort(residuals.begin(), residuals.end());
    const auto pct = [&](double p) {
        const std::size_t i = std::min(residuals.size() - 1,
                                       static_cast<std::size_t>(p * static_cast<double>(residuals.size())));
        return residuals[i];
    };
    std::cout << "targets " << n_targets << "\n"
              << "reachable_fraction "
              << fmt(static_cast<double>(reachable) / static_cast<double>(n_targets)) << "\n"
              << "residual_p50 " << fmt(pct(0.50)) << "\n"
              << "residual_p90 " << fmt(pct(0.90)) << "\n"
              << "residual_max " << fmt(residuals.back()) << "\n";
    return 0;
}

int cmd_export(const std::string& trainlog_path, const std::string& out_dir) {
    std::vector<TrainLogRow> rows;
    try {
        rows = read_trainlog_csv(trainlog_path);
    } catch (const std::exception& e) {
        throw UsageError(e.what());
    }
    if (rows.empty()) throw UsageError("export: train log has no rows");

    fs::create_directories(out_dir);
    std::string disc = "steps,mean_disc_return\n";
    std::string dist = "steps,mean_final_dist\n";
    for (const TrainLogRow& r : rows) {
        disc += std::to_string(r.steps) + "," + fmt(r.mean_disc_return) + "\n";
        dist += std::to_string(r.steps) + "," + fmt(r.mean_final_dist) + "\n";
    }
    atomic_write_text(fs::path(out_dir) / "series_disc_return.csv", disc);
    atomic_write_text(fs::path(out_dir) / "series_final_dist.csv", dist);
    std::cout << "wrote " << out_dir << "/series_disc_return.csv and " << out_dir
              << "/series_final_dist.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"reachbot: PPO target-reaching behavior at desk scale"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, out_file, depth_dir, detections_path,
        trainlog_path;
    std::uint64_t seed = 0;
    int episodes = 100, steps = 250, n_targets = 1000;
    long total_steps = -1;
    std::vector<double> fixed_target;

    CLI::App* train_cmd = app.add_subcommand("train", "train a reaching policy");
    train_cmd->add_option("--config", config_path, "config document")->required();
    train_cmd->add_option("--seed", seed, "run seed");
    train_cmd->add_option("--out", out_dir, "output directory")->required();
    train_cmd->add_option("--total-steps", total_steps, "override ppo.total_steps");

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--config", config_path, "config document")->required();
    eval_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
    eval_cmd->add_option("--episodes", episodes, "episode count")->check(CLI::PositiveNumber);
    eval_cmd->add_option("--seed", seed, "eval seed");

    CLI::App* rollout_cmd = app.add_subcommand("rollout", "closed-loop rollout to CSV");
    rollout_cmd->add_option("--config", config_path, "config document")->required();
    rollout_cmd->add_option("--checkpoint", checkpoint, "policy checkpoint")->required();
    rollout_cmd->add_option("--steps", steps, "control steps")->check(CLI::PositiveNumber);
    rollout_cmd->add_option("--seed", seed, "rollout seed");
    rollout_cmd->add_option("--out", out_file, "trajectory CSV path")->required();
    rollout_cmd->add_option("--target", fixed_target, "fixed target x,y,z (meters)")
        ->delimiter(',')
        ->expected(3);
    rollout_cmd->add_option("--depth-dir", depth_dir, "directory of frame_<id>.pgm depth images");
    rollout_cmd->add_option("--detections", detections_path, "detections file");

    CLI::App* ik_cmd = app.add_subcommand("ik-check", "sampled-target reachability report");
    ik_cmd->add_option("--config", config_path, "config document")->required();
    ik_cmd->add_option("--targets", n_targets, "target count")->check(CLI::PositiveNumber);
    ik_cmd->add_option("--seed", seed, "sampling seed");

    CLI::App* export_cmd = app.add_subcommand("export", "train log to plot-ready series");
    export_cmd->add_option("--trainlog", trainlog_path, "trainlog.csv path")->required();
    export_cmd->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (train_cmd->parsed()) {
            return cmd_train(config_path, seed, out_dir,
                             total_steps > 0 ? std::optional<long>(total_steps) : std::nullopt);
        }
        if (eval_cmd->parsed()) return cmd_eval(config_path, checkpoint, episodes, seed);
        if (rollout_cmd->parsed()) {
            return cmd_rollout(config_path, checkpoint, steps, seed, out_file, fixed_target,
                               depth_dir, detections_path);
        }
        if (ik_cmd->parsed()) return cmd_ik_check(config_path, n_targets, seed);
        if (export_cmd->parsed()) return cmd_export(trainlog_path, out_dir);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
