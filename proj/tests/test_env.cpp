#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "reachbot/env.hpp"
#include "test_util.hpp"

using namespace reachbot;

namespace {

// 6-joint chain whose hand sits at (1.2, 0, 0) at the zero pose; handy for
// pinning the position-normalization bound.
const char* kFlatChain = R"({
  "joints": [
    {"name": "j0", "parent": -1, "axis": [0,0,1], "limits": [-1.0, 1.0]},
    {"name": "j1", "parent": 0, "offset": {"xyz": [0.3,0,0]}, "axis": [0,0,1], "limits": [-2.0, 0.5]},
    {"name": "j2", "parent": 1, "offset": {"xyz": [0.3,0,0]}, "axis": [0,0,1], "limits": [-0.5, 2.0]},
    {"name": "j3", "parent": 2, "offset": {"xyz": [0.3,0,0]}, "axis": [0,0,1], "limits": [-1.5, 1.5]},
    {"name": "j4", "parent": 0, "offset": {"xyz": [0,0,0.5]}, "axis": [0,0,1], "limits": [-1.0, 1.0], "velocity_limit": 0.75},
    {"name": "j5", "parent": 4, "axis": [0,1,0], "limits": [-1.0, 1.0], "velocity_limit": 0.75}
  ],
  "end_effectors": {
    "right_hand": {"joint": "j3", "offset": {"xyz": [0.3,0,0]}},
    "head": {"joint": "j5", "offset": {"xyz": [0.1,0,0]}}
  }
})";

}  // namespace

TEST_CASE("arm reward closed forms") {
    CHECK(arm_reward({0.3, 0.2, 0.1}, {0.3, 0.2, 0.1}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(arm_reward({0, 0, 0}, {1, 0, 0}) == doctest::Approx(0.3678794).epsilon(1e-7));
    CHECK(arm_reward({0, 0, 0}, {0.1, 0, 0}) == doctest::Approx(0.9048374).epsilon(1e-7));
}

TEST_CASE("head reward closed forms") {
    CHECK(head_reward({1, 0, 0}, {1, 0, 0}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(head_reward({1, 0, 0}, {-1, 0, 0}) == doctest::Approx(0.1353353).epsilon(1e-7));
    CHECK(head_reward({1, 0, 0}, {0, 1, 0}) == doctest::Approx(0.2431167).epsilon(1e-7));
}

TEST_CASE("head reward rejects non-unit inputs") {
    CHECK_THROWS_AS(head_reward({2, 0, 0}, {1, 0, 0}), std::invalid_argument);
    CHECK_THROWS_AS(head_reward({1, 0, 0}, {0.5, 0, 0}), std::invalid_argument);
}

TEST_CASE("combined reward") {
    const RewardWeights w;
    CHECK(combined_reward(1.0, 1.0, w) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(combined_reward(0.5, 0.5, w) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(combined_reward(std::exp(-1.0), 1.0, w) == doctest::Approx(0.5259096).epsilon(1e-7));
}

TEST_CASE("arm reward is strictly decreasing in distance") {
    Rng rng(21);
    std::vector<double> dists;
    for (int i = 0; i < 200; ++i) dists.push_back(rng.uniform(0.0, 3.0));
    std::sort(dists.begin(), dists.end());
    for (std::size_t i = 1; i < dists.size(); ++i) {
        if (dists[i] == dists[i - 1]) continue;
        CHECK(arm_reward({dists[i], 0, 0}, {0, 0, 0}) < arm_reward({dists[i - 1], 0, 0}, {0, 0, 0}));
    }
}

TEST_CASE("sample_target") {
    const TargetRanges ranges;  // defaults

    SUBCASE("10000 seeded samples stay inside the offset box") {
        Rng rng(22);
        for (int i = 0; i < 10000; ++i) {
            const Vec3 t = sample_target(rng, ranges);
            CHECK(t.x >= ranges.x_lo);
            CHECK(t.x <= ranges.x_hi);
            CHECK(t.y >= ranges.y_lo + ranges.y_offset);
            CHECK(t.y <= ranges.y_hi + ranges.y_offset);
            CHECK(t.z >= ranges.z_lo);
            CHECK(t.z <= ranges.z_hi);
        }
    }
    SUBCASE("degenerate ranges give a constant point") {
        TargetRanges point = ranges;
        point.x_lo = point.x_hi = 0.7;
        point.y_lo = point.y_hi = 0.1;
        point.z_lo = point.z_hi = 0.6;
        Rng rng(23);
        const Vec3 t = sample_target(rng, point);
        CHECK(t.x == 0.7);
        CHECK(t.y == doctest::Approx(0.15).epsilon(1e-15));
        CHECK(t.z == 0.6);
    }
    SUBCASE("same seed gives the same sequence") {
        Rng a(24), b(24);
        for (int i = 0; i < 32; ++i) {
            const Vec3 ta = sample_target(a, ranges);
            const Vec3 tb = sample_target(b, ranges);
            CHECK(ta.x == tb.x);
            CHECK(ta.y == tb.y);
            CHECK(ta.z == tb.z);
        }
    }
    SUBCASE("invalid ranges are rejected") {
        TargetRanges bad = ranges;
        bad.x_lo = 1.0;
        bad.x_hi = 0.5;
        Rng rng(25);
        CHECK_THROWS_AS(sample_target(rng, bad), std::invalid_argument);
    }
}

TEST_CASE("build_observation normalization") {
    const KinematicChain chain = chain_from_json_text(kFlatChain);
    const EnvParams params;

    SUBCASE("joint angles map limits to -1/+1 and midpoints to 0") {
        std::vector<double> q(6);
        for (std::size_t j = 0; j < 6; ++j) q[j] = chain.joints()[j].lo;
        Observation lo = build_observation(chain, q, {0.7, 0, 0.7}, params);
        for (int i = 0; i < 6; ++i) CHECK(lo[static_cast<std::size_t>(i)] == doctest::Approx(-1.0).epsilon(1e-12));

        for (std::size_t j = 0; j < 6; ++j) {
            q[j] = 0.5 * (chain.joints()[j].lo + chain.joints()[j].hi);
        }
        Observation mid = build_observation(chain, q, {0.7, 0, 0.7}, params);
        for (int i = 0; i < 6; ++i) CHECK(std::abs(mid[static_cast<std::size_t>(i)]) < 1e-12);
    }

    SUBCASE("hand at the normalization bound maps to (1,0,0)") {
        const std::vector<double> q(6, 0.0);
        const Observation obs = build_observation(chain, q, {0.7, 0, 0.7}, params);
        CHECK(obs[6] == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(obs[7] == doctest::Approx(0.0).epsilon(1e-12));
        CHECK(obs[8] == doctest::Approx(0.0).epsilon(1e-12));
    }

    SUBCASE("positions beyond the bound clamp to [-1,1]") {
        const std::vector<double> q(6, 0.0);
        const Observation obs = build_observation(chain, q, {5.0, -5.0, 0.7}, params);
        CHECK(obs[9] == 1.0);
        CHECK(obs[10] == -1.0);
    }

    SUBCASE("all components stay in [-1,1] and directions are unit") {
        Rng rng(26);
        for (int i = 0; i < 500; ++i) {
            std::vector<double> q(6);
            for (std::size_t j = 0; j < 6; ++j) {
                q[j] = rng.uniform(chain.joints()[j].lo, chain.joints()[j].hi);
            }
            const Vec3 target{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const Observation obs = build_observation(chain, q, target, params);
            for (const double v : obs) {
                CHECK(v >= -1.0);
                CHECK(v <= 1.0);
            }
            const double head_norm = std::sqrt(obs[12] * obs[12] + obs[13] * obs[13] + obs[14] * obs[14]);
            const double dir_norm = std::sqrt(obs[15] * obs[15] + obs[16] * obs[16] + obs[17] * obs[17]);
            CHECK(std::abs(head_norm - 1.0) < 1e-9);
            CHECK(std::abs(dir_norm - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("reset semantics") {
    const RunConfig cfg = test::load_default_config();

    SUBCASE("fresh counters and home pose") {
        ReachEnv env(cfg.chain, cfg.env, 30);
        env.reset();
        CHECK(env.step_count() == 0);
        CHECK(!env.done());
        for (const double q : env.q()) CHECK(q == 0.0);
    }
    SUBCASE("same seed, same observations") {
        ReachEnv a(cfg.chain, cfg.env, 31), b(cfg.chain, cfg.env, 31);
        const Observation oa = a.reset();
        const Observation ob = b.reset();
        CHECK(oa == ob);
    }
    SUBCASE("targets differ across 100 seeds") {
        std::set<double> xs;
        for (int s = 0; s < 100; ++s) {
            ReachEnv env(cfg.chain, cfg.env, static_cast<std::uint64_t>(s));
            env.reset();
            xs.insert(env.target().x);
        }
        CHECK(xs.size() == 100);
    }
}

TEST_CASE("step semantics") {
    const RunConfig cfg = test::load_default_config();

    SUBCASE("zero action leaves joints in place with positive reward") {
        ReachEnv env(cfg.chain, cfg.env, 32);
        env.reset();
        const std::array<double, 6> zero{};
        const StepResult sr = env.step(zero);
        for (const double q : env.q()) CHECK(q == 0.0);
        CHECK(sr.reward > 0.0);
        CHECK(sr.reward <= 1.0);
    }

    SUBCASE("velocity integration arithmetic") {
        ReachEnv env(cfg.chain, cfg.env, 33);
        env.reset();
        std::array<double, 6> a{};
        a[3] = 1.0;  // elbow, v_max 1.0 -> +0.02 rad
        env.step(a);
        CHECK(env.q()[3] == doctest::Approx(0.02).epsilon(1e-12));

        a = {};
        a[4] = 1.0;  // head yaw, v_max 0.75 -> +0.015 rad
        env.step(a);
        CHECK(env.q()[4] == doctest::Approx(0.015).epsilon(1e-12));
    }

    SUBCASE("action components clamp to [-1,1]") {
        ReachEnv env(cfg.chain, cfg.env, 34);
        env.reset();
        std::array<double, 6> a{};
        a[3] = 100.0;
        env.step(a);
        CHECK(env.q()[3] == doctest::Approx(0.02).epsilon(1e-12));
    }

    SUBCASE("250 zero-action steps time out") {
        ReachEnv env(cfg.chain, cfg.env, 35);
        env.reset();
        const std::array<double, 6> zero{};
        StepResult sr;
        for (int i = 0; i < 250; ++i) {
            CHECK(!env.done());
            sr = env.step(zero);
        }
        CHECK(sr.done);
        CHECK(env.step_count() == 250);
        CHECK_THROWS_AS(env.step(zero), std::logic_error);
    }

    SUBCASE("joint limits and episode length hold under 10000 random actions") {
        ReachEnv env(cfg.chain, cfg.env, 36);
        env.reset();
        Rng rng(36);
        for (int i = 0; i < 10000; ++i) {
            if (env.done()) env.reset();
            std::array<double, 6> a;
            for (double& v : a) v = rng.uniform(-1.5, 1.5);
            env.step(a);
            CHECK(env.chain().within_limits(env.q()));
            CHECK(env.step_count() <= cfg.env.max_steps);
        }
    }

    SUBCASE("reward stays in (0,1] along random trajectories") {
        ReachEnv env(cfg.chain, cfg.env, 37);
        env.reset();
        Rng rng(37);
        for (int i = 0; i < 2000; ++i) {
            if (env.done()) env.reset();
            std::array<double, 6> a;
            for (double& v : a) v = rng.uniform(-1.0, 1.0);
            const StepResult sr = env.step(a);
            CHECK(sr.reward > 0.0);
            CHECK(sr.reward <= 1.0);
        }
    }

    SUBCASE("deterministic given seed and action sequence") {
        ReachEnv a(cfg.chain, cfg.env, 38), b(cfg.chain, cfg.env, 38);
        a.reset();
        b.reset();
        Rng ra(39), rb(39);
        for (int i = 0; i < 500; ++i) {
            if (a.done()) {
                a.reset();
                b.reset();
            }
            std::array<double, 6> act_a, act_b;
            for (double& v : act_a) v = ra.uniform(-1, 1);
            for (double& v : act_b) v = rb.uniform(-1, 1);
            const StepResult sa = a.step(act_a);
            const StepResult sb = b.step(act_b);
            CHECK(sa.obs == sb.obs);
            CHECK(sa.reward == sb.reward);
            CHECK(sa.done == sb.done);
        }
    }
}

TEST_CASE("reward equals 1 only at perfect hand and gaze alignment") {
    // r = w1*a_r + w2*h_r with both factors in (0,1]; probing the bound.
    const RewardWeights w;
    CHECK(combined_reward(1.0, 1.0, w) == 1.0);
    CHECK(combined_reward(1.0 - 1e-9, 1.0, w) < 1.0);
    CHECK(combined_reward(1.0, 1.0 - 1e-9, w) < 1.0);
}
