#include <doctest.h>

#include <cmath>

#include "reachbot/ik.hpp"
#include "reachbot/rng.hpp"
#include "test_util.hpp"

using namespace reachbot;

namespace {

std::vector<std::string> arm_joints(const KinematicChain& chain) {
    std::vector<std::string> names;
    for (const int j : chain.ancestor_joints("right_hand")) {
        names.push_back(chain.joints()[static_cast<std::size_t>(j)].name);
    }
    return names;
}

Vec3 hand_at(const KinematicChain& chain, std::span<const double> q) {
    const FkResult fk = chain.forward_kinematics(q);
    return chain.frame_pose(fk, "right_hand").translation;
}

}  // namespace

TEST_CASE("planar two-link stretches to a boundary target") {
    // the fully stretched solution sits on a Jacobian singularity, so the
    // final approach is slow; give the solver room to polish
    const KinematicChain chain = test::load_planar_chain();
    IkParams params;
    params.frame = "tip";
    params.tolerance = 1e-7;
    params.max_iters = 20000;
    params.restarts = 0;
    const std::vector<double> q0{0.1, 0.1};
    const IkResult res = solve_ik(chain, {2.0, 0.0, 0.0}, q0, params);
    CHECK(res.residual < 1e-6);
    CHECK(std::abs(res.q[0]) < 1e-3);
    CHECK(std::abs(res.q[1]) < 1e-3);
}

TEST_CASE("fk-generated targets are recovered") {
    const RunConfig cfg = test::load_default_config();
    IkParams params;
    params.active_joints = arm_joints(cfg.chain);

    Rng rng(121);
    const std::vector<double> home(6, 0.0);
    int converged = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<double> q_star(6, 0.0);
        // feasible arm configurations; head joints stay home (they cannot
        // move the hand anyway)
        for (const int j : cfg.chain.ancestor_joints("right_hand")) {
            const auto& joint = cfg.chain.joints()[static_cast<std::size_t>(j)];
            q_star[static_cast<std::size_t>(j)] = rng.uniform(joint.lo, joint.hi);
        }
        const Vec3 target = hand_at(cfg.chain, q_star);
        const IkResult res = solve_ik(cfg.chain, target, home, params);
        if (res.converged) {
            ++converged;
            CHECK(res.residual < 1e-3);
        }
        CHECK(cfg.chain.within_limits(res.q, 1e-12));
    }
    CHECK(converged >= 95);
}

TEST_CASE("unreachable target reports honest residual") {
    const RunConfig cfg = test::load_default_config();
    IkParams params;
    params.active_joints = arm_joints(cfg.chain);
    const std::vector<double> home(6, 0.0);

    const Vec3 far{10.0, 0.0, 0.0};
    const IkResult res = solve_ik(cfg.chain, far, home, params);
    CHECK(!res.converged);
    // hand can reach at most ~1 m from the base, so the residual is roughly
    // the target distance minus max reach
    CHECK(res.residual > 8.5);
    CHECK(res.residual < 10.0);
}

TEST_CASE("best iterate never loses to the start") {
    const RunConfig cfg = test::load_default_config();
    IkParams params;
    params.active_joints = arm_joints(cfg.chain);
    Rng rng(122);
    const std::vector<double> home(6, 0.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 target{rng.uniform(0.2, 1.2), rng.uniform(-0.8, 0.8), rng.uniform(0.2, 1.2)};
        const double start_residual = distance(hand_at(cfg.chain, home), target);
        const IkResult res = solve_ik(cfg.chain, target, home, params);
        CHECK(res.residual <= start_residual + 1e-15);
        CHECK(res.iterations <= params.max_iters);
        if (res.converged) CHECK(res.residual <= params.tolerance);
    }
}

TEST_CASE("ik input validation") {
    const RunConfig cfg = test::load_default_config();
    const std::vector<double> home(6, 0.0);
    IkParams params;

    SUBCASE("bad damping") {
        params.damping = 0.0;
        CHECK_THROWS_AS(solve_ik(cfg.chain, {0.5, 0, 0.5}, home, params), std::invalid_argument);
    }
    SUBCASE("non-finite target") {
        CHECK_THROWS_AS(solve_ik(cfg.chain, {std::nan(""), 0, 0}, home, params),
                        std::invalid_argument);
    }
    SUBCASE("q0 outside limits") {
        std::vector<double> bad(6, 0.0);
        bad[0] = 100.0;
        CHECK_THROWS_AS(solve_ik(cfg.chain, {0.5, 0, 0.5}, bad, params), std::invalid_argument);
    }
    SUBCASE("unknown frame") {
        params.frame = "nope";
        CHECK_THROWS_AS(solve_ik(cfg.chain, {0.5, 0, 0.5}, home, params), std::invalid_argument);
    }
    SUBCASE("unknown active joint") {
        params.active_joints = {"ghost"};
        CHECK_THROWS_AS(solve_ik(cfg.chain, {0.5, 0, 0.5}, home, params), std::invalid_argument);
    }
}

TEST_CASE("head joints stay put during arm ik") {
    const RunConfig cfg = test::load_default_config();
    IkParams params;
    params.active_joints = arm_joints(cfg.chain);
    const std::vector<double> home(6, 0.0);
    const IkResult res = solve_ik(cfg.chain, {0.6, -0.1, 0.8}, home, params);
    CHECK(res.q[4] == 0.0);
    CHECK(res.q[5] == 0.0);
}
