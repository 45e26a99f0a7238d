#include <doctest.h>

#include <cmath>
#include <cstring>

#include "reachbot/chain.hpp"
#include "reachbot/config.hpp"
#include "reachbot/rng.hpp"
#include "test_util.hpp"

using namespace reachbot;

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 tip_position(const KinematicChain& chain, std::span<const double> q,
                  const std::string& frame) {
    const FkResult fk = chain.forward_kinematics(q);
    return chain.frame_pose(fk, frame).translation;
}

// Central finite differences on the frame position, h = 1e-6.
Jacobian fd_jacobian(const KinematicChain& chain, std::span<const double> q,
                     const std::string& frame) {
    const double h = 1e-6;
    Jacobian jac;
    jac.cols = chain.joint_count();
    jac.data.assign(3 * jac.cols, 0.0);
    std::vector<double> qp(q.begin(), q.end()), qm(q.begin(), q.end());
    for (std::size_t j = 0; j < chain.joint_count(); ++j) {
        qp[j] += h;
        qm[j] -= h;
        const Vec3 fp = tip_position(chain, qp, frame);
        const Vec3 fm = tip_position(chain, qm, frame);
        jac(0, j) = (fp.x - fm.x) / (2 * h);
        jac(1, j) = (fp.y - fm.y) / (2 * h);
        jac(2, j) = (fp.z - fm.z) / (2 * h);
        qp[j] = q[j];
        qm[j] = q[j];
    }
    return jac;
}

double max_rel_error(const Jacobian& a, const Jacobian& b) {
    double max_abs = 0.0, max_diff = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        max_abs = std::max(max_abs, std::abs(a.data[i]));
        max_diff = std::max(max_diff, std::abs(a.data[i] - b.data[i]));
    }
    return max_diff / std::max(max_abs, 1.0);
}

std::vector<double> random_config(const KinematicChain& chain, Rng& rng) {
    std::vector<double> q(chain.joint_count());
    for (std::size_t j = 0; j < q.size(); ++j) {
        q[j] = rng.uniform(chain.joints()[j].lo, chain.joints()[j].hi);
    }
    return q;
}

}  // namespace

TEST_CASE("planar 2-link forward kinematics") {
    const KinematicChain chain = test::load_planar_chain();
    REQUIRE(chain.joint_count() == 2);

    SUBCASE("straight chain") {
        const double q[] = {0.0, 0.0};
        const Vec3 tip = tip_position(chain, q, "tip");
        CHECK(tip.x == doctest::Approx(2.0).epsilon(1e-9));
        CHECK(tip.y == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(tip.z == doctest::Approx(0.0).epsilon(1e-9));
    }
    SUBCASE("base rotation") {
        const double q[] = {kPi / 2, 0.0};
        const Vec3 tip = tip_position(chain, q, "tip");
        CHECK(std::abs(tip.x) < 1e-9);
        CHECK(tip.y == doctest::Approx(2.0).epsilon(1e-9));
    }
    SUBCASE("elbow bend") {
        const double q[] = {kPi / 2, -kPi / 2};
        const Vec3 tip = tip_position(chain, q, "tip");
        CHECK(tip.x == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(tip.y == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("planar 2-link analytic jacobian") {
    const KinematicChain chain = test::load_planar_chain();
    const double q[] = {0.0, 0.0};
    const Jacobian jac = chain.jacobian(q, "tip");
    CHECK(jac(0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(jac(1, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(jac(2, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(jac(0, 1) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(jac(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(jac(2, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("jacobian matches finite differences over seeded configurations") {
    const KinematicChain planar = test::load_planar_chain();
    const RunConfig cfg = test::load_default_config();
    Rng rng(7);
    for (int trial = 0; trial < 100; ++trial) {
        {
            const auto q = random_config(planar, rng);
            CHECK(max_rel_error(planar.jacobian(q, "tip"), fd_jacobian(planar, q, "tip")) < 1e-5);
        }
        {
            const auto q = random_config(cfg.chain, rng);
            CHECK(max_rel_error(cfg.chain.jacobian(q, "right_hand"),
                                fd_jacobian(cfg.chain, q, "right_hand")) < 1e-5);
        }
    }
}

TEST_CASE("head jacobian has zero columns for arm joints") {
    const RunConfig cfg = test::load_default_config();
    Rng rng(8);
    const auto q = random_config(cfg.chain, rng);
    const Jacobian jac = cfg.chain.jacobian(q, "head");
    // joints 1..3 are the arm chain
    for (std::size_t j = 1; j <= 3; ++j) {
        CHECK(jac(0, j) == 0.0);
        CHECK(jac(1, j) == 0.0);
        CHECK(jac(2, j) == 0.0);
    }
}

TEST_CASE("default chain zero-pose fixtures") {
    const RunConfig cfg = test::load_default_config();
    REQUIRE(cfg.chain.joint_count() == 6);
    const std::vector<double> q(6, 0.0);

    // Composition of the fixed offsets in configs/default.json.
    const Vec3 hand = tip_position(cfg.chain, q, "right_hand");
    CHECK(hand.x == doctest::Approx(0.55).epsilon(1e-12));
    CHECK(hand.y == doctest::Approx(-0.155).epsilon(1e-12));
    CHECK(hand.z == doctest::Approx(1.08).epsilon(1e-12));

    const Vec3 head = tip_position(cfg.chain, q, "head");
    CHECK(head.x == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(head.z == doctest::Approx(1.12).epsilon(1e-12));
}

TEST_CASE("head direction") {
    const RunConfig cfg = test::load_default_config();
    const std::vector<double> zero(6, 0.0);

    SUBCASE("zero pose looks along +x") {
        const Vec3 dir = cfg.chain.head_direction(zero);
        CHECK(dir.x == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(dir.y) < 1e-9);
        CHECK(std::abs(dir.z) < 1e-9);
    }
    SUBCASE("pure yaw rotates to +y") {
        std::vector<double> q = zero;
        q[4] = kPi / 2;  // head_yaw
        const Vec3 dir = cfg.chain.head_direction(q);
        CHECK(std::abs(dir.x) < 1e-9);
        CHECK(dir.y == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(std::abs(dir.z) < 1e-9);
    }
    SUBCASE("unit norm everywhere") {
        Rng rng(9);
        for (int i = 0; i < 1000; ++i) {
            const auto q = random_config(cfg.chain, rng);
            CHECK(std::abs(cfg.chain.head_direction(q).norm() - 1.0) < 1e-9);
        }
    }
}

TEST_CASE("fk rotations stay orthonormal and fk is bitwise deterministic") {
    const RunConfig cfg = test::load_default_config();
    Rng rng(10);
    for (int i = 0; i < 200; ++i) {
        const auto q = random_config(cfg.chain, rng);
        const FkResult a = cfg.chain.forward_kinematics(q);
        const FkResult b = cfg.chain.forward_kinematics(q);
        for (std::size_t j = 0; j < a.joint_pose.size(); ++j) {
            CHECK(a.joint_pose[j].valid(1e-9));
            CHECK(std::memcmp(a.joint_pose[j].rotation.m.data(), b.joint_pose[j].rotation.m.data(),
                              9 * sizeof(double)) == 0);
        }
        for (std::size_t j = 0; j < a.ee_pose.size(); ++j) CHECK(a.ee_pose[j].valid(1e-9));
    }
}

TEST_CASE("transform_point") {
    SUBCASE("identity") {
        const Vec3 p = transform_point(RigidTransform::identity(), {1, 2, 3});
        CHECK(p.x == 1.0);
        CHECK(p.y == 2.0);
        CHECK(p.z == 3.0);
    }
    SUBCASE("pure translation") {
        RigidTransform t;
        t.translation = {0, 0, 0.5};
        const Vec3 p = transform_point(t, {0, 0, 0});
        CHECK(p.z == 0.5);
    }
    SUBCASE("inverse round trip") {
        Rng rng(11);
        for (int i = 0; i < 100; ++i) {
            RigidTransform t;
            t.rotation = rpy_rotation(rng.uniform(-3, 3), rng.uniform(-1.5, 1.5), rng.uniform(-3, 3));
            t.translation = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const Vec3 p{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
            const Vec3 back = transform_point(t, transform_point(t.inverse(), p));
            CHECK(distance(back, p) < 1e-9);
        }
    }
}

TEST_CASE("self collision") {
    const RunConfig cfg = test::load_default_config();
    const std::vector<double> zero(6, 0.0);

    SUBCASE("zero pose is collision free") { CHECK(!cfg.chain.check_self_collision(zero)); }

    SUBCASE("concentric spheres on non-adjacent joints collide") {
        // place a sphere on the elbow so it lands exactly on the hip origin
        const FkResult fk = cfg.chain.forward_kinematics(zero);
        const Vec3 hip_origin = fk.joint_pose[0].translation;
        const Vec3 center_local = fk.joint_pose[3].inverse().apply(hip_origin);
        std::vector<CollisionSphere> spheres{
            {0, {0, 0, 0}, 0.05},
            {3, center_local, 0.05},
        };
        const KinematicChain chain(cfg.chain.joints(), cfg.chain.end_effectors(), spheres);
        CHECK(chain.check_self_collision(zero));
    }

    SUBCASE("parent child pairs are exempt") {
        auto joints = cfg.chain.joints();
        // concentric spheres on shoulder roll (2) and its child elbow (3)
        std::vector<CollisionSphere> spheres{
            {2, {0.19, 0, 0}, 0.1},
            {3, {0, 0, 0}, 0.1},
        };
        const KinematicChain chain(joints, cfg.chain.end_effectors(), spheres);
        CHECK(!chain.check_self_collision(zero));
    }
}

TEST_CASE("chain config rejection") {
    SUBCASE("lo == hi") {
        CHECK_THROWS_WITH_AS(
            chain_from_json_text(R"({"joints":[{"name":"a","parent":-1,
                "axis":[0,0,1],"limits":[0.5,0.5]}]})"),
            doctest::Contains("lo < hi"), std::invalid_argument);
    }
    SUBCASE("non-unit axis") {
        CHECK_THROWS_WITH_AS(
            chain_from_json_text(R"({"joints":[{"name":"a","parent":-1,
                "axis":[0,0,2],"limits":[-1,1]}]})"),
            doctest::Contains("non-unit axis"), std::invalid_argument);
    }
    SUBCASE("dangling parent") {
        CHECK_THROWS_WITH_AS(
            chain_from_json_text(R"({"joints":[{"name":"a","parent":3,
                "axis":[0,0,1],"limits":[-1,1]}]})"),
            doctest::Contains("parent"), std::invalid_argument);
    }
    SUBCASE("missing joints array") {
        CHECK_THROWS(chain_from_json_text(R"({"end_effectors":{}})"));
    }
    SUBCASE("malformed document") { CHECK_THROWS(chain_from_json_text("not json at all")); }
}

TEST_CASE("fk rejects mismatched joint vector") {
    const KinematicChain chain = test::load_planar_chain();
    const std::vector<double> q(3, 0.0);
    CHECK_THROWS_AS(chain.forward_kinematics(q), std::invalid_argument);
}

TEST_CASE("jacobian rejects unknown frame") {
    const KinematicChain chain = test::load_planar_chain();
    const std::vector<double> q(2, 0.0);
    CHECK_THROWS_AS(chain.jacobian(q, "nope"), std::invalid_argument);
}

TEST_CASE("ancestor joints") {
    const RunConfig cfg = test::load_default_config();
    const auto path = cfg.chain.ancestor_joints("right_hand");
    CHECK(path == std::vector<int>{3, 2, 1, 0});
    const auto head_path = cfg.chain.ancestor_joints("head");
    CHECK(head_path == std::vector<int>{5, 4, 0});
}
