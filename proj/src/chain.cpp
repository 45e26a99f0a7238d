#include "reachbot/chain.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace reachbot {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument("chain: " + msg); }

}  // namespace

KinematicChain::KinematicChain(std::vector<Joint> joints, std::vector<EndEffector> end_effectors,
                               std::vector<CollisionSphere> collision_spheres)
    : joints_(std::move(joints)),
      end_effectors_(std::move(end_effectors)),
      collision_spheres_(std::move(collision_spheres)) {
    if (joints_.empty()) fail("no joints defined");

    for (std::size_t i = 0; i < joints_.size(); ++i) {
        const Joint& j = joints_[i];
        if (j.name.empty()) fail("joint " + std::to_string(i) + " has no name");
        if (j.parent < -1 || j.parent >= static_cast<int>(i)) {
            fail("joint '" + j.name + "' has dangling parent index " + std::to_string(j.parent));
        }
        if (!(j.lo < j.hi)) fail("joint '" + j.name + "': angle limits require lo < hi");
        if (std::abs(j.axis.norm() - 1.0) > 1e-9) fail("joint '" + j.name + "': non-unit axis");
        if (!(j.velocity_limit > 0.0)) fail("joint '" + j.name + "': velocity limit must be > 0");
        if (!j.offset.valid()) fail("joint '" + j.name + "': offset rotation not orthonormal");
        if (!frames_.emplace(j.name, FrameRef{false, static_cast<int>(i)}).second) {
            fail("duplicate frame name '" + j.name + "'");
        }
    }

    for (std::size_t i = 0; i < end_effectors_.size(); ++i) {
        const EndEffector& ee = end_effectors_[i];
        if (ee.name.empty()) fail("end effector " + std::to_string(i) + " has no name");
        if (ee.joint < 0 || ee.joint >= static_cast<int>(joints_.size())) {
            fail("end effector '" + ee.name + "' references unknown joint");
        }
        if (!ee.offset.valid()) fail("end effector '" + ee.name + "': offset not orthonormal");
        if (!frames_.emplace(ee.name, FrameRef{true, static_cast<int>(i)}).second) {
            fail("duplicate frame name '" + ee.name + "'");
        }
    }

    for (const CollisionSphere& s : collision_spheres_) {
        if (s.joint < 0 || s.joint >= static_cast<int>(joints_.size())) {
            fail("collision sphere references unknown joint");
        }
        if (!(s.radius > 0.0)) fail("collision sphere radius must be > 0");
    }
}

bool KinematicChain::has_frame(const std::string& name) const { return frames_.count(name) > 0; }

const KinematicChain::FrameRef& KinematicChain::frame_ref(const std::string& name) const {
    auto it = frames_.find(name);
    if (it == frames_.end()) fail("unknown frame '" + name + "'");
    return it->second;
}

FkResult KinematicChain::forward_kinematics(std::span<const double> q) const {
    if (q.size() != joints_.size()) {
        fail("joint vector length " + std::to_string(q.size()) + " does not match chain size " +
             std::to_string(joints_.size()));
    }
    FkResult fk;
    fk.joint_pose.resize(joints_.size());
    for (std::size_t i = 0; i < joints_.size(); ++i) {
        const Joint& j = joints_[i];
        const RigidTransform local{j.offset.rotation * axis_angle(j.axis, q[i]),
                                   j.offset.translation};
        fk.joint_pose[i] =
            (j.parent < 0) ? local : fk.joint_pose[static_cast<std::size_t>(j.parent)].compose(local);
    }
    fk.ee_pose.reserve(end_effectors_.size());
    for (const EndEffector& ee : end_effectors_) {
        fk.ee_pose.push_back(fk.joint_pose[static_cast<std::size_t>(ee.joint)].compose(ee.offset));
    }
    return fk;
}

const RigidTransform& KinematicChain::frame_pose(const FkResult& fk, const std::string& name) const {
    const FrameRef& ref = frame_ref(name);
    return ref.is_end_effector ? fk.ee_pose[static_cast<std::size_t>(ref.index)]
                               : fk.joint_pose[static_cast<std::size_t>(ref.index)];
}

Jacobian KinematicChain::jacobian(std::span<const double> q, const std::string& frame) const {
    const FrameRef& ref = frame_ref(frame);
    const FkResult fk = forward_kinematics(q);
    const Vec3 p = frame_pose(fk, frame).translation;

    Jacobian jac;
    jac.cols = joints_.size();
    jac.data.assign(3 * jac.cols, 0.0);

    int j = ref.is_end_effector ? end_effectors_[static_cast<std::size_t>(ref.index)].joint
                                : ref.index;
    // Walk the ancestor path; joints off it keep zero columns.
    while (j >= 0) {
        const RigidTransform& pose = fk.joint_pose[static_cast<std::size_t>(j)];
        const Vec3 omega = pose.rotation * joints_[static_cast<std::size_t>(j)].axis;
        const Vec3 col = omega.cross(p - pose.translation);
        jac(0, static_cast<std::size_t>(j)) = col.x;
        jac(1, static_cast<std::size_t>(j)) = col.y;
        jac(2, static_cast<std::size_t>(j)) = col.z;
        j = joints_[static_cast<std::size_t>(j)].parent;
    }
    return jac;
}

Vec3 KinematicChain::head_direction(std::span<const double> q) const {
    const FkResult fk = forward_kinematics(q);
    return frame_pose(fk, "head").rotation * Vec3{1, 0, 0};
}

bool KinematicChain::check_self_collision(std::span<const double> q) const {
    if (collision_spheres_.empty()) return false;
    const FkResult fk = forward_kinematics(q);

    std::vector<Vec3> centers;
    centers.reserve(collision_spheres_.size());
    for (const CollisionSphere& s : collision_spheres_) {
        centers.push_back(fk.joint_pose[static_cast<std::size_t>(s.joint)].apply(s.center));
    }

    for (std::size_t a = 0; a < collision_spheres_.size(); ++a) {
        for (std::size_t b = a + 1; b < collision_spheres_.size(); ++b) {
            const int ja = collision_spheres_[a].joint;
            const int jb = collision_spheres_[b].joint;
            if (ja == jb) continue;
            if (joints_[static_cast<std::size_t>(ja)].parent == jb ||
                joints_[static_cast<std::size_t>(jb)].parent == ja) {
                continue;  // parent/child pairs are exempt
            }
            const double gap = collision_spheres_[a].radius + collision_spheres_[b].radius;
            if (distance(centers[a], centers[b]) < gap) return true;
        }
    }
    return false;
}

std::vector<int> KinematicChain::ancestor_joints(const std::string& frame) const {
    const FrameRef& ref = frame_ref(frame);
    int j = ref.is_end_effector ? end_effectors_[static_cast<std::size_t>(ref.index)].joint
                                : ref.index;
    std::vector<int> path;
    while (j >= 0) {
        path.push_back(j);
        j = joints_[static_cast<std::size_t>(j)].parent;
    }
    return path;
}

void KinematicChain::clamp_to_limits(std::span<double> q) const {
    for (std::size_t i = 0; i < joints_.size(); ++i) {
        q[i] = std::clamp(q[i], joints_[i].lo, joints_[i].hi);
    }
}

bool KinematicChain::within_limits(std::span<const double> q, double tol) const {
    for (std::size_t i = 0; i < joints_.size(); ++i) {
        if (q[i] < joints_[i].lo - tol || q[i] > joints_[i].hi + tol) return false;
    }
    return true;
}

}  // namespace reachbot
