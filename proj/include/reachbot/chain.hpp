#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "reachbot/geom.hpp"

namespace reachbot {

struct Joint {
    std::string name;
    int parent = -1;              // index of parent joint, -1 = base
    RigidTransform offset;        // parent frame -> joint frame at zero angle
    Vec3 axis{0, 0, 1};           // unit rotation axis in the joint frame
    double lo = 0.0, hi = 0.0;    // angle limits, radians
    double velocity_limit = 1.0;  // rad/s
};

struct EndEffector {
    std::string name;
    int joint = 0;
    RigidTransform offset;  // joint frame -> end-effector frame
};

struct CollisionSphere {
    int joint = 0;
    Vec3 center;  // in the joint frame
    double radius = 0.0;
};

struct FkResult {
    std::vector<RigidTransform> joint_pose;  // base-frame pose per joint
    std::vector<RigidTransform> ee_pose;     // base-frame pose per end effector
};

// Positional Jacobian, row-major 3 x joint_count, meters per radian.
struct Jacobian {
    std::size_t cols = 0;
    std::vector<double> data;

    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
};

// Immutable after construction; every operation is a pure function of (chain, q)
// and safe to call concurrently.
class KinematicChain {
  public:
    KinematicChain(std::vector<Joint> joints, std::vector<EndEffector> end_effectors,
                   std::vector<CollisionSphere> collision_spheres);

    std::size_t joint_count() const { return joints_.size(); }
    const std::vector<Joint>& joints() const { return joints_; }
    const std::vector<EndEffector>& end_effectors() const { return end_effectors_; }
    const std::vector<CollisionSphere>& collision_spheres() const { return collision_spheres_; }

    bool has_frame(const std::string& name) const;

    FkResult forward_kinematics(std::span<const double> q) const;

    // Pose of a named frame (joint or end effector) out of an FK result.
    const RigidTransform& frame_pose(const FkResult& fk, const std::string& name) const;

    Jacobian jacobian(std::span<const double> q, const std::string& frame) const;

    // Forward (+x) axis of the head frame in the base frame, unit norm.
    Vec3 head_direction(std::span<const double> q) const;

    // True iff any two spheres on distinct, non-adjacent joints overlap.
    bool check_self_collision(std::span<const double> q) const;

    // Joint indices from the frame's anchor up to the root (the joints whose
    // angles move the frame).
    std::vector<int> ancestor_joints(const std::string& frame) const;

    void clamp_to_limits(std::span<double> q) const;
    bool within_limits(std::span<const double> q, double tol = 0.0) const;

  private:
    struct FrameRef {
        bool is_end_effector = false;
        int index = 0;
    };

    const FrameRef& frame_ref(const std::string& name) const;

    std::vector<Joint> joints_;
    std::vector<EndEffector> end_effectors_;
    std::vector<CollisionSphere> collision_spheres_;
    std::map<std::string, FrameRef> frames_;
};

}  // namespace reachbot
