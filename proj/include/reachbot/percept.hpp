#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "reachbot/geom.hpp"
#include "reachbot/rng.hpp"

namespace reachbot {

struct CameraIntrinsics {
    double fx = 0.0, fy = 0.0;  // pixels
    double cx = 0.0, cy = 0.0;  // pixels
    int width = 0, height = 0;

    void validate() const;
};

enum class DetectionClass { Hand, Arm };

DetectionClass parse_detection_class(const std::string& s);
const char* detection_class_name(DetectionClass c);

struct DetectionBox {
    DetectionClass cls = DetectionClass::Hand;
    double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;  // pixels
    double confidence = 0.0;

    void validate(int image_width, int image_height) const;
    double height_fraction(int image_height) const;
};

enum class FilterReason { Kept, TooSmall, TooBig };

struct FilterDecision {
    bool keep = false;
    FilterReason reason = FilterReason::Kept;
};

// Discard boxes below 1/10 or above 8/10 of the image height.
FilterDecision filter_detection(const DetectionBox& box, int image_height,
                                double min_height_frac = 0.1, double max_height_frac = 0.8);

// 16-bit depth image, values in millimeters, 0 = invalid.
struct DepthImage {
    int width = 0, height = 0;
    std::vector<std::uint16_t> mm;

    std::uint16_t at(int u, int v) const {
        return mm[static_cast<std::size_t>(v) * static_cast<std::size_t>(width) +
                  static_cast<std::size_t>(u)];
    }
};

// Binary PGM (P5, maxval 65535, big-endian samples per the Netpbm spec).
DepthImage read_pgm16(const std::filesystem::path& path);
void write_pgm16(const std::filesystem::path& path, const DepthImage& img);

// Mean depth of n pixels sampled uniformly from the central third of the box
// (invalid pixels resampled, up to 10n attempts), back-projected through the
// pinhole at the box center. nullopt when no valid depth was found.
std::optional<Vec3> estimate_target(const DepthImage& depth, const DetectionBox& box,
                                    const CameraIntrinsics& intrinsics, Rng& rng, int n = 10);

// Camera-optical (x right, y down, z forward) to robot-body axes
// (x forward, y left, z up), then the camera pose.
Vec3 to_base_frame(const Vec3& point_cam, const RigidTransform& camera_pose);

bool should_publish(const Vec3& candidate, const std::optional<Vec3>& last_published,
                    double threshold = 0.2);

struct TargetEstimate {
    Vec3 point_base;
    DetectionClass source_class = DetectionClass::Hand;
    double timestamp = 0.0;
};

struct PerceptionParams {
    CameraIntrinsics intrinsics;
    RigidTransform camera_mount;  // head frame -> camera frame
    double min_height_frac = 0.1;
    double max_height_frac = 0.8;
    double publish_threshold = 0.2;  // meters
    int depth_sample_count = 10;
};

// One pipeline instance per camera stream; the only state is the last
// published point.
class TargetPipeline {
  public:
    TargetPipeline(PerceptionParams params, std::uint64_t seed);

    // Full per-frame pass: size filter, hand-over-arm class preference,
    // depth estimate, base-frame transform, publish gate.
    std::optional<TargetEstimate> process(const DepthImage& depth,
                                          std::span<const DetectionBox> detections,
                                          const RigidTransform& camera_pose, double timestamp);

    const std::optional<Vec3>& last_published() const { return last_published_; }
    const PerceptionParams& params() const { return params_; }

  private:
    PerceptionParams params_;
    Rng rng_;
    std::optional<Vec3> last_published_;
};

// Detections file: one record per line,
// frame_id,class,x_min,y_min,x_max,y_max,confidence
struct DetectionRecord {
    long frame_id = 0;
    DetectionBox box;
};

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path);

// Published-target record: frame_id,class,x,y,z,timestamp
std::string target_estimate_record(long frame_id, const TargetEstimate& est);

}  // namespace reachbot
