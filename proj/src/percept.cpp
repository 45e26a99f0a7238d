#include "reachbot/percept.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace reachbot {

void CameraIntrinsics::validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw std::invalid_argument("intrinsics: fx, fy must be > 0");
    if (width <= 0 || height <= 0) throw std::invalid_argument("intrinsics: empty image size");
    if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
        throw std::invalid_argument("intrinsics: principal point outside image");
    }
}

DetectionClass parse_detection_class(const std::string& s) {
    if (s == "hand") return DetectionClass::Hand;
    if (s == "arm") return DetectionClass::Arm;
    throw std::invalid_argument("unknown detection class '" + s + "'");
}

const char* detection_class_name(DetectionClass c) {
    return c == DetectionClass::Hand ? "hand" : "arm";
}

void DetectionBox::validate(int image_width, int image_height) const {
    if (!(x_min < x_max) || !(y_min < y_max)) {
        throw std::invalid_argument("detection box: empty extent");
    }
    if (x_min < 0.0 || y_min < 0.0 || x_max > image_width || y_max > image_height) {
        throw std::invalid_argument("detection box: outside image bounds");
    }
    if (confidence < 0.0 || confidence > 1.0) {
        throw std::invalid_argument("detection box: confidence outside [0,1]");
    }
}

double DetectionBox::height_fraction(int image_height) const {
    return (y_max - y_min) / static_cast<double>(image_height);
}

FilterDecision filter_detection(const DetectionBox& box, int image_height, double min_height_frac,
                                double max_height_frac) {
    const double frac = box.height_fraction(image_height);
    if (frac < min_height_frac) return {false, FilterReason::TooSmall};
    if (frac > max_height_frac) return {false, FilterReason::TooBig};
    return {true, FilterReason::Kept};
}

DepthImage read_pgm16(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open depth image " + path.string());

    auto next_token = [&in, &path]() {
        std::string tok;
        while (true) {
            const int c = in.get();
            if (c == EOF) throw std::runtime_error("depth image " + path.string() + ": truncated header");
            if (c == '#') {
                std::string comment;
                std::getline(in, comment);
                continue;
            }
            if (std::isspace(c)) {
                if (!tok.empty()) return tok;
                continue;
            }
            tok.push_back(static_cast<char>(c));
        }
    };

    if (next_token() != "P5") throw std::runtime_error("depth image " + path.string() + ": not binary PGM");
    DepthImage img;
    img.width = std::stoi(next_token());
    img.height = std::stoi(next_token());
    const int maxval = std::stoi(next_token());
    if (img.width <= 0 || img.height <= 0) {
        throw std::runtime_error("depth image " + path.string() + ": empty dimensions");
    }
    if (maxval != 65535) {
        throw std::runtime_error("depth image " + path.string() + ": expected 16-bit PGM (maxval 65535)");
    }

    const std::size_t count = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
    std::vector<unsigned char> raw(count * 2);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
        throw std::runtime_error("depth image " + path.string() + ": truncated pixel data");
    }
    img.mm.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        img.mm[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);
    }
    return img;
}

void write_pgm16(const std::filesystem::path& path, const DepthImage& img) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out << "P5\n" << img.width << " " << img.height << "\n65535\n";
        for (const std::uint16_t v : img.mm) {
            out.put(static_cast<char>(v >> 8));
            out.put(static_cast<char>(v & 0xff));
        }
        if (!out) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

std::optional<Vec3> estimate_target(const DepthImage& depth, const DetectionBox& box,
                                    const CameraIntrinsics& intrinsics, Rng& rng, int n) {
    intrinsics.validate();
    box.validate(intrinsics.width, intrinsics.height);
    if (depth.width != intrinsics.width || depth.height != intrinsics.height) {
        throw std::invalid_argument("estimate_target: depth image does not match intrinsics");
    }
    if (n <= 0) throw std::invalid_argument("estimate_target: n must be > 0");

    // Central third of the box on both axes; collapses to the center pixel
    // for very small boxes.
    const double w = box.x_max - box.x_min;
    const double h = box.y_max - box.y_min;
    double u_lo = box.x_min + w / 3.0, u_hi = box.x_min + 2.0 * w / 3.0;
    double v_lo = box.y_min + h / 3.0, v_hi = box.y_min + 2.0 * h / 3.0;
    if (u_hi - u_lo < 1.0) u_hi = u_lo + 1.0;
    if (v_hi - v_lo < 1.0) v_hi = v_lo + 1.0;

    auto sample_pixel = [&](double lo, double hi, int bound) {
        const int p = static_cast<int>(std::floor(rng.uniform(lo, hi)));
        return std::clamp(p, 0, bound - 1);
    };

    double depth_sum_mm = 0.0;
    int valid = 0;
    const int max_attempts = 10 * n;
    for (int attempt = 0; attempt < max_attempts && valid < n; ++attempt) {
        const int u = sample_pixel(u_lo, u_hi, depth.width);
        const int v = sample_pixel(v_lo, v_hi, depth.height);
        const std::uint16_t d = depth.at(u, v);
        if (d == 0) continue;  // invalid pixel
        depth_sum_mm += static_cast<double>(d);
        ++valid;
    }
    if (valid == 0) return std::nullopt;

    const double z = depth_sum_mm / static_cast<double>(valid) / 1000.0;
    const double u_c = 0.5 * (box.x_min + box.x_max);
    const double v_c = 0.5 * (box.y_min + box.y_max);
    return Vec3{(u_c - intrinsics.cx) * z / intrinsics.fx,
                (v_c - intrinsics.cy) * z / intrinsics.fy, z};
}

Vec3 to_base_frame(const Vec3& point_cam, const RigidTransform& camera_pose) {
    // optical z-forward/x-right/y-down -> body x-forward/y-left/z-up
    const Vec3 body{point_cam.z, -point_cam.x, -point_cam.y};
    return transform_point(camera_pose, body);
}

bool should_publish(const Vec3& candidate, const std::optional<Vec3>& last_published,
                    double threshold) {
    if (!last_published) return true;
    return distance(candidate, *last_published) > threshold;
}

TargetPipeline::TargetPipeline(PerceptionParams params, std::uint64_t seed)
    : params_(std::move(params)), rng_(seed) {
    params_.intrinsics.validate();
    if (!params_.camera_mount.valid()) {
        throw std::invalid_argument("perception: camera mount pose not orthonormal");
    }
}

std::optional<TargetEstimate> TargetPipeline::process(const DepthImage& depth,
                                                      std::span<const DetectionBox> detections,
                                                      const RigidTransform& camera_pose,
                                                      double timestamp) {
    // Hands are the primary target class; arms only stand in when no hand
    // survives the size filter. Ties break on confidence.
    const DetectionBox* chosen = nullptr;
    for (const DetectionBox& box : detections) {
        box.validate(params_.intrinsics.width, params_.intrinsics.height);
        if (!filter_detection(box, params_.intrinsics.height, params_.min_height_frac,
                              params_.max_height_frac)
                 .keep) {
            continue;
        }
        if (!chosen) {
            chosen = &box;
            continue;
        }
        const bool chosen_hand = chosen->cls == DetectionClass::Hand;
        const bool box_hand = box.cls == DetectionClass::Hand;
        if (box_hand != chosen_hand) {
            if (box_hand) chosen = &box;
        } else if (box.confidence > chosen->confidence) {
            chosen = &box;
        }
    }
    if (!chosen) return std::nullopt;

    const std::optional<Vec3> cam_point =
        estimate_target(depth, *chosen, params_.intrinsics, rng_, params_.depth_sample_count);
    if (!cam_point) return std::nullopt;

    const Vec3 base_point = to_base_frame(*cam_point, camera_pose);
    if (!should_publish(base_point, last_published_, params_.publish_threshold)) {
        return std::nullopt;
    }
    last_published_ = base_point;
    return TargetEstimate{base_point, chosen->cls, timestamp};
}

std::vector<DetectionRecord> read_detections(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open detections file " + path.string());
    std::vector<DetectionRecord> records;
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 7) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                                     ": expected 7 comma-separated fields");
        }
        try {
            DetectionRecord rec;
            rec.frame_id = std::stol(fields[0]);
            rec.box.cls = parse_detection_class(fields[1]);
            rec.box.x_min = std::stod(fields[2]);
            rec.box.y_min = std::stod(fields[3]);
            rec.box.x_max = std::stod(fields[4]);
            rec.box.y_max = std::stod(fields[5]);
            rec.box.confidence = std::stod(fields[6]);
            records.push_back(rec);
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

std::string target_estimate_record(long frame_id, const TargetEstimate& est) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%ld,%s,%.17g,%.17g,%.17g,%.17g", frame_id,
                  detection_class_name(est.source_class), est.point_base.x, est.point_base.y,
                  est.point_base.z, est.timestamp);
    return buf;
}

}  // namespace reachbot
