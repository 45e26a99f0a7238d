#include "reachbot/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace reachbot {

namespace {

using nlohmann::json;

Vec3 vec3_from(const json& arr, const std::string& what) {
    if (!arr.is_array() || arr.size() != 3) {
        throw std::invalid_argument("config: " + what + " must be a 3-element array");
    }
    return {arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>()};
}

RigidTransform transform_from(const json& node, const std::string& what) {
    RigidTransform t;
    if (node.contains("xyz")) t.translation = vec3_from(node["xyz"], what + ".xyz");
    if (node.contains("rpy")) {
        const Vec3 rpy = vec3_from(node["rpy"], what + ".rpy");
        t.rotation = rpy_rotation(rpy.x, rpy.y, rpy.z);
    }
    return t;
}

int joint_index_by_name(const std::vector<Joint>& joints, const std::string& name,
                        const std::string& what) {
    for (std::size_t i = 0; i < joints.size(); ++i) {
        if (joints[i].name == name) return static_cast<int>(i);
    }
    throw std::invalid_argument("config: " + what + " references unknown joint '" + name + "'");
}

KinematicChain chain_from_json(const json& doc) {
    const json& node = doc.contains("chain") ? doc["chain"] : doc;
    if (!node.contains("joints") || !node["joints"].is_array()) {
        throw std::invalid_argument("config: chain.joints array is required");
    }

    std::vector<Joint> joints;
    for (const json& jj : node["joints"]) {
        Joint j;
        j.name = jj.at("name").get<std::string>();
        j.parent = jj.at("parent").get<int>();
        if (jj.contains("offset")) j.offset = transform_from(jj["offset"], "joint " + j.name);
        j.axis = vec3_from(jj.at("axis"), "joint " + j.name + ".axis");
        const json& lim = jj.at("limits");
        if (!lim.is_array() || lim.size() != 2) {
            throw std::invalid_argument("config: joint " + j.name + ".limits must be [lo, hi]");
        }
        j.lo = lim[0].get<double>();
        j.hi = lim[1].get<double>();
        j.velocity_limit = jj.value("velocity_limit", 1.0);
        joints.push_back(std::move(j));
    }

    std::vector<EndEffector> effectors;
    if (node.contains("end_effectors")) {
        for (const auto& [name, spec] : node["end_effectors"].items()) {
            EndEffector ee;
            ee.name = name;
            ee.joint = joint_index_by_name(joints, spec.at("joint").get<std::string>(),
                                           "end effector " + name);
            if (spec.contains("offset")) {
                ee.offset = transform_from(spec["offset"], "end effector " + name);
            }
            effectors.push_back(std::move(ee));
        }
    }

    std::vector<CollisionSphere> spheres;
    if (node.contains("collision_spheres")) {
        for (const json& ss : node["collision_spheres"]) {
            CollisionSphere s;
            s.joint = joint_index_by_name(joints, ss.at("joint").get<std::string>(),
                                          "collision sphere");
            s.center = vec3_from(ss.at("center"), "collision sphere center");
            s.radius = ss.at("radius").get<double>();
            spheres.push_back(s);
        }
    }

    return KinematicChain(std::move(joints), std::move(effectors), std::move(spheres));
}

EnvParams env_from_json(const json& doc) {
    EnvParams p;
    if (!doc.contains("env")) return p;
    const json& node = doc["env"];
    auto range = [&](const char* key, double& lo, double& hi) {
        if (!node.contains(key)) return;
        const json& arr = node[key];
        if (!arr.is_array() || arr.size() != 2) {
            throw std::invalid_argument(std::string("config: env.") + key + " must be [lo, hi]");
        }
        lo = arr[0].get<double>();
        hi = arr[1].get<double>();
    };
    range("target_x", p.target_ranges.x_lo, p.target_ranges.x_hi);
    range("target_y", p.target_ranges.y_lo, p.target_ranges.y_hi);
    range("target_z", p.target_ranges.z_lo, p.target_ranges.z_hi);
    p.target_ranges.y_offset = node.value("target_y_offset", p.target_ranges.y_offset);
    p.dt = node.value("dt", p.dt);
    p.max_steps = node.value("max_steps", p.max_steps);
    p.weights.w1 = node.value("w1", p.weights.w1);
    p.weights.w2 = node.value("w2", p.weights.w2);
    p.pos_norm_bound = node.value("position_norm_bound", p.pos_norm_bound);

    if (std::abs(p.weights.w1 + p.weights.w2 - 1.0) > 1e-12) {
        throw std::invalid_argument("config: reward weights must satisfy w1 + w2 = 1");
    }
    if (!(p.dt > 0.0)) throw std::invalid_argument("config: env.dt must be > 0");
    if (p.max_steps <= 0) throw std::invalid_argument("config: env.max_steps must be > 0");
    if (!(p.pos_norm_bound > 0.0)) {
        throw std::invalid_argument("config: env.position_norm_bound must be > 0");
    }
    return p;
}

PpoConfig ppo_from_json(const json& doc) {
    PpoConfig c;
    if (!doc.contains("ppo")) return c;
    const json& node = doc["ppo"];
    c.gamma = node.value("gamma", c.gamma);
    c.metric_gamma = node.value("metric_gamma", c.metric_gamma);
    c.gae_lambda = node.value("gae_lambda", c.gae_lambda);
    c.clip_eps = node.value("clip_eps", c.clip_eps);
    c.learning_rate = node.value("learning_rate", c.learning_rate);
    c.n_steps = node.value("n_steps", c.n_steps);
    c.epochs = node.value("epochs", c.epochs);
    c.minibatch = node.value("minibatch", c.minibatch);
    c.value_coef = node.value("value_coef", c.value_coef);
    c.entropy_coef = node.value("entropy_coef", c.entropy_coef);
    c.grad_norm_clip = node.value("grad_norm_clip", c.grad_norm_clip);
    c.total_steps = node.value("total_steps", c.total_steps);
    c.n_envs = node.value("n_envs", c.n_envs);
    c.checkpoint_every = node.value("checkpoint_every", c.checkpoint_every);
    c.stats_window = node.value("stats_window", c.stats_window);
    c.validate();
    return c;
}

PerceptionParams perception_from_json(const json& doc) {
    PerceptionParams p;
    // Defaults sized for a RealSense D435 depth stream.
    p.intrinsics = {386.0, 386.0, 320.0, 240.0, 640, 480};
    p.camera_mount.translation = {0.05, 0.0, 0.06};
    if (!doc.contains("perception")) return p;
    const json& node = doc["perception"];
    if (node.contains("intrinsics")) {
        const json& in = node["intrinsics"];
        p.intrinsics.fx = in.value("fx", p.intrinsics.fx);
        p.intrinsics.fy = in.value("fy", p.intrinsics.fy);
        p.intrinsics.cx = in.value("cx", p.intrinsics.cx);
        p.intrinsics.cy = in.value("cy", p.intrinsics.cy);
        p.intrinsics.width = in.value("width", p.intrinsics.width);
        p.intrinsics.height = in.value("height", p.intrinsics.height);
    }
    if (node.contains("camera_mount")) {
        p.camera_mount = transform_from(node["camera_mount"], "perception.camera_mount");
    }
    p.min_height_frac = node.value("min_height_frac", p.min_height_frac);
    p.max_height_frac = node.value("max_height_frac", p.max_height_frac);
    p.publish_threshold = node.value("publish_threshold", p.publish_threshold);
    p.depth_sample_count = node.value("depth_sample_count", p.depth_sample_count);
    p.intrinsics.validate();
    return p;
}

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config " + path.string() + ": " + e.what());
    }
}

}  // namespace

KinematicChain chain_from_json_text(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: ") + e.what());
    }
    return chain_from_json(doc);
}

RunConfig load_config(const std::filesystem::path& path) {
    const json doc = parse_json_file(path);
    try {
        return RunConfig{chain_from_json(doc), env_from_json(doc), ppo_from_json(doc),
                         perception_from_json(doc)};
    } catch (const json::exception& e) {
        throw std::runtime_error("config " + path.string() + ": " + e.what());
    }
}

}  // namespace reachbot
