#pragma once

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "reachbot/config.hpp"

namespace reachbot::test {

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("test: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline KinematicChain load_planar_chain() {
    return chain_from_json_text(read_file(std::string(REACHBOT_TEST_DATA_DIR) + "/planar2.json"));
}

inline RunConfig load_default_config() { return load_config(REACHBOT_DEFAULT_CONFIG); }

}  // namespace reachbot::test
