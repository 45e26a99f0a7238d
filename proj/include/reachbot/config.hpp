#pragma once

#include <filesystem>
#include <string>

#include "reachbot/chain.hpp"
#include "reachbot/env.hpp"
#include "reachbot/percept.hpp"
#include "reachbot/ppo.hpp"

namespace reachbot {

// Everything the CLI needs, parsed from one JSON document with sections
// "chain", "env", "ppo" and "perception". Missing env/ppo/perception keys
// fall back to the documented defaults; the chain section is mandatory.
struct RunConfig {
    KinematicChain chain;
    EnvParams env;
    PpoConfig ppo;
    PerceptionParams perception;
};

RunConfig load_config(const std::filesystem::path& path);

// Parse a chain from a JSON document string (the "chain" section alone or a
// full document containing one). Used by tests and load_config.
KinematicChain chain_from_json_text(const std::string& text);

}  // namespace reachbot
