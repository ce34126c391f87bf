#pragma once

#include <map>
#include <string>

#include "dcn/trainer.hpp"

namespace dcn {

// INI-style config: [section] headers, key = value lines, '#' comments.
// Flat key lookup is "section.key".
std::map<std::string, std::string> parse_ini(const std::string& text);
std::map<std::string, std::string> load_ini(const std::string& path);

// Builds a TrainConfig from parsed keys; unknown keys are an error so typos
// fail loudly. DCN_SEED in the environment overrides [train] seed.
TrainConfig train_config_from_ini(const std::map<std::string, std::string>& kv);

std::string default_config_text();

}  // namespace dcn
