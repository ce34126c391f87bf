#include "dcn/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dcn/errors.hpp"

namespace dcn {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::size_t> parse_size_list(const std::string& v) {
  std::vector<std::size_t> out;
  std::istringstream is(v);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    tok = trim(tok);
    if (!tok.empty()) out.push_back(std::stoull(tok));
  }
  return out;
}

bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config: bad boolean '" + v + "'");
}

}  // namespace

std::map<std::string, std::string> parse_ini(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section");
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string val = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    kv[section.empty() ? key : section + "." + key] = val;
  }
  return kv;
}

std::map<std::string, std::string> load_ini(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_ini(text);
}

TrainConfig train_config_from_ini(const std::map<std::string, std::string>& kv) {
  TrainConfig cfg;
  for (const auto& [key, val] : kv) {
    if (key == "model.height") cfg.model.height = std::stoull(val);
    else if (key == "model.width") cfg.model.width = std::stoull(val);
    else if (key == "model.grid_rows") cfg.model.grid_rows = std::stoull(val);
    else if (key == "model.grid_cols") cfg.model.grid_cols = std::stoull(val);
    else if (key == "model.stage_channels") cfg.model.stage_channels = parse_size_list(val);
    else if (key == "model.reflection_hidden") cfg.model.reflection_hidden = std::stoull(val);
    else if (key == "model.patch_feature_channels")
      cfg.model.patch_feature_channels = std::stoull(val);
    else if (key == "model.lambda1") cfg.model.lambda1 = std::stod(val);
    else if (key == "train.batch_size") cfg.batch_size = std::stoull(val);
    else if (key == "train.steps") cfg.steps = std::stoull(val);
    else if (key == "train.learning_rate") cfg.learning_rate = std::stod(val);
    else if (key == "train.p_cross_class") cfg.p_cross_class = std::stod(val);
    else if (key == "train.p_cross_subdomain") cfg.p_cross_subdomain = std::stod(val);
    else if (key == "train.enable_sdm") cfg.enable_sdm = parse_bool(val);
    else if (key == "train.enable_ccm") cfg.enable_ccm = parse_bool(val);
    else if (key == "train.enable_lrmm") cfg.enable_lrmm = parse_bool(val);
    else if (key == "train.seed") cfg.seed = std::stoull(val);
    else if (key == "train.checkpoint_interval") cfg.checkpoint_interval = std::stoull(val);
    else if (key == "train.manifest") cfg.manifest_path = val;
    else if (key == "train.out_dir") cfg.out_dir = val;
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  if (const char* env = std::getenv("DCN_SEED")) cfg.seed = std::stoull(env);
  cfg.validate();
  return cfg;
}

std::string default_config_text() {
  return
      "[model]\n"
      "height = 96\n"
      "width = 96\n"
      "grid_rows = 3\n"
      "grid_cols = 3\n"
      "stage_channels = 16,32,64,64\n"
      "reflection_hidden = 16\n"
      "patch_feature_channels = 32\n"
      "lambda1 = 10\n"
      "\n"
      "[train]\n"
      "batch_size = 20\n"
      "steps = 500\n"
      "# reference value: 1e-5; default raised for desk-scale convergence\n"
      "learning_rate = 1e-4\n"
      "p_cross_class = 0.5\n"
      "p_cross_subdomain = 0.5\n"
      "enable_sdm = true\n"
      "enable_ccm = true\n"
      "enable_lrmm = true\n"
      "seed = 1\n"
      "checkpoint_interval = 100\n"
      "manifest = data/manifest.json\n"
      "out_dir = runs/default\n";
}

}  // namespace dcn
