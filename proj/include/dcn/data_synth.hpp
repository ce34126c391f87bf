#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dcn/tensor.hpp"

namespace dcn {

inline constexpr int kGeneratorVersion = 2;

enum class AttackType { none, print, replay };

const char* attack_type_name(AttackType t);
AttackType attack_type_from_name(const std::string& name);

// One synthetic face presentation. Live samples carry an all-zero
// reflection map; spoof samples carry the injected artifact mask.
struct Sample {
  TensorF image;          // (3,H,W) in [0,1]
  int cls = 1;            // 1 = live, 0 = spoof
  int domain_id = 0;
  AttackType attack = AttackType::none;
  TensorF reflection_gt;  // (1,H,W) in [0,1]
  std::uint64_t sample_id = 0;
};

struct SplitSpec {
  std::string name;
  std::size_t live = 0;
  std::size_t spoof = 0;
  std::vector<int> domains;
};

struct DatasetManifest {
  std::uint64_t seed = 1;
  int domains = 3;
  int holdout_domain = 2;
  std::size_t height = 96;
  std::size_t width = 96;
  int generator_version = kGeneratorVersion;
  std::vector<SplitSpec> splits;

  void validate() const;
  const SplitSpec& split(const std::string& name) const;

  std::string to_json() const;
  static DatasetManifest from_json(const std::string& text);
  static DatasetManifest load(const std::string& path);
  void save(const std::string& path) const;

  // The desk-scale default: 3 domains, train/dev/test on domains 0..1 and
  // a cross-domain test on the holdout.
  static DatasetManifest desk_scale(std::uint64_t seed, std::size_t h = 96, std::size_t w = 96,
                                    std::size_t train_per_class = 256,
                                    std::size_t dev_per_class = 64,
                                    std::size_t test_per_class = 64);
};

// Deterministic in (seed, domain, class, attack, generator version).
Sample generate_sample(std::uint64_t seed, int domain_id, int cls, AttackType attack,
                       std::size_t height, std::size_t width);

// Materializes one declared split; sample ids are unique across splits of
// the manifest, per-sample seeds derive from (manifest.seed, sample_id).
std::vector<Sample> generate_split(const DatasetManifest& manifest, const std::string& name);

// Binary PPM (P6) / PGM (P5), 8-bit, row-major. 3-channel tensors go to
// PPM, 1-channel to PGM; values clamped to [0,1] then scaled by 255.
void dump_preview(const TensorF& image, const std::string& path);

std::vector<std::uint8_t> image_to_bytes(const TensorF& image);

}  // namespace dcn
