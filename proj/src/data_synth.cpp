#include "dcn/data_synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "dcn/errors.hpp"
#include "dcn/rng.hpp"

namespace dcn {

using json = nlohmann::json;

const char* attack_type_name(AttackType t) {
  switch (t) {
    case AttackType::none: return "none";
    case AttackType::print: return "print";
    case AttackType::replay: return "replay";
  }
  return "?";
}

AttackType attack_type_from_name(const std::string& name) {
  if (name == "none") return AttackType::none;
  if (name == "print") return AttackType::print;
  if (name == "replay") return AttackType::replay;
  throw ConfigError("unknown attack type '" + name + "'");
}

namespace {

struct DomainStyle {
  double gain[3];        // per-channel color gain
  double grad_angle;     // illumination gradient direction
  double grad_strength;
  double noise_amp;
  int noise_blur;        // 0 = white noise, >0 = box-blurred (low-pass)
  // Recapture bias: spoof presentations pass through a domain-specific
  // medium (printer ink / screen backlight), adding a global color cast.
  // This is an easy in-domain shortcut that does not transfer across
  // domains, which is exactly what patch destruction/combination and
  // local relation supervision are meant to defeat.
  double medium_gain[3];
  double medium_lift;
};

// Domain appearance is a pure function of (domain_id, generator version),
// so every split sees the same rendition of a domain.
DomainStyle domain_style(int domain_id) {
  Rng rng(mix_seed(0xD0114ECAFEull * static_cast<std::uint64_t>(kGeneratorVersion),
                   static_cast<std::uint64_t>(domain_id)));
  DomainStyle s{};
  for (double& g : s.gain) g = rng.uniform(0.75, 1.15);
  s.grad_angle = rng.uniform(0.0, 2.0 * M_PI);
  s.grad_strength = rng.uniform(0.08, 0.30);
  s.noise_amp = rng.uniform(0.01, 0.05);
  s.noise_blur = static_cast<int>(rng.below(3));  // 0,1,2 pixel radius
  for (double& g : s.medium_gain) g = rng.uniform(0.7, 1.3);
  s.medium_lift = rng.uniform(-0.05, 0.1);
  return s;
}

void box_blur_inplace(std::vector<double>& v, std::size_t h, std::size_t w, int radius) {
  if (radius <= 0) return;
  std::vector<double> tmp(v.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double acc = 0;
      int cnt = 0;
      for (int dy = -radius; dy <= radius; ++dy)
        for (int dx = -radius; dx <= radius; ++dx) {
          std::ptrdiff_t yy = static_cast<std::ptrdiff_t>(y) + dy;
          std::ptrdiff_t xx = static_cast<std::ptrdiff_t>(x) + dx;
          if (yy < 0 || yy >= static_cast<std::ptrdiff_t>(h) || xx < 0 ||
              xx >= static_cast<std::ptrdiff_t>(w))
            continue;
          acc += v[static_cast<std::size_t>(yy) * w + static_cast<std::size_t>(xx)];
          ++cnt;
        }
      tmp[y * w + x] = acc / cnt;
    }
  v.swap(tmp);
}

}  // namespace

Sample generate_sample(std::uint64_t seed, int domain_id, int cls, AttackType attack,
                       std::size_t height, std::size_t width) {
  if (cls == 1 && attack != AttackType::none)
    throw ConfigError("live sample must have attack type 'none'");
  if (cls == 0 && attack == AttackType::none)
    throw ConfigError("spoof sample needs an attack type (print/replay)");

  Rng rng(seed);
  DomainStyle style = domain_style(domain_id);
  const std::size_t h = height, w = width;

  Sample s;
  s.cls = cls;
  s.domain_id = domain_id;
  s.attack = attack;
  s.image = TensorF({3, h, w});
  s.reflection_gt = TensorF({1, h, w}, 0.0f);

  // Face geometry and palette, jittered per sample.
  double cx = 0.5 + rng.uniform(-0.05, 0.05);
  double cy = 0.52 + rng.uniform(-0.05, 0.05);
  double rx = 0.30 + rng.uniform(-0.04, 0.04);
  double ry = 0.40 + rng.uniform(-0.04, 0.04);
  double skin[3] = {0.72 + rng.uniform(-0.06, 0.06), 0.58 + rng.uniform(-0.06, 0.06),
                    0.48 + rng.uniform(-0.06, 0.06)};
  double bg[3] = {0.18 + rng.uniform(-0.05, 0.05), 0.20 + rng.uniform(-0.05, 0.05),
                  0.24 + rng.uniform(-0.05, 0.05)};

  // Low-frequency texture: a few sinusoids with random frequency/phase.
  struct Wave {
    double fx, fy, phase, amp;
  };
  Wave waves[3];
  for (Wave& wv : waves) {
    wv.fx = rng.uniform(0.5, 3.0);
    wv.fy = rng.uniform(0.5, 3.0);
    wv.phase = rng.uniform(0.0, 2.0 * M_PI);
    wv.amp = rng.uniform(0.02, 0.06);
  }

  std::vector<double> noise(h * w);
  for (double& n : noise) n = rng.normal();
  box_blur_inplace(noise, h, w, style.noise_blur);

  double ca = std::cos(style.grad_angle), sa = std::sin(style.grad_angle);
  for (std::size_t y = 0; y < h; ++y) {
    double v = (static_cast<double>(y) + 0.5) / h;
    for (std::size_t x = 0; x < w; ++x) {
      double u = (static_cast<double>(x) + 0.5) / w;
      double du = (u - cx) / rx, dv = (v - cy) / ry;
      double d = du * du + dv * dv;
      // Smooth oval boundary and an interior shading falloff.
      double inside = 1.0 / (1.0 + std::exp((d - 1.0) * 12.0));
      double shade = 1.0 - 0.35 * std::min(d, 1.0);
      double tex = 0.0;
      for (const Wave& wv : waves)
        tex += wv.amp * std::sin(2.0 * M_PI * (wv.fx * u + wv.fy * v) + wv.phase);
      double illum = style.grad_strength * ((ca * u + sa * v) - 0.5 * (ca + sa));
      double nz = style.noise_amp * noise[y * w + x];
      for (int c = 0; c < 3; ++c) {
        double val = bg[c] + inside * (skin[c] * shade + tex - bg[c]);
        val = val * style.gain[c] + illum + nz;
        if (cls == 0) val = val * style.medium_gain[c] + style.medium_lift;
        s.image.at3(static_cast<std::size_t>(c), y, x) =
            static_cast<float>(std::clamp(val, 0.0, 1.0));
      }
    }
  }

  if (cls == 0) {
    // Attack artifact, additive; reflection_gt is the artifact intensity
    // normalized to max 1, so its support is the artifact region exactly.
    std::vector<double> art(h * w, 0.0);
    if (attack == AttackType::print) {
      // Halftone dot lattice.
      double period = rng.uniform(3.0, 5.0);
      double amp = rng.uniform(0.12, 0.22);
      double thresh = rng.uniform(0.55, 0.7);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x) {
          double g = 0.5 * (1.0 + std::sin(2.0 * M_PI * x / period) *
                                      std::sin(2.0 * M_PI * y / period));
          if (g > thresh) art[y * w + x] = amp * (g - thresh) / (1.0 - thresh);
        }
    } else {
      // Moire bands plus specular blobs.
      double fa = rng.uniform(0.08, 0.16), fb = rng.uniform(0.08, 0.16);
      double phase = rng.uniform(0.0, 2.0 * M_PI);
      double amp = rng.uniform(0.07, 0.13);
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          art[y * w + x] =
              amp * 0.5 * (1.0 + std::sin(2.0 * M_PI * (fa * x + fb * y) + phase));
      int blobs = static_cast<int>(rng.range(2, 4));
      for (int b = 0; b < blobs; ++b) {
        double bx = rng.uniform(0.15, 0.85) * w;
        double by = rng.uniform(0.15, 0.85) * h;
        double sigma = rng.uniform(0.04, 0.09) * std::min(h, w);
        double bamp = rng.uniform(0.15, 0.3);
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            double r2 = ((x - bx) * (x - bx) + (y - by) * (y - by)) / (2 * sigma * sigma);
            if (r2 < 12.0) art[y * w + x] += bamp * std::exp(-r2);
          }
      }
    }
    double peak = *std::max_element(art.begin(), art.end());
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double a = art[y * w + x];
        for (int c = 0; c < 3; ++c) {
          float& px = s.image.at3(static_cast<std::size_t>(c), y, x);
          px = static_cast<float>(std::clamp(static_cast<double>(px) + a, 0.0, 1.0));
        }
        s.reflection_gt.at3(0, y, x) = peak > 0 ? static_cast<float>(a / peak) : 0.0f;
      }
  }
  return s;
}

void DatasetManifest::validate() const {
  if (domains <= 0) throw ValidationError("manifest: domain count must be positive");
  if (height == 0 || width == 0) throw ValidationError("manifest: zero image extent");
  if (splits.empty()) throw ValidationError("manifest: no splits declared");
  if (holdout_domain < 0 || holdout_domain >= domains)
    throw ValidationError("manifest: holdout_domain out of range");
  std::set<std::string> names;
  for (const auto& sp : splits) {
    if (sp.live + sp.spoof == 0)
      throw ValidationError("manifest: split '" + sp.name + "' has zero samples");
    if (sp.domains.empty())
      throw ValidationError("manifest: split '" + sp.name + "' lists no domains");
    for (int d : sp.domains)
      if (d < 0 || d >= domains)
        throw ValidationError("manifest: split '" + sp.name + "' references domain " +
                              std::to_string(d) + " outside [0," + std::to_string(domains) +
                              ")");
    if (!names.insert(sp.name).second)
      throw ValidationError("manifest: duplicate split name '" + sp.name + "'");
  }
}

const SplitSpec& DatasetManifest::split(const std::string& name) const {
  for (const auto& sp : splits)
    if (sp.name == name) return sp;
  throw ValidationError("manifest: split '" + name + "' not declared");
}

std::string DatasetManifest::to_json() const {
  json j;
  j["seed"] = seed;
  j["domains"] = domains;
  j["holdout_domain"] = holdout_domain;
  j["height"] = height;
  j["width"] = width;
  j["generator_version"] = generator_version;
  j["splits"] = json::array();
  for (const auto& sp : splits)
    j["splits"].push_back(
        {{"name", sp.name}, {"live", sp.live}, {"spoof", sp.spoof}, {"domains", sp.domains}});
  return j.dump(2);
}

DatasetManifest DatasetManifest::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: bad JSON: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.seed = j.at("seed").get<std::uint64_t>();
    m.domains = j.at("domains").get<int>();
    m.holdout_domain = j.value("holdout_domain", m.domains - 1);
    m.height = j.at("height").get<std::size_t>();
    m.width = j.at("width").get<std::size_t>();
    m.generator_version = j.value("generator_version", kGeneratorVersion);
    for (const auto& js : j.at("splits")) {
      SplitSpec sp;
      sp.name = js.at("name").get<std::string>();
      sp.live = js.at("live").get<std::size_t>();
      sp.spoof = js.at("spoof").get<std::size_t>();
      sp.domains = js.at("domains").get<std::vector<int>>();
      m.splits.push_back(std::move(sp));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("manifest: missing/invalid field: ") + e.what());
  }
  m.validate();
  return m;
}

DatasetManifest DatasetManifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read manifest '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json(text);
}

void DatasetManifest::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest '" + path + "'");
  out << to_json() << "\n";
}

DatasetManifest DatasetManifest::desk_scale(std::uint64_t seed, std::size_t h, std::size_t w,
                                            std::size_t train_per_class,
                                            std::size_t dev_per_class,
                                            std::size_t test_per_class) {
  DatasetManifest m;
  m.seed = seed;
  m.domains = 3;
  m.holdout_domain = 2;
  m.height = h;
  m.width = w;
  std::vector<int> src{0, 1};
  m.splits = {
      {"train", train_per_class, train_per_class, src},
      {"dev", dev_per_class, dev_per_class, src},
      {"test", test_per_class, test_per_class, src},
      {"test_cross", test_per_class, test_per_class, {m.holdout_domain}},
  };
  return m;
}

std::vector<Sample> generate_split(const DatasetManifest& manifest, const std::string& name) {
  manifest.validate();
  if (manifest.generator_version != kGeneratorVersion)
    throw ValidationError("manifest generator_version " +
                          std::to_string(manifest.generator_version) +
                          " does not match this build (" + std::to_string(kGeneratorVersion) +
                          ")");
  // Global id ranges per split, in declaration order; splits stay disjoint.
  std::uint64_t base = 0;
  const SplitSpec* spec = nullptr;
  for (const auto& sp : manifest.splits) {
    if (sp.name == name) {
      spec = &sp;
      break;
    }
    base += sp.live + sp.spoof;
  }
  if (!spec) throw ValidationError("manifest: split '" + name + "' not declared");

  std::vector<Sample> out;
  out.reserve(spec->live + spec->spoof);
  std::size_t total = spec->live + spec->spoof;
  std::size_t spoof_done = 0;
  for (std::size_t i = 0; i < total; ++i) {
    std::uint64_t id = base + i;
    bool live = i < spec->live;
    int domain = spec->domains[i % spec->domains.size()];
    AttackType attack = AttackType::none;
    if (!live) {
      attack = (spoof_done % 2 == 0) ? AttackType::print : AttackType::replay;
      ++spoof_done;
    }
    Sample s = generate_sample(mix_seed(manifest.seed, id), domain, live ? 1 : 0, attack,
                               manifest.height, manifest.width);
    s.sample_id = id;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::uint8_t> image_to_bytes(const TensorF& image) {
  if (image.rank() != 3) throw ConfigError("preview: expected (C,H,W)");
  std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<std::uint8_t> bytes(c * h * w);
  std::size_t k = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch)
        bytes[k++] = static_cast<std::uint8_t>(
            std::lround(std::clamp(image.at3(ch, y, x), 0.0f, 1.0f) * 255.0f));
  return bytes;
}

void dump_preview(const TensorF& image, const std::string& path) {
  std::size_t c = image.dim(0);
  if (c != 1 && c != 3) throw ConfigError("preview: need 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write preview '" + path + "'");
  out << (c == 3 ? "P6" : "P5") << "\n" << image.dim(2) << " " << image.dim(1) << "\n255\n";
  auto bytes = image_to_bytes(image);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write on preview '" + path + "'");
}

}  // namespace dcn
