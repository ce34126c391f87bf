#pragma once

#include <cstdint>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "dcn/autodiff.hpp"
#include "dcn/errors.hpp"
#include "dcn/relation.hpp"
#include "dcn/rng.hpp"
#include "dcn/tensor.hpp"

namespace dcn {

// Geometry and capacity of the DCN networks. The feature extent must stay
// divisible by the patch grid so reflection labels remain grid-aligned at
// feature resolution.
struct ModelConfig {
  std::size_t height = 96, width = 96;
  std::size_t grid_rows = 3, grid_cols = 3;
  std::vector<std::size_t> stage_channels = {16, 32, 64, 64};  // backbone plan
  std::size_t reflection_hidden = 16;
  std::size_t patch_feature_channels = 32;  // C_s
  double lambda1 = 10.0;                    // reflection-loss weight

  std::size_t feature_channels() const { return stage_channels.back(); }  // C_f
  std::size_t feature_height() const { return height >> stage_channels.size(); }
  std::size_t feature_width() const { return width >> stage_channels.size(); }

  void validate() const {
    if (stage_channels.empty()) throw ConfigError("model: empty backbone channel plan");
    std::size_t div = std::size_t(1) << stage_channels.size();
    if (height % div != 0 || width % div != 0)
      throw ConfigError("model: input " + std::to_string(height) + "x" +
                        std::to_string(width) + " not divisible by 2^" +
                        std::to_string(stage_channels.size()) + " pooling stages");
    if (grid_rows * grid_cols < 2) throw ConfigError("model: need at least 2 grid slots");
    if (feature_height() % grid_rows != 0 || feature_width() % grid_cols != 0)
      throw ConfigError("model: feature extent " + std::to_string(feature_height()) + "x" +
                        std::to_string(feature_width()) + " not divisible by grid " +
                        std::to_string(grid_rows) + "x" + std::to_string(grid_cols));
    if (feature_height() < grid_rows || feature_width() < grid_cols)
      throw ConfigError("model: grid larger than feature map");
    if (lambda1 <= 0) throw ConfigError("model: lambda1 must be positive");
  }

  std::string fingerprint_text() const {
    std::ostringstream os;
    os << height << "x" << width << "|grid" << grid_rows << "x" << grid_cols << "|ch";
    for (std::size_t c : stage_channels) os << "-" << c;
    os << "|rh" << reflection_hidden << "|cs" << patch_feature_channels << "|l1" << lambda1;
    return os.str();
  }

  std::uint64_t fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (char c : fingerprint_text()) {
      h ^= static_cast<std::uint8_t>(c);
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

// Backbone + reflection head + patch-feature restoration head, all built
// on the tape so one backward pass covers every parameter.
template <typename T>
class DcnModel {
 public:
  explicit DcnModel(const ModelConfig& cfg, std::uint64_t init_seed = 7) : cfg_(cfg) {
    cfg_.validate();
    Rng rng(mix_seed(0x1417ull, init_seed));
    std::size_t cin = 3;
    for (std::size_t s = 0; s < cfg_.stage_channels.size(); ++s) {
      std::size_t cout = cfg_.stage_channels[s];
      std::string tag = "backbone.stage" + std::to_string(s);
      add_conv(tag + ".conv0", cout, cin, 3, rng);
      add_bn(tag + ".bn0", cout);
      add_conv(tag + ".conv1", cout, cout, 3, rng);
      cin = cout;
    }
    add_conv("reflection.conv0", cfg_.reflection_hidden, cfg_.feature_channels(), 1, rng);
    add_conv("reflection.conv1", 1, cfg_.reflection_hidden, 1, rng);
    add_conv("restore.conv0", cfg_.patch_feature_channels, cfg_.feature_channels(), 1, rng);
    add_conv("restore.conv1", cfg_.patch_feature_channels, cfg_.patch_feature_channels, 1,
             rng);
  }

  const ModelConfig& config() const { return cfg_; }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    out.reserve(params_.size());
    for (auto& p : params_) out.push_back(p.get());
    return out;
  }

  Parameter<T>& param(const std::string& name) {
    for (auto& p : params_)
      if (p->name == name) return *p;
    throw ConfigError("model: no parameter named '" + name + "'");
  }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  // F = backbone(image): stages of conv3x3 -> batchnorm -> relu ->
  // conv3x3 -> relu -> avg_pool 2x2.
  Node<T>* backbone_forward(Graph<T>& g, Node<T>* image) {
    const auto& s = image->value.shape;
    if (s.size() != 3 || s[0] != 3 || s[1] != cfg_.height || s[2] != cfg_.width)
      throw ConfigError("backbone: input " + image->value.shape_str() + " != configured (3," +
                        std::to_string(cfg_.height) + "," + std::to_string(cfg_.width) + ")");
    Node<T>* x = image;
    for (std::size_t st = 0; st < cfg_.stage_channels.size(); ++st) {
      std::string tag = "backbone.stage" + std::to_string(st);
      x = conv(g, x, tag + ".conv0", 1, 1);
      x = g.batchnorm(x, g.param(param(tag + ".bn0.gamma")), g.param(param(tag + ".bn0.beta")));
      x = g.relu(x);
      x = conv(g, x, tag + ".conv1", 1, 1);
      x = g.relu(x);
      x = g.avg_pool(x, 2, 2);
    }
    return x;
  }

  // R_pred in [0,1] via a terminal sigmoid.
  Node<T>* reflection_forward(Graph<T>& g, Node<T>* feat) {
    Node<T>* x = conv(g, feat, "reflection.conv0", 1, 0);
    x = g.relu(x);
    x = conv(g, x, "reflection.conv1", 1, 0);
    return g.sigmoid(x);
  }

  // S: (C_s, M, N) patch features restored from F.
  Node<T>* restore_patch_features(Graph<T>& g, Node<T>* feat) {
    if (feat->value.dim(1) < cfg_.grid_rows || feat->value.dim(2) < cfg_.grid_cols)
      throw ConfigError("restore: grid exceeds feature extent " + feat->value.shape_str());
    Node<T>* x = conv(g, feat, "restore.conv0", 1, 0);
    x = g.relu(x);
    x = conv(g, x, "restore.conv1", 1, 0);
    return g.adaptive_avg_pool(x, cfg_.grid_rows, cfg_.grid_cols);
  }

  // Inference: liveness score from the predicted reflection map alone.
  // Live ground truth is all-zero, so low reflection mass means live.
  double liveness_score(const Tensor<T>& image_data) {
    Graph<T> g;
    Node<T>* feat = backbone_forward(g, g.input(image_data));
    Node<T>* r = reflection_forward(g, feat);
    double acc = 0;
    for (T v : r->value.data) acc += static_cast<double>(v);
    return 1.0 - acc / static_cast<double>(r->value.size());
  }

  Tensor<T> predict_reflection(const Tensor<T>& image_data) {
    Graph<T> g;
    Node<T>* feat = backbone_forward(g, g.input(image_data));
    return reflection_forward(g, feat)->value;
  }

  Tensor<T> patch_features(const Tensor<T>& image_data) {
    Graph<T> g;
    Node<T>* feat = backbone_forward(g, g.input(image_data));
    return restore_patch_features(g, feat)->value;
  }

 private:
  void add_conv(const std::string& name, std::size_t cout, std::size_t cin, std::size_t k,
                Rng& rng) {
    Tensor<T> w({cout, cin, k, k});
    double scale = std::sqrt(2.0 / static_cast<double>(cin * k * k));  // He init
    for (T& v : w.data) v = static_cast<T>(rng.normal() * scale);
    params_.push_back(std::make_unique<Parameter<T>>(name + ".w", std::move(w)));
    params_.push_back(
        std::make_unique<Parameter<T>>(name + ".b", Tensor<T>({cout}, T(0))));
  }

  void add_bn(const std::string& name, std::size_t c) {
    params_.push_back(
        std::make_unique<Parameter<T>>(name + ".gamma", Tensor<T>({c}, T(1))));
    params_.push_back(std::make_unique<Parameter<T>>(name + ".beta", Tensor<T>({c}, T(0))));
  }

  Node<T>* conv(Graph<T>& g, Node<T>* x, const std::string& name, std::size_t stride,
                std::size_t pad) {
    return g.conv2d(x, g.param(param(name + ".w")), g.param(param(name + ".b")), stride, pad);
  }

  ModelConfig cfg_;
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

// L_overall = L_sim + lambda1 * L_reflection (Eq.-4 shape), on the tape.
template <typename T>
Node<T>* overall_loss_op(Graph<T>& g, Node<T>* sim_loss, Node<T>* reflection_loss,
                         double lambda1) {
  return g.axpy(sim_loss, reflection_loss, static_cast<T>(lambda1));
}

// Area-average downsample of a (1,H,W) map to (1,h,w); the integer factor
// keeps patch alignment intact after the co-transforms.
template <typename T>
Tensor<T> area_downsample(const Tensor<T>& map, std::size_t oh, std::size_t ow) {
  if (map.rank() != 3) throw ConfigError("area_downsample: expected (C,H,W)");
  std::size_t c = map.dim(0), h = map.dim(1), w = map.dim(2);
  if (oh == 0 || ow == 0 || h % oh != 0 || w % ow != 0)
    throw ConfigError("area_downsample: " + std::to_string(h) + "x" + std::to_string(w) +
                      " not divisible by target " + std::to_string(oh) + "x" +
                      std::to_string(ow));
  std::size_t fy = h / oh, fx = w / ow;
  Tensor<T> out({c, oh, ow});
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0;
        for (std::size_t y = 0; y < fy; ++y)
          for (std::size_t x = 0; x < fx; ++x) acc += map.at3(ch, i * fy + y, j * fx + x);
        out.at3(ch, i, j) = static_cast<T>(acc / static_cast<double>(fy * fx));
      }
  return out;
}

}  // namespace dcn
