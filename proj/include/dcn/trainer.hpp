#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <string>
#include <vector>

#include "dcn/checkpoint.hpp"
#include "dcn/combination.hpp"
#include "dcn/data_synth.hpp"
#include "dcn/destruction.hpp"
#include "dcn/errors.hpp"
#include "dcn/model.hpp"
#include "dcn/optim.hpp"
#include "dcn/relation.hpp"
#include "dcn/rng.hpp"

namespace dcn {

struct TrainConfig {
  ModelConfig model;
  std::size_t batch_size = 20;  // must stay even: exact 1:1 class ratio
  std::size_t steps = 500;
  double learning_rate = 1e-4;  // reference value is 1e-5; see README
  double p_cross_class = 0.5;
  double p_cross_subdomain = 0.5;
  bool enable_sdm = true;   // structure destruction
  bool enable_ccm = true;   // content combination
  bool enable_lrmm = true;  // local relation loss
  std::uint64_t seed = 1;
  std::size_t checkpoint_interval = 100;
  std::string manifest_path;
  std::string out_dir = "runs/default";

  void validate() const {
    model.validate();
    if (batch_size == 0 || batch_size % 2 != 0)
      throw ConfigError("train: batch size must be even and positive (1:1 class ratio)");
    if (steps == 0) throw ConfigError("train: steps must be > 0");
    if (learning_rate <= 0) throw ConfigError("train: learning rate must be positive");
    if (p_cross_class < 0 || p_cross_class > 1 || p_cross_subdomain < 0 ||
        p_cross_subdomain > 1)
      throw ConfigError("train: augmentation probabilities must lie in [0,1]");
  }
};

// One fully prepared training view: augmented image, its grid-aligned
// reflection label (native resolution), class/domain provenance, and the
// derived label matrix.
template <typename T>
struct TrainView {
  Tensor<T> image;
  Tensor<T> reflection_label;  // native resolution; downsampled at loss time
  Provenance provenance;
  Tensor<T> label_matrix;
};

template <typename T>
struct TrainLogRecord {
  std::uint64_t step = 0;
  double l_sim = 0, l_reflection = 0, l_overall = 0;
  double wall_ms = 0;
  std::uint64_t step_seed = 0;

  std::string to_json_line() const {
    std::ostringstream os;
    os.precision(17);
    os << "{\"step\":" << step << ",\"l_sim\":" << l_sim
       << ",\"l_reflection\":" << l_reflection << ",\"l_overall\":" << l_overall
       << ",\"wall_ms\":" << wall_ms << ",\"step_seed\":" << step_seed << "}";
    return os.str();
  }
};

// Destruction -> combination -> supervision targets for one mini-batch.
// All randomness comes from `rng`; donors are drawn from the batch's own
// candidate pool.
template <typename T>
std::vector<TrainView<T>> build_batch(Rng& rng, const std::vector<Sample>& pool,
                                      const TrainConfig& cfg, bool warn_single_domain) {
  std::vector<const Sample*> live, spoof;
  for (const auto& s : pool) (s.cls == 1 ? live : spoof).push_back(&s);
  if (live.empty() || spoof.empty())
    throw ConfigError("build_batch: pool must contain both classes");

  std::set<int> domains;
  for (const auto& s : pool) domains.insert(s.domain_id);
  bool multi_domain = domains.size() >= 2;
  if (!multi_domain && cfg.enable_ccm && cfg.p_cross_subdomain > 0 && warn_single_domain)
    std::cerr << "[train] single-domain pool: cross-subdomain combination disabled\n";

  GridSpec grid{cfg.model.grid_rows, cfg.model.grid_cols};
  std::size_t patches = grid.patch_count();
  std::size_t half = cfg.batch_size / 2;

  // Select base samples, exact 1:1 ratio.
  std::vector<const Sample*> bases;
  for (std::size_t i = 0; i < half; ++i) bases.push_back(live[rng.below(live.size())]);
  for (std::size_t i = 0; i < half; ++i) bases.push_back(spoof[rng.below(spoof.size())]);

  // Patch-permute every base (donors must themselves be permuted views).
  std::vector<DestroyedView<T>> views(cfg.batch_size);
  std::vector<ViewMeta> metas(cfg.batch_size);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    const Sample& s = *bases[i];
    Tensor<T> img = s.image.template cast<T>();
    std::vector<Tensor<T>> labels{s.reflection_gt.template cast<T>()};
    Provenance prov = uniform_provenance(patches, s.cls, s.domain_id, s.sample_id);
    Permutation sigma = cfg.enable_sdm ? sample_permutation(rng, patches)
                                       : identity_permutation(patches);
    views[i] = destroy(img, labels, grid, sigma, prov);
    metas[i] = ViewMeta{s.cls, s.domain_id, s.sample_id};
  }

  // Content combination against the other views of this batch. Cross-class
  // first, then cross-subdomain, each with its own coin.
  if (cfg.enable_ccm) {
    std::vector<const DestroyedView<T>*> view_ptrs;
    for (const auto& v : views) view_ptrs.push_back(&v);
    // Combination reads donor content from the pre-combination views, so
    // exchanged patches always carry their stated provenance.
    std::vector<DestroyedView<T>> donors_frozen = views;
    std::vector<const DestroyedView<T>*> frozen_ptrs;
    for (const auto& v : donors_frozen) frozen_ptrs.push_back(&v);

    for (std::size_t i = 0; i < cfg.batch_size; ++i) {
      for (CombineMode mode : {CombineMode::cross_class, CombineMode::cross_subdomain}) {
        double p = mode == CombineMode::cross_class ? cfg.p_cross_class
                                                    : cfg.p_cross_subdomain;
        if (mode == CombineMode::cross_subdomain && !multi_domain) continue;
        if (!rng.bernoulli(p)) continue;
        try {
          CombinationPlan plan = plan_combination(rng, metas[i], metas, mode, patches, 1,
                                                  patches - 1);
          apply_combination(views[i], plan, frozen_ptrs, grid);
        } catch (const PlanError&) {
          // no eligible donor in this batch; skip the augmentation
        }
      }
    }
  }

  std::vector<TrainView<T>> out(cfg.batch_size);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    out[i].image = std::move(views[i].image);
    out[i].reflection_label = std::move(views[i].labels[0]);
    out[i].provenance = std::move(views[i].provenance);
    out[i].label_matrix = build_label_matrix<T>(class_mask(out[i].provenance));
  }
  return out;
}

template <typename T>
struct StepLosses {
  double l_sim = 0, l_reflection = 0, l_overall = 0;
};

// Forward + backward for one view; gradients accumulate into the model.
template <typename T>
StepLosses<T> train_view(DcnModel<T>& model, const TrainView<T>& view, bool enable_lrmm) {
  const ModelConfig& mc = model.config();
  Graph<T> g;
  Node<T>* feat = model.backbone_forward(g, g.input(view.image));
  Node<T>* r_pred = model.reflection_forward(g, feat);
  Tensor<T> r_label =
      area_downsample(view.reflection_label, mc.feature_height(), mc.feature_width());
  Node<T>* l_ref = mse_loss_op(g, r_pred, r_label);

  StepLosses<T> losses;
  Node<T>* total = nullptr;
  if (enable_lrmm) {
    Node<T>* s = model.restore_patch_features(g, feat);
    Node<T>* a_sim = cosine_matrix_op(g, s);
    Node<T>* l_sim = similarity_loss_op(g, a_sim, view.label_matrix);
    total = overall_loss_op(g, l_sim, l_ref, mc.lambda1);
    losses.l_sim = static_cast<double>(l_sim->value[0]);
  } else {
    Node<T>* zero = g.input(Tensor<T>({1}, T(0)), true);
    total = overall_loss_op(g, zero, l_ref, mc.lambda1);
  }
  losses.l_reflection = static_cast<double>(l_ref->value[0]);
  losses.l_overall = static_cast<double>(total->value[0]);
  if (!std::isfinite(losses.l_overall))
    throw NumericError("train: non-finite loss in forward pass");
  g.backward(total);
  return losses;
}

template <typename T>
struct TrainResult {
  std::vector<TrainLogRecord<T>> log;
  std::string final_checkpoint;
};

// The full loop: build_batch -> forward -> Eq.-4 loss -> backward ->
// adam_step, with periodic checkpoints and JSON-lines logging.
// `resume_from` restarts after the checkpointed step; per-step seeds make
// the continuation identical to an uninterrupted run.
template <typename T>
TrainResult<T> train(const TrainConfig& cfg, DcnModel<T>& model, Adam<T>& opt,
                     const std::vector<Sample>& train_pool, std::uint64_t resume_step = 0,
                     std::ostream* log_stream = nullptr) {
  cfg.validate();
  if (train_pool.empty()) throw ConfigError("train: empty training pool");
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  auto params = model.parameters();
  TrainResult<T> result;

  for (std::uint64_t step = resume_step; step < cfg.steps; ++step) {
    auto t0 = std::chrono::steady_clock::now();
    std::uint64_t step_seed = mix_seed(cfg.seed, step);
    Rng rng(step_seed);
    std::vector<TrainView<T>> batch;
    StepLosses<T> sum{};
    try {
      batch = build_batch<T>(rng, train_pool, cfg, step == resume_step);
      model.zero_grad();
      for (const auto& view : batch) {
        StepLosses<T> l = train_view(model, view, cfg.enable_lrmm);
        sum.l_sim += l.l_sim;
        sum.l_reflection += l.l_reflection;
        sum.l_overall += l.l_overall;
      }
    } catch (const NumericError& e) {
      std::string dump = cfg.out_dir + "/abort.ckpt";
      save_checkpoint(dump, model, opt, cfg.seed, step);
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step) +
                         " (batch seed " + std::to_string(step_seed) +
                         "); last-good checkpoint: " + dump);
    }
    double inv = 1.0 / static_cast<double>(cfg.batch_size);
    for (auto* p : params)
      for (T& gv : p->grad.data) gv = static_cast<T>(static_cast<double>(gv) * inv);
    opt.step();

    auto t1 = std::chrono::steady_clock::now();
    TrainLogRecord<T> rec;
    rec.step = step + 1;
    rec.l_sim = sum.l_sim * inv;
    rec.l_reflection = sum.l_reflection * inv;
    rec.l_overall = sum.l_overall * inv;
    rec.wall_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
    rec.step_seed = step_seed;
    result.log.push_back(rec);
    if (log_stream) *log_stream << rec.to_json_line() << "\n";

    if ((step + 1) % cfg.checkpoint_interval == 0 || step + 1 == cfg.steps) {
      std::string path = cfg.out_dir + "/step" + std::to_string(step + 1) + ".ckpt";
      save_checkpoint(path, model, opt, cfg.seed, step + 1);
      result.final_checkpoint = path;
    }
  }
  return result;
}

}  // namespace dcn
