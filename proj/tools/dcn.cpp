// dcn: synthesize data, train, evaluate, and inspect the augmentations.
#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "dcn/checkpoint.hpp"
#include "dcn/config.hpp"
#include "dcn/data_synth.hpp"
#include "dcn/gradcheck.hpp"
#include "dcn/protocol.hpp"
#include "dcn/trainer.hpp"

namespace fs = std::filesystem;
using dcn::Sample;

namespace {

struct Options {
  std::string manifest_path;
  std::string out_dir = ".";
  std::string config_path;
  std::string checkpoint_path;
  std::string protocol = "intra";
  std::string dump_scores, dump_sim, dump_features;
  std::uint64_t seed = 1;
  bool oracle_scorer = false;
  bool overlay = false;
  bool identity = false;
};

dcn::TrainConfig load_train_config(const std::string& path) {
  auto kv = path.empty() ? dcn::parse_ini(dcn::default_config_text()) : dcn::load_ini(path);
  return dcn::train_config_from_ini(kv);
}

int cmd_gen_data(const Options& opt) {
  dcn::DatasetManifest manifest;
  if (!opt.manifest_path.empty() && fs::exists(opt.manifest_path)) {
    manifest = dcn::DatasetManifest::load(opt.manifest_path);
  } else {
    manifest = dcn::DatasetManifest::desk_scale(opt.seed);
  }
  manifest.validate();
  fs::create_directories(opt.out_dir);
  std::string out = opt.out_dir + "/manifest.json";
  manifest.save(out);
  for (const auto& sp : manifest.splits) {
    auto split = dcn::generate_split(manifest, sp.name);
    std::cout << "split " << sp.name << ": " << split.size() << " samples ok\n";
  }
  std::cout << "manifest written to " << out << "\n";
  return 0;
}

int cmd_train(const Options& opt) {
  dcn::TrainConfig cfg = load_train_config(opt.config_path);
  if (!opt.manifest_path.empty()) cfg.manifest_path = opt.manifest_path;
  dcn::DatasetManifest manifest = cfg.manifest_path.empty() || !fs::exists(cfg.manifest_path)
                                      ? dcn::DatasetManifest::desk_scale(cfg.seed)
                                      : dcn::DatasetManifest::load(cfg.manifest_path);
  if (manifest.height != cfg.model.height || manifest.width != cfg.model.width)
    throw dcn::ConfigError("train: manifest geometry does not match model config");

  std::cout << "[train] seed=" << cfg.seed << " steps=" << cfg.steps
            << " batch=" << cfg.batch_size << " lr=" << cfg.learning_rate
            << " (reference values: lr=1e-5, batch=20, lambda1=10)\n";
  auto pool = dcn::generate_split(manifest, "train");
  dcn::DcnModel<float> model(cfg.model, cfg.seed);
  dcn::Adam<float>::Hyper hp;
  hp.lr = cfg.learning_rate;
  dcn::Adam<float> opt_state(model.parameters(), hp);

  fs::create_directories(cfg.out_dir);
  std::ofstream log(cfg.out_dir + "/train_log.jsonl");
  auto result = dcn::train(cfg, model, opt_state, pool, 0, &log);
  std::cout << "[train] done; final checkpoint: " << result.final_checkpoint << "\n";
  if (!result.log.empty())
    std::cout << "[train] initial L=" << result.log.front().l_overall
              << " final L=" << result.log.back().l_overall << "\n";
  return 0;
}

int cmd_eval(const Options& opt) {
  dcn::TrainConfig cfg = load_train_config(opt.config_path);
  dcn::DatasetManifest manifest = opt.manifest_path.empty()
                                      ? dcn::DatasetManifest::desk_scale(cfg.seed)
                                      : dcn::DatasetManifest::load(opt.manifest_path);

  std::shared_ptr<dcn::DcnModel<float>> model;
  dcn::Scorer scorer;
  if (opt.oracle_scorer) {
    scorer = dcn::ground_truth_scorer();
  } else {
    if (opt.checkpoint_path.empty())
      throw dcn::ConfigError("eval: need --checkpoint or --oracle");
    model = std::make_shared<dcn::DcnModel<float>>(cfg.model, cfg.seed);
    dcn::Adam<float> opt_state(model->parameters(), {});
    dcn::load_checkpoint(opt.checkpoint_path, *model, opt_state);
    scorer = [model](const Sample& s) { return model->liveness_score(s.image); };
  }

  dcn::Protocol proto = opt.protocol == "cross" || opt.protocol == "cross_domain"
                            ? dcn::Protocol::cross_domain
                            : dcn::Protocol::intra;
  dcn::EvalReport report = dcn::run_protocol(scorer, manifest, proto);
  std::cout << report.to_json_line() << "\n";
  fs::create_directories(opt.out_dir);
  {
    std::ofstream out(opt.out_dir + "/eval_report.jsonl", std::ios::app);
    out << report.to_json_line() << "\n";
  }

  const std::string test_split = proto == dcn::Protocol::intra ? "test" : "test_cross";
  if (!opt.dump_scores.empty()) {
    auto scored = dcn::score_split(scorer, dcn::generate_split(manifest, test_split));
    dcn::write_scores_csv(opt.dump_scores, scored);
  }
  if ((!opt.dump_sim.empty() || !opt.dump_features.empty()) && !model)
    throw dcn::ConfigError("eval: --dump-sim/--dump-features need a checkpoint model");
  if (!opt.dump_sim.empty() || !opt.dump_features.empty()) {
    auto split = dcn::generate_split(manifest, test_split);
    std::ofstream sim, feat;
    if (!opt.dump_sim.empty()) {
      sim.open(opt.dump_sim);
      sim << "sample_id,kind,row,values...\n";
    }
    if (!opt.dump_features.empty()) {
      feat.open(opt.dump_features);
      feat << "sample_id,slot,values...\n";
    }
    for (const auto& s : split) {
      dcn::TensorF pf = model->patch_features(s.image);
      std::size_t patches = pf.dim(1) * pf.dim(2);
      if (sim.is_open()) {
        dcn::TensorF a = dcn::build_similarity_matrix(pf);
        auto label = dcn::build_label_matrix<float>(
            std::vector<int>(patches, s.cls));  // unaugmented eval image
        for (std::size_t r = 0; r < patches; ++r) {
          sim << s.sample_id << ",a_sim," << r;
          for (std::size_t c = 0; c < patches; ++c) sim << "," << a.at2(r, c);
          sim << "\n";
          sim << s.sample_id << ",a_label," << r;
          for (std::size_t c = 0; c < patches; ++c) sim << "," << label.at2(r, c);
          sim << "\n";
        }
      }
      if (feat.is_open()) {
        for (std::size_t p = 0; p < patches; ++p) {
          feat << s.sample_id << "," << p;
          for (float v : dcn::slot_feature(pf, p)) feat << "," << v;
          feat << "\n";
        }
      }
    }
  }
  return 0;
}

void draw_grid_overlay(dcn::TensorF& image, const dcn::GridSpec& grid) {
  std::size_t h = image.dim(1), w = image.dim(2);
  for (std::size_t r = 1; r < grid.rows; ++r)
    for (std::size_t x = 0; x < w; ++x) image.at3(0, r * (h / grid.rows), x) = 1.0f;
  for (std::size_t c = 1; c < grid.cols; ++c)
    for (std::size_t y = 0; y < h; ++y) image.at3(0, y, c * (w / grid.cols)) = 1.0f;
}

int cmd_augment_preview(const Options& opt) {
  dcn::TrainConfig cfg = load_train_config(opt.config_path);
  cfg.seed = opt.seed;
  if (opt.identity) {
    cfg.enable_sdm = false;
    cfg.enable_ccm = false;
  }
  dcn::DatasetManifest manifest = dcn::DatasetManifest::desk_scale(
      cfg.seed, cfg.model.height, cfg.model.width, 8, 2, 2);
  auto pool = dcn::generate_split(manifest, "train");
  fs::create_directories(opt.out_dir);

  dcn::Rng rng(dcn::mix_seed(cfg.seed, 0xA6u));
  cfg.batch_size = std::min<std::size_t>(cfg.batch_size, pool.size());
  if (cfg.batch_size % 2) --cfg.batch_size;
  auto batch = dcn::build_batch<float>(rng, pool, cfg, false);

  dcn::GridSpec grid{cfg.model.grid_rows, cfg.model.grid_cols};
  nlohmann::json sidecar = nlohmann::json::array();
  auto find_sample = [&pool](std::uint64_t id) -> const Sample* {
    for (const auto& s : pool)
      if (s.sample_id == id) return &s;
    return nullptr;
  };
  for (std::size_t i = 0; i < std::min<std::size_t>(batch.size(), 4); ++i) {
    // "Before" image: the slot-majority source of this view.
    std::map<std::uint64_t, int> votes;
    for (const auto& slot : batch[i].provenance) votes[slot.sample_id]++;
    std::uint64_t base_id = batch[i].provenance[0].sample_id;
    int best = 0;
    for (const auto& [id, n] : votes)
      if (n > best) {
        best = n;
        base_id = id;
      }
    std::string stem0 = opt.out_dir + "/view" + std::to_string(i);
    if (const Sample* src = find_sample(base_id)) dcn::dump_preview(src->image, stem0 + "_before.ppm");
    dcn::TensorF img = batch[i].image;
    if (opt.overlay) draw_grid_overlay(img, grid);
    std::string stem = opt.out_dir + "/view" + std::to_string(i);
    dcn::dump_preview(img, stem + "_after.ppm");
    dcn::dump_preview(batch[i].reflection_label, stem + "_reflection.pgm");
    nlohmann::json prov = nlohmann::json::array();
    for (const auto& slot : batch[i].provenance)
      prov.push_back({{"class", slot.cls},
                      {"domain", slot.domain_id},
                      {"sample_id", slot.sample_id}});
    sidecar.push_back({{"view", i}, {"provenance", prov}});
  }
  for (std::size_t i = 0; i < std::min<std::size_t>(pool.size(), 4); ++i)
    dcn::dump_preview(pool[i].image, opt.out_dir + "/source" + std::to_string(i) + ".ppm");
  std::ofstream side(opt.out_dir + "/provenance.json");
  side << sidecar.dump(2) << "\n";
  std::cout << "previews written to " << opt.out_dir << "\n";
  return 0;
}

int cmd_gradcheck() {
  auto results = dcn::run_gradcheck_suite();
  bool all_pass = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.name
              << "  max_rel_err=" << r.max_rel_err << "\n";
    all_pass = all_pass && r.pass;
  }
  return all_pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Destruction-and-Combination Network face anti-spoofing toolkit"};
  app.require_subcommand(1);
  Options opt;

  auto* gen = app.add_subcommand("gen-data", "materialize/validate a dataset manifest");
  gen->add_option("--manifest", opt.manifest_path, "manifest JSON (generated if absent)");
  gen->add_option("--out", opt.out_dir, "output directory");
  gen->add_option("--seed", opt.seed, "seed for a generated default manifest");

  auto* train = app.add_subcommand("train", "run training");
  train->add_option("--config", opt.config_path, "INI config file");
  train->add_option("--manifest", opt.manifest_path, "manifest JSON override");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or the oracle scorer");
  eval->add_option("--checkpoint", opt.checkpoint_path, "checkpoint file");
  eval->add_option("--manifest", opt.manifest_path, "manifest JSON");
  eval->add_option("--config", opt.config_path, "INI config file");
  eval->add_option("--protocol", opt.protocol, "intra|cross");
  eval->add_flag("--oracle", opt.oracle_scorer, "score with ground-truth reflection maps");
  eval->add_option("--dump-scores", opt.dump_scores, "write per-sample scores CSV");
  eval->add_option("--dump-sim", opt.dump_sim, "write A_sim/A_label CSV");
  eval->add_option("--dump-features", opt.dump_features, "write patch features CSV");
  eval->add_option("--out", opt.out_dir, "report output directory");

  auto* prev = app.add_subcommand("augment-preview", "dump before/after augmentation images");
  prev->add_option("--config", opt.config_path, "INI config file");
  prev->add_option("--seed", opt.seed, "augmentation seed");
  prev->add_option("--out", opt.out_dir, "output directory");
  prev->add_flag("--overlay", opt.overlay, "draw patch-grid boundaries");
  prev->add_flag("--identity", opt.identity, "force identity permutation, augmentation off");

  auto* gc = app.add_subcommand("gradcheck", "run the finite-difference suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(opt);
    if (train->parsed()) return cmd_train(opt);
    if (eval->parsed()) return cmd_eval(opt);
    if (prev->parsed()) return cmd_augment_preview(opt);
    if (gc->parsed()) return cmd_gradcheck();
  } catch (const dcn::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
