#include "dcn/protocol.hpp"

#include <cmath>
#include <fstream>
#include <set>

#include "dcn/errors.hpp"

namespace dcn {

Scorer ground_truth_scorer() {
  return [](const Sample& s) {
    double acc = 0;
    for (float v : s.reflection_gt.data) acc += v;
    return 1.0 - acc / static_cast<double>(s.reflection_gt.size());
  };
}

std::vector<ScoredSample> score_split(const Scorer& scorer, const std::vector<Sample>& split) {
  std::vector<ScoredSample> out;
  out.reserve(split.size());
  for (const auto& s : split) {
    double sc = scorer(s);
    if (!std::isfinite(sc)) throw EvalError("score for sample is not finite");
    out.push_back(ScoredSample{s.sample_id, sc, s.cls, s.attack, s.domain_id});
  }
  return out;
}

EvalReport run_protocol(const Scorer& scorer, const DatasetManifest& manifest,
                        Protocol protocol) {
  manifest.validate();
  EvalReport report;
  auto dev = score_split(scorer, generate_split(manifest, "dev"));
  if (protocol == Protocol::intra) {
    report.protocol = "intra";
    auto test = score_split(scorer, generate_split(manifest, "test"));
    report.threshold = eer_threshold(dev);
    apcer_bpcer_acer(test, report.threshold, &report.apcer, &report.bpcer, &report.acer,
                     &report.apcer_by_attack);
    for (const auto& s : test) (s.cls == 1 ? report.bona_fide_count : report.attack_count)++;
  } else {
    report.protocol = "cross_domain";
    const auto& cross_spec = manifest.split("test_cross");
    // The held-out domain must be disjoint from every source split.
    std::set<int> holdout(cross_spec.domains.begin(), cross_spec.domains.end());
    for (const auto& sp : manifest.splits) {
      if (sp.name == "test_cross") continue;
      for (int d : sp.domains)
        if (holdout.count(d))
          throw ValidationError("cross_domain: domain " + std::to_string(d) +
                                " appears in both '" + sp.name + "' and test_cross");
    }
    auto test = score_split(scorer, generate_split(manifest, "test_cross"));
    report.threshold = eer_threshold(dev);
    report.hter = hter(test, report.threshold);
    apcer_bpcer_acer(test, report.threshold, &report.apcer, &report.bpcer, &report.acer,
                     &report.apcer_by_attack);
    for (const auto& s : test) (s.cls == 1 ? report.bona_fide_count : report.attack_count)++;
  }
  return report;
}

void write_scores_csv(const std::string& path, const std::vector<ScoredSample>& samples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write scores '" + path + "'");
  out << "sample_id,score,class,attack_type,domain_id\n";
  out.precision(17);
  for (const auto& s : samples)
    out << s.sample_id << "," << s.score << "," << s.cls << "," << attack_type_name(s.attack)
        << "," << s.domain_id << "\n";
  if (!out) throw IoError("short write on scores '" + path + "'");
}

}  // namespace dcn
