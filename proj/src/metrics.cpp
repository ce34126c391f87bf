#include "dcn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <set>

#include "dcn/errors.hpp"

namespace dcn {

std::vector<int> classify(const std::vector<double>& scores, double threshold) {
  std::vector<int> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] >= threshold ? 1 : 0;
  return out;
}

void apcer_bpcer_acer(const std::vector<ScoredSample>& samples, double threshold,
                      double* apcer, double* bpcer, double* acer,
                      std::map<std::string, double>* by_attack) {
  std::map<AttackType, std::pair<std::size_t, std::size_t>> attacks;  // total, passed-as-live
  std::size_t bona = 0, bona_rejected = 0;
  for (const auto& s : samples) {
    bool live_pred = s.score >= threshold;
    if (s.cls == 1) {
      ++bona;
      if (!live_pred) ++bona_rejected;
    } else {
      auto& a = attacks[s.attack];
      ++a.first;
      if (live_pred) ++a.second;
    }
  }
  if (bona == 0) throw EvalError("metrics: no bona fide samples");
  if (attacks.empty()) throw EvalError("metrics: no attack samples");
  double worst = 0.0;
  for (const auto& [type, counts] : attacks) {
    double rate = static_cast<double>(counts.second) / static_cast<double>(counts.first);
    worst = std::max(worst, rate);
    if (by_attack) (*by_attack)[attack_type_name(type)] = rate;
  }
  *apcer = worst;
  *bpcer = static_cast<double>(bona_rejected) / static_cast<double>(bona);
  *acer = (*apcer + *bpcer) / 2.0;
}

void far_frr(const std::vector<ScoredSample>& samples, double threshold, double* far,
             double* frr) {
  std::size_t live = 0, live_rejected = 0, spoof = 0, spoof_accepted = 0;
  for (const auto& s : samples) {
    bool live_pred = s.score >= threshold;
    if (s.cls == 1) {
      ++live;
      if (!live_pred) ++live_rejected;
    } else {
      ++spoof;
      if (live_pred) ++spoof_accepted;
    }
  }
  if (live == 0) throw EvalError("metrics: no bona fide samples");
  if (spoof == 0) throw EvalError("metrics: no attack samples");
  *far = static_cast<double>(spoof_accepted) / static_cast<double>(spoof);
  *frr = static_cast<double>(live_rejected) / static_cast<double>(live);
}

double eer_threshold(const std::vector<ScoredSample>& dev_samples) {
  std::set<double> distinct;
  bool has_live = false, has_spoof = false;
  for (const auto& s : dev_samples) {
    distinct.insert(s.score);
    (s.cls == 1 ? has_live : has_spoof) = true;
  }
  if (!has_live) throw EvalError("eer_threshold: no bona fide samples");
  if (!has_spoof) throw EvalError("eer_threshold: no attack samples");

  std::vector<double> sorted(distinct.begin(), distinct.end());
  std::vector<double> candidates;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i)
    candidates.push_back(0.5 * (sorted[i] + sorted[i + 1]));
  if (candidates.empty()) candidates.push_back(sorted.front());  // all scores equal

  double best_thr = candidates.front();
  double best_gap = std::numeric_limits<double>::infinity();
  for (double thr : candidates) {
    double far, frr;
    far_frr(dev_samples, thr, &far, &frr);
    double gap = std::abs(far - frr);
    if (gap < best_gap) {  // ties keep the earlier (smaller) threshold
      best_gap = gap;
      best_thr = thr;
    }
  }
  return best_thr;
}

double hter(const std::vector<ScoredSample>& test_samples, double threshold) {
  double far, frr;
  far_frr(test_samples, threshold, &far, &frr);
  return (far + frr) / 2.0;
}

std::string EvalReport::to_json_line() const {
  nlohmann::json j;
  j["protocol"] = protocol;
  j["threshold"] = threshold;
  j["apcer"] = apcer;
  j["bpcer"] = bpcer;
  j["acer"] = acer;
  if (hter >= 0.0) j["hter"] = hter;
  j["apcer_by_attack"] = apcer_by_attack;
  j["bona_fide_count"] = bona_fide_count;
  j["attack_count"] = attack_count;
  return j.dump();
}

}  // namespace dcn
