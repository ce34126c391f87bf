#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dcn/data_synth.hpp"

namespace dcn {

// One scored presentation. Higher score = more live.
struct ScoredSample {
  std::uint64_t sample_id = 0;
  double score = 0.0;
  int cls = 1;  // 1 = bona fide, 0 = attack
  AttackType attack = AttackType::none;
  int domain_id = 0;
};

struct EvalReport {
  std::string protocol;
  double threshold = 0.0;
  double apcer = 0.0;  // max over attack types (ISO convention)
  double bpcer = 0.0;
  double acer = 0.0;
  double hter = -1.0;  // only set by the cross-domain protocol
  std::map<std::string, double> apcer_by_attack;
  std::size_t bona_fide_count = 0;
  std::size_t attack_count = 0;

  std::string to_json_line() const;
};

// Predicted live iff score >= threshold; ties classify as live.
std::vector<int> classify(const std::vector<double>& scores, double threshold);

// APCER_t per attack type, APCER = max_t APCER_t, BPCER over bona fide,
// ACER = (APCER + BPCER)/2.
void apcer_bpcer_acer(const std::vector<ScoredSample>& samples, double threshold,
                      double* apcer, double* bpcer, double* acer,
                      std::map<std::string, double>* by_attack = nullptr);

// Threshold among midpoints of adjacent distinct sorted scores minimizing
// |FAR - FRR|; ties resolve to the smaller threshold.
double eer_threshold(const std::vector<ScoredSample>& dev_samples);

// HTER = (FAR + FRR)/2 at a threshold fixed on a disjoint split.
double hter(const std::vector<ScoredSample>& test_samples, double threshold);

void far_frr(const std::vector<ScoredSample>& samples, double threshold, double* far,
             double* frr);

}  // namespace dcn
