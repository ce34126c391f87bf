#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dcn/data_synth.hpp"
#include "dcn/metrics.hpp"

namespace dcn {

enum class Protocol { intra, cross_domain };

// Any scoring function over samples (trained model, or the ground-truth
// oracle 1 - mean(reflection_gt)).
using Scorer = std::function<double(const Sample&)>;

Scorer ground_truth_scorer();

std::vector<ScoredSample> score_split(const Scorer& scorer, const std::vector<Sample>& split);

// intra: EER threshold on `dev`, APCER/BPCER/ACER on `test` (same domains).
// cross_domain: EER threshold on source-domain `dev`, HTER (and the error
// rates at that threshold) on the held-out-domain `test_cross`.
EvalReport run_protocol(const Scorer& scorer, const DatasetManifest& manifest,
                        Protocol protocol);

void write_scores_csv(const std::string& path, const std::vector<ScoredSample>& samples);

}  // namespace dcn
