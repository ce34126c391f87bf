#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>

#include "dcn/metrics.hpp"
#include "dcn/rng.hpp"

using namespace dcn;

namespace {

ScoredSample make(double score, int cls, AttackType at = AttackType::none, int domain = 0) {
  static std::uint64_t next_id = 0;
  return ScoredSample{next_id++, score, cls, at, domain};
}

// Independent counting oracle, written from the definitions.
struct OracleRates {
  double apcer, bpcer, acer, far, frr;
};

OracleRates oracle(const std::vector<ScoredSample>& v, double thr) {
  std::map<AttackType, std::pair<int, int>> per_type;
  int bona = 0, bona_rej = 0, spoof = 0, spoof_acc = 0;
  for (const auto& s : v) {
    bool live = s.score >= thr;
    if (s.cls == 1) {
      ++bona;
      if (!live) ++bona_rej;
    } else {
      ++spoof;
      if (live) ++spoof_acc;
      per_type[s.attack].first++;
      if (live) per_type[s.attack].second++;
    }
  }
  OracleRates r{};
  for (auto& [t, c] : per_type)
    r.apcer = std::max(r.apcer, static_cast<double>(c.second) / c.first);
  r.bpcer = static_cast<double>(bona_rej) / bona;
  r.acer = (r.apcer + r.bpcer) / 2;
  r.far = static_cast<double>(spoof_acc) / spoof;
  r.frr = static_cast<double>(bona_rej) / bona;
  return r;
}

}  // namespace

TEST_CASE("classify: threshold edges and tie rule") {
  std::vector<double> scores{0.1, 0.5, 0.9};
  CHECK(classify(scores, 0.0) == std::vector<int>{1, 1, 1});
  CHECK(classify(scores, 0.91) == std::vector<int>{0, 0, 0});
  CHECK(classify(scores, 0.5) == std::vector<int>{0, 1, 1});  // tie -> live
}

TEST_CASE("apcer/bpcer/acer: counting oracle example") {
  std::vector<ScoredSample> v;
  // 10 attacks, 2 misclassified live (score over 0.5); one attack type.
  for (int i = 0; i < 8; ++i) v.push_back(make(0.2, 0, AttackType::print));
  for (int i = 0; i < 2; ++i) v.push_back(make(0.8, 0, AttackType::print));
  // 10 bona fide, 1 misclassified spoof.
  for (int i = 0; i < 9; ++i) v.push_back(make(0.9, 1));
  v.push_back(make(0.1, 1));
  double apcer, bpcer, acer;
  apcer_bpcer_acer(v, 0.5, &apcer, &bpcer, &acer);
  CHECK(apcer == doctest::Approx(0.20));
  CHECK(bpcer == doctest::Approx(0.10));
  CHECK(acer == doctest::Approx(0.15));
}

TEST_CASE("apcer is the max over attack types") {
  std::vector<ScoredSample> v;
  for (int i = 0; i < 9; ++i) v.push_back(make(0.1, 0, AttackType::print));
  v.push_back(make(0.9, 0, AttackType::print));  // print APCER = 0.1
  for (int i = 0; i < 7; ++i) v.push_back(make(0.1, 0, AttackType::replay));
  for (int i = 0; i < 3; ++i) v.push_back(make(0.9, 0, AttackType::replay));  // 0.3
  v.push_back(make(0.95, 1));
  double apcer, bpcer, acer;
  std::map<std::string, double> by_attack;
  apcer_bpcer_acer(v, 0.5, &apcer, &bpcer, &acer, &by_attack);
  CHECK(apcer == doctest::Approx(0.3));
  CHECK(by_attack["print"] == doctest::Approx(0.1));
  CHECK(by_attack["replay"] == doctest::Approx(0.3));
}

TEST_CASE("perfect separation gives (0,0,0)") {
  std::vector<ScoredSample> v;
  for (int i = 0; i < 5; ++i) v.push_back(make(0.9, 1));
  for (int i = 0; i < 5; ++i) v.push_back(make(0.1, 0, AttackType::replay));
  double apcer, bpcer, acer;
  apcer_bpcer_acer(v, 0.5, &apcer, &bpcer, &acer);
  CHECK(apcer == 0.0);
  CHECK(bpcer == 0.0);
  CHECK(acer == 0.0);
}

TEST_CASE("empty class raises an evaluation error naming the class") {
  std::vector<ScoredSample> only_live{make(0.9, 1)};
  double a, b, c;
  try {
    apcer_bpcer_acer(only_live, 0.5, &a, &b, &c);
    FAIL("expected EvalError");
  } catch (const EvalError& e) {
    CHECK(std::string(e.what()).find("attack") != std::string::npos);
  }
  std::vector<ScoredSample> only_spoof{make(0.1, 0, AttackType::print)};
  CHECK_THROWS_AS(apcer_bpcer_acer(only_spoof, 0.5, &a, &b, &c), EvalError);
}

TEST_CASE("eer threshold: perfectly separated scores reach FAR=FRR=0") {
  std::vector<ScoredSample> v;
  for (int i = 0; i < 4; ++i) v.push_back(make(0.8 + 0.02 * i, 1));
  for (int i = 0; i < 4; ++i) v.push_back(make(0.1 + 0.02 * i, 0, AttackType::print));
  double thr = eer_threshold(v);
  double far, frr;
  far_frr(v, thr, &far, &frr);
  CHECK(far == 0.0);
  CHECK(frr == 0.0);
}

TEST_CASE("eer threshold: overlapping toy set matches exhaustive scan") {
  std::vector<ScoredSample> v{make(0.6, 1), make(0.8, 1), make(0.4, 0, AttackType::print),
                              make(0.7, 0, AttackType::print)};
  double thr = eer_threshold(v);
  // Exhaustive scan over midpoints of adjacent distinct scores.
  std::vector<double> sorted{0.4, 0.6, 0.7, 0.8};
  double best_gap = 1e9, best_thr = 0;
  for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
    double cand = (sorted[i] + sorted[i + 1]) / 2;
    double far, frr;
    far_frr(v, cand, &far, &frr);
    if (std::abs(far - frr) < best_gap) {
      best_gap = std::abs(far - frr);
      best_thr = cand;
    }
  }
  CHECK(thr == doctest::Approx(best_thr));
  double far, frr;
  far_frr(v, thr, &far, &frr);
  CHECK(std::abs(far - frr) == doctest::Approx(best_gap));
}

TEST_CASE("duplicating the dataset leaves the threshold unchanged") {
  Rng rng(5);
  std::vector<ScoredSample> v;
  for (int i = 0; i < 30; ++i) v.push_back(make(rng.uniform(0.3, 1.0), 1));
  for (int i = 0; i < 30; ++i) v.push_back(make(rng.uniform(0.0, 0.7), 0, AttackType::print));
  double thr = eer_threshold(v);
  std::vector<ScoredSample> doubled = v;
  doubled.insert(doubled.end(), v.begin(), v.end());
  CHECK(eer_threshold(doubled) == thr);
}

TEST_CASE("hter basics") {
  std::vector<ScoredSample> perfect;
  for (int i = 0; i < 5; ++i) perfect.push_back(make(0.9, 1));
  for (int i = 0; i < 5; ++i) perfect.push_back(make(0.1, 0, AttackType::replay));
  CHECK(hter(perfect, 0.5) == 0.0);

  // All-live predictor on a balanced set: FAR=1, FRR=0 -> 0.5.
  CHECK(hter(perfect, 0.0) == doctest::Approx(0.5));
}

TEST_CASE("property: 100+ random sets match the counting oracle exactly") {
  Rng rng(99);
  for (int iter = 0; iter < 120; ++iter) {
    std::vector<ScoredSample> v;
    std::size_t n = 20 + rng.below(980);
    for (std::size_t i = 0; i < n; ++i) {
      int cls = rng.bernoulli(0.5) ? 1 : 0;
      AttackType at = cls == 1 ? AttackType::none
                               : (rng.bernoulli(0.5) ? AttackType::print : AttackType::replay);
      // Quantized scores force plenty of threshold ties.
      double score = static_cast<double>(rng.below(21)) / 20.0;
      v.push_back(make(score, cls, at));
    }
    bool has_live = false, has_spoof = false;
    for (const auto& s : v) (s.cls == 1 ? has_live : has_spoof) = true;
    if (!has_live || !has_spoof) continue;

    double thr = rng.uniform(0, 1);
    double apcer, bpcer, acer;
    apcer_bpcer_acer(v, thr, &apcer, &bpcer, &acer);
    OracleRates expect = oracle(v, thr);
    CHECK(apcer == expect.apcer);
    CHECK(bpcer == expect.bpcer);
    CHECK(acer == expect.acer);
    CHECK(acer == (apcer + bpcer) / 2.0);  // exact identity
    CHECK(hter(v, thr) == (expect.far + expect.frr) / 2.0);

    // Order invariance.
    std::vector<ScoredSample> shuffled = v;
    rng.shuffle(shuffled.begin(), shuffled.end());
    double a2, b2, c2;
    apcer_bpcer_acer(shuffled, thr, &a2, &b2, &c2);
    CHECK(a2 == apcer);
    CHECK(b2 == bpcer);

    // Duplication invariance.
    std::vector<ScoredSample> doubled = v;
    doubled.insert(doubled.end(), v.begin(), v.end());
    apcer_bpcer_acer(doubled, thr, &a2, &b2, &c2);
    CHECK(a2 == apcer);
    CHECK(b2 == bpcer);

    // Monotonicity: higher threshold never lowers BPCER / raises APCER_t.
    double thr2 = thr + rng.uniform(0, 1.0 - thr);
    std::map<std::string, double> t1, t2;
    apcer_bpcer_acer(v, thr, &apcer, &bpcer, &acer, &t1);
    apcer_bpcer_acer(v, thr2, &a2, &b2, &c2, &t2);
    CHECK(b2 >= bpcer);
    for (const auto& [type, rate] : t1) CHECK(t2[type] <= rate);
  }
}
