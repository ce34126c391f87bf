#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dcn/relation.hpp"
#include "dcn/rng.hpp"

using namespace dcn;

TEST_CASE("cosine basics") {
  std::vector<double> v{2, 3, -1};
  CHECK(cosine(v, v) == doctest::Approx(1.0));
  CHECK(cosine<double>({1, 0}, {0, 1}) == doctest::Approx(0.0));
  CHECK(cosine<double>({1, 0}, {-1, 0}) == doctest::Approx(-1.0));
  CHECK(cosine<double>({3, 4}, {4, 3}) == doctest::Approx(24.0 / 25.0));
}

TEST_CASE("cosine length mismatch and zero-vector guard") {
  CHECK_THROWS_AS(cosine<double>({1, 2}, {1, 2, 3}), ConfigError);
  // Zero vectors go through the epsilon guard instead of dividing by zero.
  double c = cosine<double>({0, 0}, {1, 0});
  CHECK(std::isfinite(c));
  CHECK(c == doctest::Approx(0.0));
}

TEST_CASE("constant feature map gives the all-ones similarity matrix") {
  Tensor<double> s({4, 2, 3}, 0.8);
  Tensor<double> a = build_similarity_matrix(s);
  REQUIRE(a.shape == std::vector<std::size_t>{6, 6});
  for (double v : a.data) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("P=2 orthogonal features give the identity-like matrix") {
  // Slots (0,0) and (0,1); feature vectors (1,0) and (0,1) across channels.
  Tensor<double> s({2, 1, 2}, {1, 0, 0, 1});
  Tensor<double> a = build_similarity_matrix(s);
  CHECK(a.at2(0, 0) == doctest::Approx(1.0));
  CHECK(a.at2(0, 1) == doctest::Approx(0.0));
  CHECK(a.at2(1, 0) == doctest::Approx(0.0));
  CHECK(a.at2(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("similarity matrix equals the brute-force pairwise oracle") {
  Rng rng(101);
  for (int iter = 0; iter < 50; ++iter) {
    Tensor<double> s({5, 3, 3});
    for (double& v : s.data) v = rng.uniform(-1, 1);
    Tensor<double> a = build_similarity_matrix(s);
    // Independent double loop over all P^2 pairs.
    for (std::size_t p = 0; p < 9; ++p)
      for (std::size_t q = 0; q < 9; ++q) {
        double dot = 0, np = 0, nq = 0;
        for (std::size_t ch = 0; ch < 5; ++ch) {
          double up = s.data[ch * 9 + p], uq = s.data[ch * 9 + q];
          dot += up * uq;
          np += up * up;
          nq += uq * uq;
        }
        double expect = dot / (std::max(std::sqrt(np), 1e-8) * std::max(std::sqrt(nq), 1e-8));
        CHECK(std::abs(a.at2(p, q) - expect) < 1e-9);
      }
    // Structural invariants.
    for (std::size_t p = 0; p < 9; ++p) {
      CHECK(std::abs(a.at2(p, p) - 1.0) < 1e-6);
      for (std::size_t q = 0; q < 9; ++q) {
        CHECK(a.at2(p, q) == doctest::Approx(a.at2(q, p)).epsilon(1e-12));
        CHECK(a.at2(p, q) >= -1.0 - 1e-6);
        CHECK(a.at2(p, q) <= 1.0 + 1e-6);
      }
    }
  }
}

TEST_CASE("feature scale invariance: v -> 2v leaves A_sim unchanged") {
  Rng rng(55);
  Tensor<double> s({4, 2, 2});
  for (double& v : s.data) v = rng.uniform(-1, 1);
  Tensor<double> a = build_similarity_matrix(s);
  Tensor<double> s2 = s;
  for (std::size_t ch = 0; ch < 4; ++ch) s2.data[ch * 4 + 1] *= 2.0;  // scale slot 1
  Tensor<double> a2 = build_similarity_matrix(s2);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a[i] - a2[i]) < 1e-6);
}

TEST_CASE("label matrix from class masks") {
  SUBCASE("uniform mask is all ones") {
    Tensor<double> a = build_label_matrix<double>({1, 1, 1});
    for (double v : a.data) CHECK(v == 1.0);
  }
  SUBCASE("block structure for [live,live,spoof,spoof]") {
    Tensor<double> a = build_label_matrix<double>({1, 1, 0, 0});
    std::vector<double> expect{1, 1, -1, -1, 1, 1, -1, -1, -1, -1, 1, 1, -1, -1, 1, 1};
    CHECK(a.data == expect);
  }
  SUBCASE("cross-subdomain all-live mix stays all ones") {
    // Domains differ but the rule is class-only.
    Tensor<double> a = build_label_matrix<double>({1, 1, 1, 1});
    for (double v : a.data) CHECK(v == 1.0);
  }
  SUBCASE("symmetry and +1 diagonal always hold") {
    Rng rng(3);
    for (int iter = 0; iter < 100; ++iter) {
      std::vector<int> mask(9);
      for (int& m : mask) m = static_cast<int>(rng.below(2));
      Tensor<double> a = build_label_matrix<double>(mask);
      for (std::size_t p = 0; p < 9; ++p) {
        CHECK(a.at2(p, p) == 1.0);
        for (std::size_t q = 0; q < 9; ++q) CHECK(a.at2(p, q) == a.at2(q, p));
      }
    }
  }
}

TEST_CASE("similarity loss: exact match gives zero") {
  Tensor<double> a = build_label_matrix<double>({1, 0, 1});
  CHECK(similarity_loss_value(a, a) == 0.0);
}

TEST_CASE("similarity loss: hand oracle for the P=2 case") {
  Tensor<double> a_sim({2, 2}, {1, 0, 0, 1});
  Tensor<double> a_label({2, 2}, {1, -1, -1, 1});
  // (1/(2*1)) * (0 + 1 + 1 + 0) = 1.0
  CHECK(similarity_loss_value(a_sim, a_label) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("similarity loss equals the brute-force elementwise oracle") {
  Rng rng(9);
  for (int iter = 0; iter < 100; ++iter) {
    std::size_t P = 2 + rng.below(6);
    Tensor<double> a({P, P}), l({P, P});
    for (double& v : a.data) v = rng.uniform(-1, 1);
    for (double& v : l.data) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
    double acc = 0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - l[i]) * (a[i] - l[i]);
    double expect = acc / static_cast<double>(P * (P - 1));
    CHECK(std::abs(similarity_loss_value(a, l) - expect) < 1e-9);
  }
}

TEST_CASE("similarity loss shape mismatch is rejected") {
  Tensor<double> a({2, 2}, 0.0);
  Tensor<double> b({3, 3}, 0.0);
  CHECK_THROWS_AS(similarity_loss_value(a, b), ConfigError);
}

TEST_CASE("loss is invariant under simultaneous slot relabeling") {
  Rng rng(21);
  std::size_t P = 5;
  Tensor<double> a({P, P}), l({P, P});
  for (double& v : a.data) v = rng.uniform(-1, 1);
  for (double& v : l.data) v = rng.bernoulli(0.5) ? 1.0 : -1.0;
  double base = similarity_loss_value(a, l);
  std::vector<std::size_t> perm{3, 1, 4, 0, 2};
  Tensor<double> ap({P, P}), lp({P, P});
  for (std::size_t i = 0; i < P; ++i)
    for (std::size_t j = 0; j < P; ++j) {
      ap.at2(i, j) = a.at2(perm[i], perm[j]);
      lp.at2(i, j) = l.at2(perm[i], perm[j]);
    }
  CHECK(similarity_loss_value(ap, lp) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("differentiable route matches the plain route") {
  Rng rng(31);
  Tensor<double> s({6, 2, 2});
  for (double& v : s.data) v = rng.uniform(-1, 1);
  Tensor<double> label = build_label_matrix<double>({1, 0, 0, 1});

  Graph<double> g;
  Node<double>* sn = g.input(s, true);
  Node<double>* a = cosine_matrix_op(g, sn);
  Node<double>* loss = similarity_loss_op(g, a, label);

  Tensor<double> a_plain = build_similarity_matrix(s);
  for (std::size_t i = 0; i < a->value.size(); ++i)
    CHECK(a->value[i] == doctest::Approx(a_plain[i]).epsilon(1e-12));
  CHECK(loss->value[0] ==
        doctest::Approx(similarity_loss_value(a_plain, label)).epsilon(1e-12));
}
