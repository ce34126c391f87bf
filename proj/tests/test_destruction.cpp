#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dcn/destruction.hpp"
#include "dcn/rng.hpp"

using namespace dcn;

namespace {

Tensor<double> iota_image(std::size_t c, std::size_t h, std::size_t w) {
  Tensor<double> t({c, h, w});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<double>(i);
  return t;
}

}  // namespace

TEST_CASE("split: index-arithmetic oracle on a 4x4 image") {
  Tensor<double> img = iota_image(1, 4, 4);  // entries 0..15
  auto patches = split_patches(img, GridSpec{2, 2});
  REQUIRE(patches.size() == 4);
  // patch 0 = rows [0,2) x cols [0,2)
  CHECK(patches[0].at3(0, 0, 0) == 0);
  CHECK(patches[0].at3(0, 0, 1) == 1);
  CHECK(patches[0].at3(0, 1, 0) == 4);
  CHECK(patches[0].at3(0, 1, 1) == 5);
  // patch 3 = rows [2,4) x cols [2,4)
  CHECK(patches[3].at3(0, 0, 0) == 10);
  CHECK(patches[3].at3(0, 1, 1) == 15);
}

TEST_CASE("1x1 grid is rejected: P >= 2") {
  Tensor<double> img = iota_image(1, 4, 4);
  CHECK_THROWS_AS(split_patches(img, GridSpec{1, 1}), ConfigError);
}

TEST_CASE("non-divisible geometry is rejected") {
  Tensor<double> img = iota_image(1, 5, 4);
  CHECK_THROWS_AS(split_patches(img, GridSpec{2, 2}), ConfigError);
}

TEST_CASE("assemble(split(x)) round trips") {
  Rng rng(1);
  Tensor<double> img({3, 6, 9});
  for (double& v : img.data) v = rng.uniform(0, 1);
  GridSpec grid{3, 3};
  Tensor<double> back = assemble_patches(split_patches(img, grid), grid);
  CHECK(back.data == img.data);
}

TEST_CASE("sample_permutation: P=2 frequencies are 0.5 +/- 0.02") {
  Rng rng(42);
  int identity_count = 0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i)
    if (sample_permutation(rng, 2)[0] == 0) ++identity_count;
  double freq = static_cast<double>(identity_count) / draws;
  CHECK(freq == doctest::Approx(0.5).epsilon(0.04));
  CHECK(std::abs(freq - 0.5) < 0.02);
}

TEST_CASE("sample_permutation: all 6 permutations of P=3 occur") {
  Rng rng(43);
  std::set<Permutation> seen;
  for (int i = 0; i < 10000; ++i) seen.insert(sample_permutation(rng, 3));
  CHECK(seen.size() == 6);
}

TEST_CASE("sample_permutation is deterministic under a fixed seed") {
  Rng a(7), b(7);
  for (int i = 0; i < 20; ++i) CHECK(sample_permutation(a, 9) == sample_permutation(b, 9));
}

TEST_CASE("destroy with identity sigma is the identity") {
  Rng rng(2);
  Tensor<double> img({3, 6, 6}), refl({1, 12, 12});
  for (double& v : img.data) v = rng.uniform(0, 1);
  for (double& v : refl.data) v = rng.uniform(0, 1);
  GridSpec grid{3, 3};
  Provenance prov = uniform_provenance(9, 1, 0, 55);
  auto out = destroy(img, {refl}, grid, identity_permutation(9), prov);
  CHECK(out.image.data == img.data);
  CHECK(out.labels[0].data == refl.data);
  CHECK(out.provenance == prov);
}

TEST_CASE("destroy then inverse sigma restores image, labels and provenance") {
  Rng rng(3);
  GridSpec grid{2, 3};
  Tensor<double> img({3, 8, 9}), refl({1, 4, 3});
  for (double& v : img.data) v = rng.uniform(0, 1);
  for (double& v : refl.data) v = rng.uniform(0, 1);
  Provenance prov;
  for (std::size_t p = 0; p < 6; ++p)
    prov.push_back(SlotOrigin{static_cast<int>(p % 2), static_cast<int>(p % 3), p});
  Permutation sigma = sample_permutation(rng, 6);
  auto fwd = destroy(img, {refl}, grid, sigma, prov);
  auto back = destroy(fwd.image, fwd.labels, grid, inverse_permutation(sigma), fwd.provenance);
  CHECK(back.image.data == img.data);
  CHECK(back.labels[0].data == refl.data);
  CHECK(back.provenance == prov);
}

TEST_CASE("swap sigma=[1,0] on a 1x2 grid swaps halves of image and label") {
  // 2x2-pixel toy image, grid 1 row x 2 cols.
  Tensor<double> img({1, 2, 2}, {1, 2, 3, 4});
  Tensor<double> refl({1, 2, 2}, {10, 20, 30, 40});
  GridSpec grid{1, 2};
  Provenance prov{{1, 0, 0}, {0, 1, 1}};
  auto out = destroy(img, {refl}, grid, Permutation{1, 0}, prov);
  CHECK(out.image.data == std::vector<double>{2, 1, 4, 3});
  CHECK(out.labels[0].data == std::vector<double>{20, 10, 40, 30});
  CHECK(out.provenance[0] == prov[1]);
  CHECK(out.provenance[1] == prov[0]);
}

TEST_CASE("label resolution not divisible by the grid is rejected") {
  Tensor<double> img({1, 4, 4});
  Tensor<double> bad_label({1, 3, 4});
  GridSpec grid{2, 2};
  CHECK_THROWS_AS(destroy(img, {bad_label}, grid, identity_permutation(4),
                          uniform_provenance(4, 1, 0, 0)),
                  ConfigError);
}

TEST_CASE("property: multiset conservation, co-transform consistency, group action") {
  Rng rng(2024);
  for (int iter = 0; iter < 1000; ++iter) {
    GridSpec grid{static_cast<std::size_t>(rng.range(1, 4)),
                  static_cast<std::size_t>(rng.range(1, 4))};
    if (grid.patch_count() < 2) grid.cols = 2;
    std::size_t ph = static_cast<std::size_t>(rng.range(1, 3));
    std::size_t pw = static_cast<std::size_t>(rng.range(1, 3));
    std::size_t h = grid.rows * ph, w = grid.cols * pw;
    std::size_t P = grid.patch_count();

    Tensor<double> img({1, h, w});
    for (double& v : img.data) v = rng.uniform(0, 1);
    // Label at twice the image resolution; marker value = slot of origin.
    Tensor<double> lbl({1, 2 * h, 2 * w});
    {
      auto lgrid = grid;
      std::size_t lph = 2 * h / grid.rows, lpw = 2 * w / grid.cols;
      (void)lgrid;
      for (std::size_t y = 0; y < 2 * h; ++y)
        for (std::size_t x = 0; x < 2 * w; ++x)
          lbl.at3(0, y, x) = static_cast<double>((y / lph) * grid.cols + x / lpw);
    }
    Provenance prov;
    for (std::size_t p = 0; p < P; ++p)
      prov.push_back(SlotOrigin{static_cast<int>(p % 2), static_cast<int>(p % 3), p});

    Permutation s1 = sample_permutation(rng, P);
    auto out = destroy(img, {lbl}, grid, s1, prov);

    // Pixel multiset is conserved.
    std::vector<double> a = img.data, b = out.image.data;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    CHECK(a == b);

    // Co-transform: every label pixel in slot p carries marker s1[p], and
    // provenance says the same source.
    std::size_t lph = 2 * h / grid.rows, lpw = 2 * w / grid.cols;
    bool consistent = true;
    for (std::size_t p = 0; p < P; ++p) {
      std::size_t r = p / grid.cols, c = p % grid.cols;
      for (std::size_t y = 0; y < lph && consistent; ++y)
        for (std::size_t x = 0; x < lpw; ++x)
          if (out.labels[0].at3(0, r * lph + y, c * lpw + x) !=
              static_cast<double>(s1[p])) {
            consistent = false;
            break;
          }
      if (out.provenance[p].sample_id != s1[p]) consistent = false;
    }
    CHECK(consistent);

    // Group action: destroy(s2) after destroy(s1) == destroy(composed).
    Permutation s2 = sample_permutation(rng, P);
    auto two_step = destroy(out.image, out.labels, grid, s2, out.provenance);
    auto composed = destroy(img, {lbl}, grid, compose_permutations(s2, s1), prov);
    CHECK(two_step.image.data == composed.image.data);
    CHECK(two_step.labels[0].data == composed.labels[0].data);
    CHECK(two_step.provenance == composed.provenance);
  }
}
