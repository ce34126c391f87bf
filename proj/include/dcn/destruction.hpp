#pragma once

#include <cstdint>
#include <vector>

#include "dcn/errors.hpp"
#include "dcn/rng.hpp"
#include "dcn/tensor.hpp"

namespace dcn {

// M x N patch grid over an H x W image. Slots are indexed row-major:
// p = r*N + c, one convention everywhere.
struct GridSpec {
  std::size_t rows = 3;  // M
  std::size_t cols = 3;  // N

  std::size_t patch_count() const { return rows * cols; }

  void validate(std::size_t h, std::size_t w) const {
    if (patch_count() < 2) throw ConfigError("grid: need at least 2 patches");
    if (rows == 0 || cols == 0 || h % rows != 0 || w % cols != 0)
      throw ConfigError("grid: " + std::to_string(rows) + "x" + std::to_string(cols) +
                        " does not divide " + std::to_string(h) + "x" + std::to_string(w));
  }
};

// sigma[p] = source slot whose patch lands at slot p.
using Permutation = std::vector<std::size_t>;

inline bool is_permutation(const Permutation& sigma) {
  std::vector<bool> seen(sigma.size(), false);
  for (std::size_t v : sigma) {
    if (v >= sigma.size() || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

inline Permutation identity_permutation(std::size_t p) {
  Permutation sigma(p);
  for (std::size_t i = 0; i < p; ++i) sigma[i] = i;
  return sigma;
}

inline Permutation inverse_permutation(const Permutation& sigma) {
  Permutation inv(sigma.size());
  for (std::size_t p = 0; p < sigma.size(); ++p) inv[sigma[p]] = p;
  return inv;
}

// first, then second: applying `first` and then `second` equals applying the
// returned permutation once.
inline Permutation compose_permutations(const Permutation& second, const Permutation& first) {
  Permutation out(first.size());
  for (std::size_t p = 0; p < first.size(); ++p) out[p] = first[second[p]];
  return out;
}

// Uniform over all P! permutations (Fisher-Yates).
inline Permutation sample_permutation(Rng& rng, std::size_t p) {
  Permutation sigma = identity_permutation(p);
  rng.shuffle(sigma.begin(), sigma.end());
  return sigma;
}

// Where each grid slot's content came from. Kept in lockstep with every
// destruction/combination op so class/domain masks stay well-defined.
struct SlotOrigin {
  int cls = 0;  // 1 = live, 0 = spoof
  int domain_id = 0;
  std::uint64_t sample_id = 0;

  bool operator==(const SlotOrigin&) const = default;
};
using Provenance = std::vector<SlotOrigin>;

inline Provenance uniform_provenance(std::size_t patches, int cls, int domain_id,
                                     std::uint64_t sample_id) {
  return Provenance(patches, SlotOrigin{cls, domain_id, sample_id});
}

// Patch p of a (C,H,W) tensor under `grid`, copied out in slot order.
template <typename T>
std::vector<Tensor<T>> split_patches(const Tensor<T>& image, const GridSpec& grid) {
  if (image.rank() != 3) throw ConfigError("split: expected (C,H,W)");
  grid.validate(image.dim(1), image.dim(2));
  std::size_t c = image.dim(0);
  std::size_t ph = image.dim(1) / grid.rows, pw = image.dim(2) / grid.cols;
  std::vector<Tensor<T>> patches;
  patches.reserve(grid.patch_count());
  for (std::size_t r = 0; r < grid.rows; ++r)
    for (std::size_t cc = 0; cc < grid.cols; ++cc) {
      Tensor<T> patch({c, ph, pw});
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < ph; ++y)
          for (std::size_t x = 0; x < pw; ++x)
            patch.at3(ch, y, x) = image.at3(ch, r * ph + y, cc * pw + x);
      patches.push_back(std::move(patch));
    }
  return patches;
}

template <typename T>
Tensor<T> assemble_patches(const std::vector<Tensor<T>>& patches, const GridSpec& grid) {
  if (patches.size() != grid.patch_count()) throw ConfigError("assemble: patch count mismatch");
  std::size_t c = patches[0].dim(0), ph = patches[0].dim(1), pw = patches[0].dim(2);
  Tensor<T> image({c, ph * grid.rows, pw * grid.cols});
  for (std::size_t p = 0; p < patches.size(); ++p) {
    std::size_t r = p / grid.cols, cc = p % grid.cols;
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < ph; ++y)
        for (std::size_t x = 0; x < pw; ++x)
          image.at3(ch, r * ph + y, cc * pw + x) = patches[p].at3(ch, y, x);
  }
  return image;
}

// Move whole patches: slot p of the output holds source patch sigma[p].
// Works at any resolution divisible by the grid, so pixel-aligned label
// maps are permuted on their own proportional grid.
template <typename T>
Tensor<T> permute_patches(const Tensor<T>& image, const GridSpec& grid,
                          const Permutation& sigma) {
  if (sigma.size() != grid.patch_count() || !is_permutation(sigma))
    throw ConfigError("permute_patches: sigma is not a bijection on the grid");
  auto patches = split_patches(image, grid);
  std::vector<Tensor<T>> out(patches.size());
  for (std::size_t p = 0; p < sigma.size(); ++p) out[p] = std::move(patches[sigma[p]]);
  return assemble_patches(out, grid);
}

// One patch-permuted training view: image, its co-transformed label maps,
// and per-slot provenance.
template <typename T>
struct DestroyedView {
  Tensor<T> image;
  std::vector<Tensor<T>> labels;
  Provenance provenance;
};

// Structure destruction: permute image, every aligned label map, and the
// provenance with one and the same sigma.
template <typename T>
DestroyedView<T> destroy(const Tensor<T>& image, const std::vector<Tensor<T>>& labels,
                         const GridSpec& grid, const Permutation& sigma,
                         const Provenance& provenance_in) {
  if (provenance_in.size() != grid.patch_count())
    throw ConfigError("destroy: provenance length != patch count");
  DestroyedView<T> out;
  out.image = permute_patches(image, grid, sigma);
  out.labels.reserve(labels.size());
  for (const auto& lbl : labels) out.labels.push_back(permute_patches(lbl, grid, sigma));
  out.provenance.resize(grid.patch_count());
  for (std::size_t p = 0; p < sigma.size(); ++p) out.provenance[p] = provenance_in[sigma[p]];
  return out;
}

}  // namespace dcn
