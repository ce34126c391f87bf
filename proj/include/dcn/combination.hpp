#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "dcn/destruction.hpp"
#include "dcn/errors.hpp"
#include "dcn/rng.hpp"

namespace dcn {

enum class CombineMode { cross_class, cross_subdomain };

// Lightweight view metadata used for donor eligibility.
struct ViewMeta {
  int cls = 0;
  int domain_id = 0;
  std::uint64_t sample_id = 0;
};

// Which slots get exchanged and, per slot, which pool entry donates.
struct CombinationPlan {
  CombineMode mode = CombineMode::cross_class;
  std::vector<std::size_t> slots;   // distinct grid slots, |slots| = count
  std::vector<std::size_t> donors;  // pool index per slot
};

// Draw an exchange count from count_range = [lo,hi], distinct slots, and
// one eligible donor per slot. Donors are other patch-permuted views:
// cross_class requires a different class, cross_subdomain a different
// domain.
inline CombinationPlan plan_combination(Rng& rng, const ViewMeta& base,
                                        const std::vector<ViewMeta>& pool, CombineMode mode,
                                        std::size_t patches, std::size_t count_lo,
                                        std::size_t count_hi) {
  if (count_lo == 0 || count_hi >= patches || count_lo > count_hi)
    throw ConfigError("plan_combination: need 0 < count < P");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    bool ok = mode == CombineMode::cross_class ? pool[i].cls != base.cls
                                               : pool[i].domain_id != base.domain_id;
    if (ok) eligible.push_back(i);
  }
  if (eligible.empty())
    throw PlanError(std::string("plan_combination: no eligible donor for ") +
                    (mode == CombineMode::cross_class ? "cross_class" : "cross_subdomain"));
  CombinationPlan plan;
  plan.mode = mode;
  std::size_t count =
      count_lo + static_cast<std::size_t>(rng.below(count_hi - count_lo + 1));
  plan.slots = rng.sample_without_replacement(patches, count);
  plan.donors.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    plan.donors.push_back(eligible[rng.below(eligible.size())]);
  return plan;
}

// Copies grid slot `slot` of src into dst at the tensor's own resolution.
template <typename T>
void copy_slot(Tensor<T>& dst, const Tensor<T>& src, const GridSpec& grid, std::size_t slot) {
  grid.validate(dst.dim(1), dst.dim(2));
  std::size_t ph = dst.dim(1) / grid.rows, pw = dst.dim(2) / grid.cols;
  std::size_t r = slot / grid.cols, c = slot % grid.cols;
  for (std::size_t ch = 0; ch < dst.dim(0); ++ch)
    for (std::size_t y = 0; y < ph; ++y)
      for (std::size_t x = 0; x < pw; ++x)
        dst.at3(ch, r * ph + y, c * pw + x) = src.at3(ch, r * ph + y, c * pw + x);
}

// Exchange the planned slots: content at slot s comes from the donor's own
// slot s (never relocated); everything else is untouched.
template <typename T>
void apply_combination(DestroyedView<T>& base, const CombinationPlan& plan,
                       const std::vector<const DestroyedView<T>*>& pool_views,
                       const GridSpec& grid) {
  for (std::size_t i = 0; i < plan.slots.size(); ++i) {
    std::size_t slot = plan.slots[i];
    const DestroyedView<T>& donor = *pool_views.at(plan.donors[i]);
    if (!donor.image.same_shape(base.image) || donor.labels.size() != base.labels.size())
      throw ConfigError("apply_combination: donor geometry mismatch");
    copy_slot(base.image, donor.image, grid, slot);
    for (std::size_t l = 0; l < base.labels.size(); ++l) {
      if (!donor.labels[l].same_shape(base.labels[l]))
        throw ConfigError("apply_combination: donor label geometry mismatch");
      copy_slot(base.labels[l], donor.labels[l], grid, slot);
    }
    base.provenance[slot] = donor.provenance[slot];
  }
}

// Per-slot class / domain vectors read straight off provenance; inputs to
// the label-matrix construction.
inline std::vector<int> class_mask(const Provenance& prov) {
  std::vector<int> out(prov.size());
  for (std::size_t p = 0; p < prov.size(); ++p) out[p] = prov[p].cls;
  return out;
}

inline std::vector<int> domain_mask(const Provenance& prov) {
  std::vector<int> out(prov.size());
  for (std::size_t p = 0; p < prov.size(); ++p) out[p] = prov[p].domain_id;
  return out;
}

}  // namespace dcn
