#pragma once

// Small, fast trained stages shared across test files. Their accuracy is
// modest; tests using them check plumbing, not converter quality.

#include "nnadc/trainer.hpp"
#include "nnadc/vtc.hpp"

#include <map>
#include <memory>

namespace nnadc::testing {

inline std::shared_ptr<const VtcFamily> small_family() {
  static const auto fam =
      std::make_shared<const VtcFamily>(sample_family(20, default_vtc_variation(1.0), 42));
  return fam;
}

inline TrainConfig quick_config(std::uint64_t seed = 5) {
  TrainConfig c;
  c.batch_size = 256;
  c.total_iters = 400;
  c.projection_period = 64;
  c.polish_sweeps = 1;
  c.anneal_moves = 0;
  c.validation_draws = 2;
  c.seed = seed;
  return c;
}

inline const TrainedStage &quick_stage(int n, bool has_residue = true) {
  static std::map<std::pair<int, bool>, TrainedStage> cache;
  auto it = cache.find({n, has_residue});
  if (it == cache.end()) {
    StageSpec spec = default_stage_spec(n);
    StageTrainOptions opts;
    opts.has_residue = has_residue;
    it = cache.emplace(std::pair{n, has_residue},
                       train_stage(spec, small_family(), DeviceGrid{1e-6, 8e-6, 3},
                                   quick_config(), opts))
             .first;
  }
  return it->second;
}

} // namespace nnadc::testing
