#pragma once

// Design-space exploration over pipeline compositions with user-supplied
// per-stage cost tables, ranked by Walden FoM then area.

#include "nnadc/metrics.hpp"
#include "nnadc/signal.hpp"
#include "nnadc/stage.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace nnadc {

/// One way to run a stage of a given resolution.
struct OperatingPoint {
  double power_w = 0.0;
  double rate_sps = 0.0;
  double area_mm2 = 0.0;
};

/// Operating points per stage resolution (1..3). Several points per
/// resolution describe a rate/power/area trade-off curve.
struct CostTable {
  std::map<int, std::vector<OperatingPoint>> entries;

  void validate() const;
  /// Throws ConfigError when the resolution has no entry.
  const std::vector<OperatingPoint> &points(int bits) const;

  /// Single operating point per resolution: E, f, A indexed by N - 1.
  static CostTable simple(const double (&power_w)[3], const double (&rate_sps)[3],
                          const double (&area_mm2)[3]);
};

using Composition = std::vector<int>;

enum class EnobSource { assumed, simulated };

std::string to_string(EnobSource s);
EnobSource enob_source_from_string(const std::string &name);

/// Measured ENOB of a composition, used in simulated mode.
using EnobOracle = std::function<double(const Composition &)>;

/// Builds each composition from copies of trained stages keyed by
/// resolution and measures its behavioral ENOB. Thread-safe, memoized.
EnobOracle simulated_enob_oracle(std::map<int, TrainedStage> library, EncodingScheme enc = {},
                                 SineTest test = {});

struct DseResult {
  Composition composition;
  double power_w = 0.0;
  double rate_sps = 0.0;
  double area_mm2 = 0.0;
  double enob = 0.0;
  double fom_j = 0.0;
  /// Chosen operating point index per stage.
  std::vector<std::size_t> operating_points;
};

inline constexpr int max_dse_resolution = 16;

/// Every ordered composition of reso into parts 1..3, in lexicographic order.
std::vector<Composition> enumerate_compositions(int reso);

/// c(n) = c(n-1) + c(n-2) + c(n-3), c(0) = 1.
std::uint64_t composition_count(int reso);

/// P / (2^ENOB * f_S).
double walden_fom(double power_w, double enob, double rate_sps);

/// Picks, over the candidate pipeline rates offered by the table, the
/// cheapest point per stage that keeps up; the best rate by (FoM, area)
/// wins. With one point per resolution this is the plain sum/min.
DseResult evaluate_candidate(const Composition &comp, const CostTable &table, EnobSource source,
                             const EnobOracle &oracle = {});

/// Strict ranking: FoM, area, stage count, composition.
bool dse_less(const DseResult &a, const DseResult &b);

/// All compositions of reso evaluated and sorted by dse_less.
std::vector<DseResult> optimize(int reso, const CostTable &table, EnobSource source,
                                const EnobOracle &oracle = {}, unsigned threads = 1);

} // namespace nnadc
