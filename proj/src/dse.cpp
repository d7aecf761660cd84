#include "nnadc/dse.hpp"

#include "nnadc/errors.hpp"
#include "nnadc/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

namespace nnadc {

void CostTable::validate() const {
  if (entries.empty())
    throw ConfigError("cost table is empty");
  for (const auto &[bits, pts] : entries) {
    const std::string where = "cost table entry " + std::to_string(bits);
    if (bits < 1 || bits > 3)
      throw ConfigError(where + ": stage resolution must be 1, 2 or 3");
    if (pts.empty())
      throw ConfigError(where + ": no operating points");
    for (const auto &p : pts)
      if (!(p.power_w > 0.0 && p.rate_sps > 0.0 && p.area_mm2 > 0.0) ||
          !std::isfinite(p.power_w + p.rate_sps + p.area_mm2))
        throw ConfigError(where + ": power, rate and area must be positive");
  }
}

const std::vector<OperatingPoint> &CostTable::points(int bits) const {
  const auto it = entries.find(bits);
  if (it == entries.end())
    throw ConfigError("cost table has no entry for " + std::to_string(bits) + "-bit stages");
  return it->second;
}

CostTable CostTable::simple(const double (&power_w)[3], const double (&rate_sps)[3],
                            const double (&area_mm2)[3]) {
  CostTable t;
  for (int j = 0; j < 3; ++j)
    t.entries[j + 1] = {{power_w[j], rate_sps[j], area_mm2[j]}};
  return t;
}

std::string to_string(EnobSource s) { return s == EnobSource::assumed ? "assumed" : "simulated"; }

EnobSource enob_source_from_string(const std::string &name) {
  if (name == "assumed")
    return EnobSource::assumed;
  if (name == "simulated")
    return EnobSource::simulated;
  throw ConfigError("unknown ENOB source '" + name + "'");
}

EnobOracle simulated_enob_oracle(std::map<int, TrainedStage> library, EncodingScheme enc,
                                 SineTest test) {
  struct State {
    std::map<int, TrainedStage> library;
    EncodingScheme enc;
    SineTest test;
    std::mutex mutex;
    std::map<Composition, double> cache;
  };
  auto state = std::make_shared<State>();
  state->library = std::move(library);
  state->enc = enc;
  state->test = test;
  return [state](const Composition &comp) {
    {
      std::lock_guard lock(state->mutex);
      if (auto it = state->cache.find(comp); it != state->cache.end())
        return it->second;
    }
    PipelineConfig cfg;
    cfg.enc = state->enc;
    for (int n : comp) {
      const auto it = state->library.find(n);
      if (it == state->library.end())
        throw ConfigError("no trained " + std::to_string(n) + "-bit stage for simulated ENOB");
      cfg.stages.push_back(it->second);
    }
    const double enob = pipeline_enob(PipelineRunner(cfg), SimMode::behavioral, state->test).enob;
    std::lock_guard lock(state->mutex);
    state->cache.emplace(comp, enob);
    return enob;
  };
}

namespace {

void compose(int left, Composition &prefix, std::vector<Composition> &out) {
  if (left == 0) {
    out.push_back(prefix);
    return;
  }
  for (int part = 1; part <= std::min(3, left); ++part) {
    prefix.push_back(part);
    compose(left - part, prefix, out);
    prefix.pop_back();
  }
}

void check_reso(int reso) {
  if (reso < 1 || reso > max_dse_resolution)
    throw ConfigError("DSE resolution must be in 1.." + std::to_string(max_dse_resolution));
}

} // namespace

std::vector<Composition> enumerate_compositions(int reso) {
  check_reso(reso);
  std::vector<Composition> out;
  out.reserve(composition_count(reso));
  Composition prefix;
  compose(reso, prefix, out);
  return out;
}

std::uint64_t composition_count(int reso) {
  if (reso < 0)
    return 0;
  std::uint64_t a = 0, b = 0, c = 1; // c(n-3), c(n-2), c(n-1) with c(0) = 1
  for (int n = 1; n <= reso; ++n) {
    const std::uint64_t next = a + b + c;
    a = b;
    b = c;
    c = next;
  }
  return c;
}

double walden_fom(double power_w, double enob, double rate_sps) {
  return power_w / (std::exp2(enob) * rate_sps);
}

DseResult evaluate_candidate(const Composition &comp, const CostTable &table, EnobSource source,
                             const EnobOracle &oracle) {
  if (comp.empty())
    throw ConfigError("empty composition");
  int reso = 0;
  for (int n : comp) {
    if (n < 1 || n > 3)
      throw ConfigError("stage resolution must be 1, 2 or 3");
    reso += n;
  }

  double enob = reso;
  if (source == EnobSource::simulated) {
    if (!oracle)
      throw ConfigError("simulated ENOB requested without trained stages");
    enob = oracle(comp);
  }

  // Candidate pipeline rates are the rates the table offers.
  std::set<double> rates;
  for (int n : comp)
    for (const auto &p : table.points(n))
      rates.insert(p.rate_sps);

  DseResult best;
  bool found = false;
  for (double rate : rates) {
    DseResult r{comp, 0.0, rate, 0.0, enob, 0.0, {}};
    double slowest = INFINITY;
    bool feasible = true;
    for (int n : comp) {
      const auto &pts = table.points(n);
      std::size_t pick = pts.size();
      for (std::size_t k = 0; k < pts.size(); ++k) {
        if (pts[k].rate_sps < rate)
          continue;
        if (pick == pts.size() || pts[k].power_w < pts[pick].power_w ||
            (pts[k].power_w == pts[pick].power_w && pts[k].area_mm2 < pts[pick].area_mm2))
          pick = k;
      }
      if (pick == pts.size()) {
        feasible = false;
        break;
      }
      r.operating_points.push_back(pick);
      r.power_w += pts[pick].power_w;
      r.area_mm2 += pts[pick].area_mm2;
      slowest = std::min(slowest, pts[pick].rate_sps);
    }
    if (!feasible)
      continue;
    r.rate_sps = slowest;
    r.fom_j = walden_fom(r.power_w, r.enob, r.rate_sps);
    if (!found || r.fom_j < best.fom_j || (r.fom_j == best.fom_j && r.area_mm2 < best.area_mm2)) {
      best = std::move(r);
      found = true;
    }
  }
  return best;
}

bool dse_less(const DseResult &a, const DseResult &b) {
  if (a.fom_j != b.fom_j)
    return a.fom_j < b.fom_j;
  if (a.area_mm2 != b.area_mm2)
    return a.area_mm2 < b.area_mm2;
  if (a.composition.size() != b.composition.size())
    return a.composition.size() < b.composition.size();
  return a.composition < b.composition;
}

std::vector<DseResult> optimize(int reso, const CostTable &table, EnobSource source,
                                const EnobOracle &oracle, unsigned threads) {
  table.validate();
  const auto comps = enumerate_compositions(reso);
  std::vector<DseResult> out(comps.size());
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(comps.size())));
  if (threads == 1) {
    for (std::size_t i = 0; i < comps.size(); ++i)
      out[i] = evaluate_candidate(comps[i], table, source, oracle);
  } else {
    // Strided split; the final sort makes the order independent of timing.
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (unsigned t = 0; t < threads; ++t)
      pool.emplace_back([&, t] {
        try {
          for (std::size_t i = t; i < comps.size(); i += threads)
            out[i] = evaluate_candidate(comps[i], table, source, oracle);
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    for (auto &th : pool)
      th.join();
    for (auto &e : errors)
      if (e)
        std::rethrow_exception(e);
  }
  std::sort(out.begin(), out.end(), dse_less);
  return out;
}

} // namespace nnadc
