#include "nnadc/trainer.hpp"

#include "nnadc/errors.hpp"
#include "nnadc/metrics.hpp"
#include "nnadc/seed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace nnadc {

std::string to_string(VtcPolicy p) { return p == VtcPolicy::fixed ? "fixed" : "per_batch"; }

VtcPolicy vtc_policy_from_string(const std::string &name) {
  if (name == "per_batch")
    return VtcPolicy::per_batch;
  if (name == "fixed")
    return VtcPolicy::fixed;
  throw ConfigError("unknown VTC policy '" + name + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1)
    throw ConfigError("batch_size must be >= 1");
  if (total_iters < 1)
    throw ConfigError("total_iters must be >= 1");
  if (projection_period < 1)
    throw ConfigError("projection_period must be >= 1");
  if (!(lr_start > 0.0) || !(lr_end > 0.0))
    throw ConfigError("learning rates must be positive");
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.eps > 0.0))
    throw ConfigError("Adam parameters out of range");
  if (precision_bits < 1 || precision_bits > 7)
    throw ConfigError("precision_bits must be 1..7");
  if (!(surrogate_start > 0.0) || !(surrogate_end > 0.0))
    throw ConfigError("surrogate widths must be positive");
  if (restarts < 1)
    throw ConfigError("restarts must be >= 1");
  if (unit_sweeps < 0 || unit_max_shapes < 1)
    throw ConfigError("unit search settings out of range");
  if (anneal_restarts < 1)
    throw ConfigError("anneal_restarts must be >= 1");
  if (!(anneal_t_start > 0.0) || !(anneal_t_end > 0.0))
    throw ConfigError("anneal temperatures must be positive");
  if (anneal_moves < 0)
    throw ConfigError("anneal_moves must be >= 0");
  if (polish_sweeps < 0)
    throw ConfigError("polish_sweeps must be >= 0");
  if (validation_draws < 1)
    throw ConfigError("validation_draws must be >= 1");
}

double learning_rate(const TrainConfig &config, long iter) {
  if (config.total_iters <= 1)
    return config.lr_start;
  const double frac =
      std::clamp(static_cast<double>(iter) / static_cast<double>(config.total_iters - 1), 0.0, 1.0);
  return config.lr_start * std::pow(config.lr_end / config.lr_start, frac);
}

namespace {

// Deployed output of a head: the residue saturates at the rails, the
// comparator is replaced by its surrogate.
double head_output(const Head &head, double y) {
  if (head.kind == HeadKind::residue)
    return std::clamp(head.gain * y, 0.0, head.vdd);
  const double x = (y - 0.5 * head.vdd) / head.surrogate_width;
  const double l = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return head.vdd * l;
}

struct Dataset {
  Matrix inputs;
  Matrix targets;
};

Dataset grid_dataset(const NetworkTask &task, double vdd) {
  const auto grid = residue_grid(vdd);
  Dataset d{Matrix(grid.size(), task.inputs), Matrix(grid.size(), task.outputs)};
  for (std::size_t p = 0; p < grid.size(); ++p)
    task.sample(grid[p], d.inputs.row(p), d.targets.row(p));
  return d;
}

double average_loss(const MlpParams &params, const Dataset &data, const VtcFamily &family,
                    const Head &head, const std::vector<std::vector<std::size_t>> &assignments) {
  double acc = 0.0;
  for (const auto &a : assignments)
    acc += loss(forward_batch(params, data.inputs, family, head,
                              head.kind == HeadKind::residue ? Mode::infer : Mode::train, a),
                data.targets);
  return acc / static_cast<double>(assignments.size());
}

std::vector<std::size_t> draw_assignment(std::size_t hidden, const VtcFamily &family,
                                         std::mt19937_64 &rng) {
  std::vector<std::size_t> a(hidden);
  for (auto &x : a)
    x = pick_random_index(family, rng);
  return a;
}

void initialize(MlpParams &p, const DeviceGrid &grid, double vdd, std::mt19937_64 &rng) {
  const double w1 = grid.w_max(static_cast<int>(p.inputs() + 1));
  const double w2 = grid.w_max(static_cast<int>(p.hidden() + 1));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (auto &w : p.w1.flat())
    w = w1 * u(rng);
  for (auto &v : p.v1)
    v = w1 * vdd * u(rng);
  for (auto &w : p.w2.flat())
    w = w2 * u(rng);
  for (auto &v : p.v2)
    v = w2 * vdd * u(rng);
}

} // namespace

NetworkResult train_network(const NetworkTask &task, const VtcFamily &family,
                            const DeviceGrid &grid, double vdd, const TrainConfig &config,
                            std::uint64_t seed, const BatchObserver &observer) {
  config.validate();
  grid.validate();
  if (!task.sample)
    throw ConfigError("network task has no sampler");
  const Dataset validation = grid_dataset(task, vdd);
  const double final_width = task.head.surrogate_width;
  const double start_width = std::max(config.surrogate_start * vdd, final_width);

  NetworkResult best;
  best.final_loss = std::numeric_limits<double>::infinity();
  std::vector<std::vector<std::size_t>> best_assignments;

  for (int restart = 0; restart < config.restarts; ++restart) {
    const std::uint64_t run_seed = split_seed(seed, static_cast<std::uint64_t>(restart));
    std::mt19937_64 rng(run_seed);
    MlpParams params(task.inputs, task.hidden, task.outputs);
    initialize(params, grid, vdd, rng);

    std::mt19937_64 vtc_rng(split_seed(run_seed, 1));
    std::vector<std::vector<std::size_t>> assignments;
    if (config.vtc_policy == VtcPolicy::fixed) {
      assignments.push_back(draw_assignment(task.hidden, family, vtc_rng));
    } else {
      std::mt19937_64 val_rng(split_seed(run_seed, 2));
      for (std::size_t d = 0; d < config.validation_draws; ++d)
        assignments.push_back(draw_assignment(task.hidden, family, val_rng));
    }
    params.vtc_assignment = assignments.front();

    Head head = task.head;
    Head eval_head = task.head;
    AdamState state(params);
    Gradients grads(params);
    Batch batch{Matrix(config.batch_size, task.inputs), Matrix(config.batch_size, task.outputs)};
    std::uniform_real_distribution<double> input_dist(0.0, vdd);

    NetworkResult run;
    run.validation_loss = std::numeric_limits<double>::infinity();
    for (long iter = 0; iter < config.total_iters; ++iter) {
      if (head.kind == HeadKind::subadc) {
        const double frac = config.total_iters > 1
                                ? static_cast<double>(iter) / static_cast<double>(config.total_iters - 1)
                                : 1.0;
        head.surrogate_width = start_width * std::pow(final_width / start_width, frac);
      }
      for (std::size_t b = 0; b < config.batch_size; ++b)
        task.sample(input_dist(rng), batch.inputs.row(b), batch.targets.row(b));
      if (observer)
        observer(batch);
      std::vector<std::size_t> assignment = config.vtc_policy == VtcPolicy::fixed
                                                ? assignments.front()
                                                : draw_assignment(task.hidden, family, vtc_rng);
      const double l = backprop(params, batch, family, head, assignment, grads);
      if (!std::isfinite(l))
        throw TrainingError("training loss became non-finite", seed, iter);
      adam_step(params, grads, state, learning_rate(config, iter), config.adam);

      const bool boundary =
          (iter + 1) % config.projection_period == 0 || iter + 1 == config.total_iters;
      if (boundary) {
        params = project(params, grid, vdd);
        const double v = average_loss(params, validation, family, eval_head, assignments);
        if (!std::isfinite(v))
          throw TrainingError("validation loss became non-finite", seed, iter);
        run.projected_loss_history.push_back(v);
        // Later snapshots win ties: they were trained with the sharper
        // surrogate.
        if (v <= run.validation_loss) {
          run.validation_loss = v;
          run.params = params;
          run.best_iteration = iter + 1;
        }
      }
    }
    // Refinement on the grid. The first restart keeps the top-level seed so
    // single-restart runs do not depend on the restart count.
    const std::uint64_t refine_seed = restart == 0 ? seed : run_seed;
    run.final_loss = run.validation_loss;
    if (config.anneal_moves > 0) {
      // Each anneal restart starts from the same trained point; the best
      // polished result is kept.
      const MlpParams start = run.params;
      double best_annealed = std::numeric_limits<double>::infinity();
      for (int r = 0; r < config.anneal_restarts; ++r) {
        MlpParams candidate = start;
        anneal(candidate, task, family, grid, vdd, assignments, config.anneal_moves,
               split_seed(refine_seed, 0xa22ea1 + static_cast<std::uint64_t>(r)),
               config.anneal_t_start, config.anneal_t_end);
        double l = average_loss(candidate, validation, family, task.head, assignments);
        if (config.polish_sweeps > 0)
          l = polish(candidate, task, family, grid, vdd, assignments, config.polish_sweeps);
        if (l < best_annealed) {
          best_annealed = l;
          run.params = std::move(candidate);
        }
      }
      run.final_loss = best_annealed;
    }
    if (config.unit_sweeps > 0)
      run.final_loss = unit_search(run.params, task, family, grid, vdd, assignments,
                                   config.unit_sweeps, config.unit_max_shapes,
                                   split_seed(refine_seed, 0x5ea7c4));
    if (config.polish_sweeps > 0)
      run.final_loss = polish(run.params, task, family, grid, vdd, assignments, config.polish_sweeps);

    if (run.final_loss < best.final_loss) {
      best = std::move(run);
      best_assignments = assignments;
    }
  }

  if (config.vtc_policy == VtcPolicy::fixed) {
    best.params.vtc_assignment = best_assignments.front();
  } else {
    std::mt19937_64 deploy_rng(split_seed(seed, 0xde9107));
    best.params.vtc_assignment = draw_assignment(task.hidden, family, deploy_rng);
  }
  return best;
}

namespace {

// Incremental evaluator for single-parameter moves between grid levels.
// Coordinates enumerate layer 1 unit by unit (inputs, then bias) followed by
// layer 2 output by output (hidden units, then bias).
class LevelSearch {
public:
  LevelSearch(MlpParams &params, const NetworkTask &task, const VtcFamily &family,
              const DeviceGrid &grid, double vdd,
              const std::vector<std::vector<std::size_t>> &assignments)
      : p_(params), head_(task.head), family_(family), assignments_(assignments),
        data_(grid_dataset(task, vdd)), P_(data_.inputs.rows()), H_(params.hidden()),
        I_(params.inputs()), O_(params.outputs()), D_(assignments.size()), vdd_(vdd),
        top_(grid.level_count() - 1), z_(D_, std::vector<double>(H_ * P_)),
        h_(D_, std::vector<double>(H_ * P_)), y_(D_, std::vector<double>(O_ * P_)),
        out_loss_(O_), h_new_(P_), norm_(1.0 / static_cast<double>(P_ * D_)) {
    if (assignments.empty())
      throw ConfigError("level search needs at least one VTC assignment");
    if (!is_projected(params, grid, vdd))
      throw PrecisionError("level search requires projected parameters");
    const int fan1 = static_cast<int>(I_ + 1);
    const int fan2 = static_cast<int>(H_ + 1);
    for (int a = 0; a <= top_; ++a) {
      levels1_.push_back(grid.weight_of_level(a, fan1));
      levels2_.push_back(grid.weight_of_level(a, fan2));
    }
    level_.resize(coordinate_count());
    for (std::size_t c = 0; c < level_.size(); ++c) {
      const bool first = c < H_ * (I_ + 1);
      const double w = param(c) / (is_bias(c) ? vdd_ : 1.0);
      level_[c] = level_of_weight(w, grid, first ? fan1 : fan2);
    }
    refresh();
  }

  std::size_t coordinate_count() const { return H_ * (I_ + 1) + O_ * (H_ + 1); }
  int top() const { return top_; }
  int level(std::size_t c) const { return level_[c]; }
  double loss() const {
    double acc = 0.0;
    for (double l : out_loss_)
      acc += l;
    return acc * norm_;
  }

  double refresh() {
    for (std::size_t d = 0; d < D_; ++d) {
      for (std::size_t j = 0; j < H_; ++j)
        for (std::size_t q = 0; q < P_; ++q) {
          double acc = p_.v1[j];
          for (std::size_t i = 0; i < I_; ++i)
            acc += p_.w1(j, i) * data_.inputs(q, i);
          z_[d][j * P_ + q] = acc;
          h_[d][j * P_ + q] = vtc_eval(vtc(d, j), acc);
        }
      for (std::size_t o = 0; o < O_; ++o)
        for (std::size_t q = 0; q < P_; ++q) {
          double acc = p_.v2[o];
          for (std::size_t j = 0; j < H_; ++j)
            acc += p_.w2(o, j) * h_[d][j * P_ + q];
          y_[d][o * P_ + q] = acc;
        }
    }
    for (std::size_t o = 0; o < O_; ++o) {
      double acc = 0.0;
      for (std::size_t d = 0; d < D_; ++d)
        for (std::size_t q = 0; q < P_; ++q)
          acc += sq_err(y_[d][o * P_ + q], q, o);
      out_loss_[o] = acc;
    }
    return loss();
  }

  /// Loss with coordinate c moved to grid level a.
  double trial(std::size_t c, int a) { return move(c, a, false); }

  /// Replaces hidden unit j by the best combination of input levels and
  /// output levels among `max_shapes` candidates (all of them when the
  /// level space is small enough). Returns true when the loss improved.
  bool unit_move(std::size_t j, std::size_t max_shapes, std::mt19937_64 &rng) {
    const std::size_t k = I_ + 1;
    const std::size_t base = static_cast<std::size_t>(top_) + 1;
    double space = 1.0;
    for (std::size_t i = 0; i < k; ++i)
      space *= static_cast<double>(base);
    const bool exhaustive = space <= static_cast<double>(max_shapes);
    const std::size_t count = exhaustive ? static_cast<std::size_t>(space) : max_shapes;

    // Outputs with unit j removed.
    std::vector<std::vector<double>> rest(D_, std::vector<double>(O_ * P_));
    for (std::size_t d = 0; d < D_; ++d)
      for (std::size_t o = 0; o < O_; ++o)
        for (std::size_t q = 0; q < P_; ++q)
          rest[d][o * P_ + q] = y_[d][o * P_ + q] - p_.w2(o, j) * h_[d][j * P_ + q];

    std::vector<int> shape(k), best_shape(k), out_levels(O_), best_out(O_);
    for (std::size_t i = 0; i < k; ++i)
      best_shape[i] = level_[j * k + i];
    const std::size_t c2 = H_ * (I_ + 1);
    for (std::size_t o = 0; o < O_; ++o)
      best_out[o] = level_[c2 + o * (H_ + 1) + j];
    double best = loss() * (1.0 - 1e-12);
    bool improved = false;

    std::uniform_int_distribution<int> pick(0, top_);
    std::vector<double> u(D_ * P_);
    for (std::size_t n = 0; n < count; ++n) {
      if (exhaustive) {
        std::size_t code = n;
        for (std::size_t i = 0; i < k; ++i) {
          shape[i] = static_cast<int>(code % base);
          code /= base;
        }
      } else {
        for (auto &x : shape)
          x = pick(rng);
      }
      for (std::size_t d = 0; d < D_; ++d) {
        const auto &vp = vtc(d, j);
        for (std::size_t q = 0; q < P_; ++q) {
          double z = levels1_[shape[I_]] * vdd_;
          for (std::size_t i = 0; i < I_; ++i)
            z += levels1_[shape[i]] * data_.inputs(q, i);
          u[d * P_ + q] = vtc_eval(vp, z);
        }
      }
      double total = 0.0;
      for (std::size_t o = 0; o < O_ && total < best; ++o) {
        double best_o = std::numeric_limits<double>::infinity();
        for (int a = 0; a <= top_; ++a) {
          const double w = levels2_[a];
          double acc = 0.0;
          for (std::size_t d = 0; d < D_ && acc < best_o; ++d) {
            const double *r = &rest[d][o * P_];
            const double *uu = &u[d * P_];
            for (std::size_t q = 0; q < P_; ++q)
              acc += sq_err(r[q] + w * uu[q], q, o);
          }
          if (acc < best_o) {
            best_o = acc;
            out_levels[o] = a;
          }
        }
        total += best_o * norm_;
      }
      if (total < best) {
        best = total;
        best_shape = shape;
        best_out = out_levels;
        improved = true;
      }
    }
    if (!improved)
      return false;
    for (std::size_t i = 0; i < k; ++i)
      if (level_[j * k + i] != best_shape[i])
        commit(j * k + i, best_shape[i]);
    for (std::size_t o = 0; o < O_; ++o) {
      const std::size_t c = c2 + o * (H_ + 1) + j;
      if (level_[c] != best_out[o])
        commit(c, best_out[o]);
    }
    return true;
  }

  std::size_t hidden() const { return H_; }
  void commit(std::size_t c, int a) {
    move(c, a, true);
    level_[c] = a;
  }

private:
  const VtcParams &vtc(std::size_t d, std::size_t j) const {
    return family_.members.at(assignments_[d].at(j));
  }
  double sq_err(double y, std::size_t q, std::size_t o) const {
    const double e = head_output(head_, y) - data_.targets(q, o);
    return e * e;
  }
  bool is_bias(std::size_t c) const {
    if (c < H_ * (I_ + 1))
      return c % (I_ + 1) == I_;
    return (c - H_ * (I_ + 1)) % (H_ + 1) == H_;
  }
  double &param(std::size_t c) {
    if (c < H_ * (I_ + 1)) {
      const std::size_t j = c / (I_ + 1), i = c % (I_ + 1);
      return i == I_ ? p_.v1[j] : p_.w1(j, i);
    }
    const std::size_t k = c - H_ * (I_ + 1);
    const std::size_t o = k / (H_ + 1), j = k % (H_ + 1);
    return j == H_ ? p_.v2[o] : p_.w2(o, j);
  }

  double move(std::size_t c, int a, bool commit) {
    double &target = param(c);
    const bool first = c < H_ * (I_ + 1);
    const double value = (first ? levels1_ : levels2_)[a] * (is_bias(c) ? vdd_ : 1.0);
    const double delta = value - target;
    double result;
    if (first) {
      const std::size_t j = c / (I_ + 1), i = c % (I_ + 1);
      std::vector<double> new_loss(O_, 0.0);
      for (std::size_t d = 0; d < D_; ++d) {
        const auto &vp = vtc(d, j);
        double *z = &z_[d][j * P_];
        double *h = &h_[d][j * P_];
        for (std::size_t q = 0; q < P_; ++q) {
          const double x = i == I_ ? 1.0 : data_.inputs(q, i);
          h_new_[q] = vtc_eval(vp, z[q] + delta * x);
        }
        for (std::size_t o = 0; o < O_; ++o) {
          const double w = p_.w2(o, j);
          double *y = &y_[d][o * P_];
          for (std::size_t q = 0; q < P_; ++q) {
            const double yn = y[q] + w * (h_new_[q] - h[q]);
            new_loss[o] += sq_err(yn, q, o);
            if (commit)
              y[q] = yn;
          }
        }
        if (commit)
          for (std::size_t q = 0; q < P_; ++q) {
            z[q] += delta * (i == I_ ? 1.0 : data_.inputs(q, i));
            h[q] = h_new_[q];
          }
      }
      double acc = 0.0;
      for (double l : new_loss)
        acc += l;
      result = acc * norm_;
      if (commit)
        out_loss_ = new_loss;
    } else {
      const std::size_t k = c - H_ * (I_ + 1);
      const std::size_t o = k / (H_ + 1), j = k % (H_ + 1);
      double acc = 0.0;
      for (std::size_t d = 0; d < D_; ++d) {
        double *y = &y_[d][o * P_];
        const double *h = j == H_ ? nullptr : &h_[d][j * P_];
        for (std::size_t q = 0; q < P_; ++q) {
          const double yn = y[q] + delta * (h ? h[q] : 1.0);
          acc += sq_err(yn, q, o);
          if (commit)
            y[q] = yn;
        }
      }
      double rest = 0.0;
      for (std::size_t oo = 0; oo < O_; ++oo)
        if (oo != o)
          rest += out_loss_[oo];
      result = (rest + acc) * norm_;
      if (commit)
        out_loss_[o] = acc;
    }
    if (commit)
      target = value;
    return result;
  }

  MlpParams &p_;
  Head head_;
  const VtcFamily &family_;
  const std::vector<std::vector<std::size_t>> &assignments_;
  Dataset data_;
  std::size_t P_, H_, I_, O_, D_;
  double vdd_;
  int top_;
  std::vector<double> levels1_, levels2_;
  std::vector<int> level_;
  std::vector<std::vector<double>> z_, h_, y_;
  std::vector<double> out_loss_;
  std::vector<double> h_new_;
  double norm_;
};

double coordinate_descent(LevelSearch &search, int max_sweeps) {
  const double tol = 1e-15;
  double current = search.loss();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    const double before = current;
    for (std::size_t c = 0; c < search.coordinate_count(); ++c) {
      int best_level = search.level(c);
      double best_loss = current;
      for (int a = 0; a <= search.top(); ++a) {
        if (a == search.level(c))
          continue;
        const double l = search.trial(c, a);
        if (l < best_loss - tol) {
          best_loss = l;
          best_level = a;
        }
      }
      if (best_level != search.level(c)) {
        search.commit(c, best_level);
        current = search.loss();
      }
    }
    if (!(current < before - tol))
      break;
  }
  return current;
}

} // namespace

double polish(MlpParams &params, const NetworkTask &task, const VtcFamily &family,
              const DeviceGrid &grid, double vdd,
              const std::vector<std::vector<std::size_t>> &assignments, int max_sweeps) {
  LevelSearch search(params, task, family, grid, vdd, assignments);
  coordinate_descent(search, max_sweeps);
  // Incremental updates accumulate rounding; report a fresh evaluation.
  return search.refresh();
}

double unit_search(MlpParams &params, const NetworkTask &task, const VtcFamily &family,
                   const DeviceGrid &grid, double vdd,
                   const std::vector<std::vector<std::size_t>> &assignments, int sweeps,
                   std::size_t max_shapes, std::uint64_t seed) {
  LevelSearch search(params, task, family, grid, vdd, assignments);
  std::mt19937_64 rng(seed);
  for (int sweep = 0; sweep < sweeps; ++sweep) {
    bool any = false;
    for (std::size_t j = 0; j < search.hidden(); ++j)
      any = search.unit_move(j, max_shapes, rng) || any;
    coordinate_descent(search, 2);
    if (!any)
      break;
  }
  return search.refresh();
}

double anneal(MlpParams &params, const NetworkTask &task, const VtcFamily &family,
              const DeviceGrid &grid, double vdd,
              const std::vector<std::vector<std::size_t>> &assignments, long moves,
              std::uint64_t seed, double t_start_rel, double t_end_rel) {
  LevelSearch search(params, task, family, grid, vdd, assignments);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> coord(0, search.coordinate_count() - 1);
  std::uniform_int_distribution<int> step(1, search.top());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double current = search.loss();
  double best = current;
  MlpParams best_params = params;
  const double t_start = t_start_rel * current;
  const double t_end = t_end_rel * current;
  for (long m = 0; m < moves; ++m) {
    const double temp =
        t_start * std::pow(t_end / t_start, static_cast<double>(m) / static_cast<double>(moves));
    const std::size_t c = coord(rng);
    const int a = (search.level(c) + step(rng)) % (search.top() + 1);
    const double l = search.trial(c, a);
    if (l <= current || unit(rng) < std::exp((current - l) / temp)) {
      search.commit(c, a);
      current = l;
      if (current < best) {
        best = current;
        best_params = params;
      }
    }
  }
  params = best_params;
  return best;
}

NetworkTask subadc_task(const StageSpec &spec, StageFunction f, double surrogate_width) {
  spec.validate();
  NetworkTask t;
  t.inputs = 1;
  t.hidden = static_cast<std::size_t>(spec.subadc_hidden);
  t.outputs = static_cast<std::size_t>(spec.smooth_width);
  t.head = {HeadKind::subadc, spec.vdd, 1.0, surrogate_width};
  t.sample = [spec, f](double v, std::span<double> in, std::span<double> target) {
    in[0] = v;
    const auto code = smooth_encode(target_level(v, spec, f), spec);
    for (std::size_t k = 0; k < code.size(); ++k)
      target[k] = code[k] ? spec.vdd : 0.0;
  };
  return t;
}

NetworkTask residue_task(const StageSpec &spec, StageFunction f, const MlpParams &subadc,
                         const VtcFamily &family) {
  spec.validate();
  NetworkTask t;
  t.inputs = 1 + static_cast<std::size_t>(spec.smooth_width);
  t.hidden = static_cast<std::size_t>(spec.residue_hidden);
  t.outputs = 1;
  t.head = {HeadKind::residue, spec.vdd, spec.residue_gain, 0.0};
  const Head comparator{HeadKind::subadc, spec.vdd, 1.0, 0.01 * spec.vdd};
  t.sample = [spec, f, subadc, &family, comparator](double v, std::span<double> in,
                                                     std::span<double> target) {
    const double x[1] = {v};
    const auto out = forward_stage(subadc, x, family, comparator, Mode::infer);
    Bits bits(out.size());
    in[0] = v;
    for (std::size_t k = 0; k < out.size(); ++k) {
      bits[k] = out[k] >= 0.5 * spec.vdd ? 1 : 0;
      in[k + 1] = bits[k] ? spec.vdd : 0.0;
    }
    const int level = smooth_decode(bits, spec);
    target[0] = std::clamp(target_residue(v, level, spec, f), 0.0, spec.vdd);
  };
  return t;
}

TrainedStage train_stage(const StageSpec &spec, std::shared_ptr<const VtcFamily> family,
                         const DeviceGrid &grid_in, const TrainConfig &config,
                         const StageTrainOptions &options) {
  spec.validate();
  config.validate();
  if (options.residue_config) {
    options.residue_config->validate();
    if (options.residue_config->precision_bits != config.precision_bits)
      throw ConfigError("residue network must use the stage's RRAM precision");
  }
  if (!family || family->members.empty())
    throw ConfigError("training needs a non-empty VTC family");
  DeviceGrid grid = grid_in;
  grid.precision_bits = config.precision_bits;
  grid.validate();

  TrainedStage stage;
  stage.spec = spec;
  stage.function = options.function;
  stage.has_residue = options.has_residue;
  stage.grid = grid;
  stage.family = family;
  stage.seed = config.seed;

  const auto sub_task = subadc_task(spec, options.function, config.surrogate_end * spec.vdd);
  auto sub = train_network(sub_task, *family, grid, spec.vdd, config, split_seed(config.seed, 1));
  stage.subadc = to_crossbar(sub.params, grid, spec.vdd);

  if (options.has_residue) {
    const auto res_task = residue_task(spec, options.function, sub.params, *family);
    const TrainConfig &rc = options.residue_config ? *options.residue_config : config;
    auto res = train_network(res_task, *family, grid, spec.vdd, rc, split_seed(config.seed, 2),
                             options.residue_observer);
    stage.residue = to_crossbar(res.params, grid, spec.vdd);
  }
  stage.metrics = evaluate_stage(stage);
  return stage;
}

double subadc_enob(const StageEvaluator &eval, double *sndr_db) {
  const auto &stage = eval.stage();
  const double vdd = stage.spec.vdd;
  const double levels = stage.spec.levels();
  SineTest test;
  test.vdd = vdd;
  SndrResult r;
  if (stage.function == StageFunction::linear) {
    r = converter_enob([&](double v) { return (eval.level(v) + 0.5) / levels * vdd; }, test);
  } else {
    // Sine in the log domain t, applied as v = vdd (2^t - 1).
    r = converter_enob(
        [&](double s) {
          const double v = std::clamp(vdd * (std::exp2(s / vdd) - 1.0), 0.0, vdd);
          return (eval.level(v) + 0.5) / levels * vdd;
        },
        test);
  }
  if (sndr_db)
    *sndr_db = r.sndr_db;
  return r.enob;
}

StageMetrics evaluate_stage(const TrainedStage &stage) {
  const StageEvaluator eval(stage);
  const auto &spec = stage.spec;
  StageMetrics m;
  m.subadc_enob = subadc_enob(eval, &m.subadc_sndr_db);
  const auto grid = residue_grid(spec.vdd);
  std::size_t wrong = 0;
  double acc = 0.0, acc_ideal = 0.0;
  for (double v : grid) {
    const auto bits = eval.subadc_bits(v);
    const int level = smooth_decode(bits, spec);
    const int ideal = target_level(v, spec, stage.function);
    wrong += level != ideal;
    if (stage.has_residue) {
      const double r = eval.residue(v, bits);
      const double t = std::clamp(target_residue(v, level, spec, stage.function), 0.0, spec.vdd);
      const double ti = target_residue(v, ideal, spec, stage.function);
      acc += (r - t) * (r - t);
      acc_ideal += (r - ti) * (r - ti);
    }
  }
  const double n = static_cast<double>(grid.size());
  m.level_error_rate = static_cast<double>(wrong) / n;
  m.residue_mse = acc / n;
  m.ideal_residue_mse = acc_ideal / n;
  return m;
}

} // namespace nnadc
