// nnadc: train stages, sweep precision, assemble and measure pipelines,
// explore the design space, export artifacts.

#include "nnadc/dse.hpp"
#include "nnadc/errors.hpp"
#include "nnadc/experiment.hpp"
#include "nnadc/io.hpp"
#include "nnadc/metrics.hpp"
#include "nnadc/pipeline.hpp"
#include "nnadc/trainer.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace nnadc;

namespace {

constexpr const char *tool_version = "nnadc 0.1.0";
constexpr const char *output_dir_env = "NNADC_OUTPUT_DIR";

struct Common {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::optional<unsigned> threads;
};

// "1..3", "1,2,5" or "4".
std::vector<int> parse_list(const std::string &text, const std::string &flag) {
  std::vector<int> out;
  auto fail = [&] { throw ConfigError(flag + ": expected N, A..B or a comma list, got '" + text + "'"); };
  auto to_int = [&](const std::string &s) {
    std::size_t used = 0;
    int v = 0;
    try {
      v = std::stoi(s, &used);
    } catch (...) {
      fail();
    }
    if (used != s.size())
      fail();
    return v;
  };
  if (const auto dots = text.find(".."); dots != std::string::npos) {
    const int a = to_int(text.substr(0, dots));
    const int b = to_int(text.substr(dots + 2));
    if (b < a)
      fail();
    for (int v = a; v <= b; ++v)
      out.push_back(v);
    return out;
  }
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    out.push_back(to_int(text.substr(start, comma - start)));
    if (comma == std::string::npos)
      break;
    start = comma + 1;
  }
  return out;
}

struct Run {
  ExperimentConfig cfg;
  std::string hash;
  fs::path out;
  std::vector<std::string> outputs;

  std::string file(const std::string &name) {
    const auto p = (out / name).string();
    outputs.push_back(p);
    return p;
  }
};

Run load_run(const Common &c) {
  Run r;
  if (!c.config_file.empty())
    r.cfg = load_experiment(c.config_file);
  if (c.seed) {
    // Derived seeds follow the new master seed unless pinned in the file.
    const bool mc_derived = r.cfg.mc.seed == component_seed(r.cfg.master_seed, SeedStream::monte_carlo);
    r.cfg.master_seed = *c.seed;
    if (mc_derived)
      r.cfg.mc.seed = component_seed(r.cfg.master_seed, SeedStream::monte_carlo);
  }
  if (const char *env = std::getenv(output_dir_env); env && *env)
    r.cfg.output_dir = env;
  if (!c.out.empty())
    r.cfg.output_dir = c.out;
  if (c.threads)
    r.cfg.threads = *c.threads;
  r.cfg.validate();
  r.out = r.cfg.output_dir;
  fs::create_directories(r.out);
  return r;
}

void write_manifest(Run &r, const std::string &command, const std::vector<std::string> &argv,
                    const Json &extra = Json::object()) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  Json j = {{"format", "nnadc-manifest"},
            {"schema_version", file_schema_version},
            {"tool", tool_version},
            {"command", command},
            {"argv", argv},
            {"config_hash", r.hash},
            {"config", to_json(r.cfg)},
            {"seeds",
             {{"master", r.cfg.master_seed},
              {"vtc_family", component_seed(r.cfg.master_seed, SeedStream::vtc_family)},
              {"training", component_seed(r.cfg.master_seed, SeedStream::training)},
              {"monte_carlo", r.cfg.mc.seed},
              {"sweep", component_seed(r.cfg.master_seed, SeedStream::sweep)}}},
            {"outputs", r.outputs},
            {"timestamp", stamp}};
  for (const auto &[k, v] : extra.items())
    j[k] = v;
  write_text_file((r.out / (command + ".manifest.json")).string(), j.dump(1) + "\n");
}

void write_stage_metrics(Run &r, const std::string &name, const std::vector<TrainedStage> &stages) {
  CsvWriter csv(r.file(name), {"position", "resolution_bits", "function", "precision_bits", "seed",
                               "subadc_enob", "subadc_sndr_db", "level_error_rate", "residue_mse",
                               "ideal_residue_mse", "config_hash"});
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto &s = stages[i];
    csv << i << s.spec.resolution_bits << to_string(s.function) << s.grid.precision_bits
        << std::to_string(s.seed) << s.metrics.subadc_enob << s.metrics.subadc_sndr_db
        << s.metrics.level_error_rate;
    if (s.has_residue)
      csv << s.metrics.residue_mse << s.metrics.ideal_residue_mse;
    else
      csv << "" << "";
    csv << r.hash;
    csv.end_row();
  }
}

void progress(const std::string &what) { std::cerr << what << std::endl; }

// --- train-stage -----------------------------------------------------------

struct TrainStageArgs {
  int n = 1;
  std::optional<int> ar;
  std::string function = "linear";
  bool terminal = false;
  std::optional<long> iters;
};

void cmd_train_stage(const Common &c, const TrainStageArgs &a, const std::vector<std::string> &argv) {
  Run r = load_run(c);
  if (a.ar)
    r.cfg.grid.precision_bits = *a.ar;
  if (a.iters) {
    r.cfg.train.total_iters = *a.iters;
    if (r.cfg.residue_train)
      r.cfg.residue_train->total_iters = *a.iters;
  }
  r.cfg.composition = {a.n};
  r.cfg.stage_overrides.resize(std::min<std::size_t>(r.cfg.stage_overrides.size(), 1));
  r.cfg.validate();
  r.hash = config_hash(r.cfg);

  StageTrainOptions opts;
  opts.function = stage_function_from_string(a.function);
  opts.has_residue = !a.terminal;
  opts.residue_config = residue_train_config_for(r.cfg, 0);
  auto family = make_family(r.cfg);
  progress("training " + std::to_string(a.n) + "-bit stage, A_R=" +
           std::to_string(r.cfg.grid.precision_bits));
  auto stage = train_stage(stage_spec_for(r.cfg, a.n, 0), family, r.cfg.grid,
                           train_config_for(r.cfg, 0), opts);
  stage.config_hash = r.hash;
  const std::string base = "stage_n" + std::to_string(a.n) + "_ar" +
                           std::to_string(r.cfg.grid.precision_bits) + "_s" +
                           std::to_string(r.cfg.master_seed);
  save_stage(stage, r.file(base + ".json"));
  write_stage_metrics(r, base + "_metrics.csv", {stage});
  write_manifest(r, "train-stage", argv);
  std::cout << "subadc_enob " << format_double(stage.metrics.subadc_enob) << "\n"
            << "residue_mse " << format_double(stage.metrics.residue_mse) << "\n"
            << "model " << (r.out / (base + ".json")).string() << "\n";
}

// --- sweep-precision -------------------------------------------------------

struct SweepArgs {
  std::string n = "1..3";
  std::string ar = "1..7";
  std::string hidden;
  std::optional<int> runs;
  std::optional<double> sigma;
  bool with_residue = false;
  std::optional<long> iters;
};

void cmd_sweep(const Common &c, const SweepArgs &a, const std::vector<std::string> &argv) {
  Run r = load_run(c);
  PrecisionSweepSpec s;
  s.resolutions = parse_list(a.n, "--n");
  s.precisions = parse_list(a.ar, "--ar");
  if (!a.hidden.empty())
    s.hidden = parse_list(a.hidden, "--hidden");
  s.runs = a.runs.value_or(r.cfg.mc.runs);
  s.sigma = a.sigma.value_or(r.cfg.mc.sigma);
  s.with_residue = a.with_residue;
  s.threads = r.cfg.threads;
  if (a.iters) {
    r.cfg.train.total_iters = *a.iters;
    if (r.cfg.residue_train)
      r.cfg.residue_train->total_iters = *a.iters;
  }
  r.cfg.validate();
  r.hash = config_hash(r.cfg);
  progress("sweeping " + std::to_string(s.resolutions.size() * s.precisions.size() *
                                        std::max<std::size_t>(1, s.hidden.size())) +
           " points");
  const auto points = precision_sweep(r.cfg, make_family(r.cfg), s);
  CsvWriter csv(r.file("precision_sweep.csv"),
                {"resolution_bits", "subadc_hidden", "precision_bits", "runs", "sigma",
                 "nominal_enob", "median_enob", "nominal_residue_mse", "median_residue_mse",
                 "seed", "config_hash"});
  for (const auto &p : points) {
    csv << p.resolution << p.hidden << p.precision << s.runs << s.sigma << p.nominal_enob
        << p.median_enob;
    if (s.with_residue)
      csv << p.nominal_residue_mse << p.median_residue_mse;
    else
      csv << "" << "";
    csv << std::to_string(p.seed) << r.hash;
    csv.end_row();
  }
  write_manifest(r, "sweep-precision", argv,
                 {{"sweep", {{"runs", s.runs}, {"sigma", s.sigma}, {"with_residue", s.with_residue}}}});
}

// --- build-pipeline --------------------------------------------------------

struct BuildArgs {
  std::string composition;
  std::string encoding;
  std::vector<std::string> stages;
  std::string name = "pipeline";
  bool force = false;
};

void cmd_build(const Common &c, const BuildArgs &a, const std::vector<std::string> &argv) {
  Run r = load_run(c);
  if (!a.composition.empty())
    r.cfg.composition = parse_list(a.composition, "--composition");
  if (!a.encoding.empty())
    r.cfg.encoding.kind = encoding_kind_from_string(a.encoding);
  PipelineConfig p;
  if (!a.stages.empty()) {
    // Assemble previously trained stages; they must share one config.
    p.enc = r.cfg.encoding;
    for (const auto &f : a.stages)
      p.stages.push_back(load_stage(f));
    r.hash = p.stages.front().config_hash;
    for (std::size_t i = 0; i < p.stages.size(); ++i)
      if (p.stages[i].config_hash != r.hash && !a.force)
        throw ModelReferenceError(a.stages[i] + ": config hash " + p.stages[i].config_hash +
                                  " differs from " + r.hash + " (use --force to combine)");
    // The last stage only needs its sub-ADC.
    p.stages.back().has_residue = false;
    p.stages.back().residue.reset();
    p.validate();
  } else {
    r.cfg.validate();
    r.hash = config_hash(r.cfg);
    const auto family = make_family(r.cfg);
    p = train_pipeline(r.cfg, family, [&](std::size_t i, const TrainedStage &s) {
      progress("stage " + std::to_string(i) + ": residue_mse " +
               format_double(s.metrics.residue_mse) + ", level errors " +
               format_double(s.metrics.level_error_rate));
    });
  }
  const auto file = (r.out / (a.name + ".json")).string();
  for (const auto &w : save_pipeline(p, file, r.hash))
    r.outputs.push_back(w);
  write_stage_metrics(r, a.name + "_stages.csv", p.stages);
  write_manifest(r, "build-pipeline", argv);
  std::cout << "pipeline " << file << "\n";
}

// --- simulate --------------------------------------------------------------

struct SimulateArgs {
  std::string pipeline;
  std::string mode = "behavioral";
  bool force = false;
  std::string sweep_cycles;
};

SimMode sim_mode_from(const std::string &m) {
  if (m == "ideal")
    return SimMode::ideal;
  if (m == "behavioral")
    return SimMode::behavioral;
  throw ConfigError("--mode: expected ideal or behavioral");
}

void export_spectrum(Run &r, const std::string &name, const std::vector<double> &samples,
                     const SineTest &test) {
  const auto sp = spectrum(samples, test.f_s);
  const auto one = sp.one_sided();
  CsvWriter csv(r.file(name), {"bin", "frequency_hz", "power_db", "config_hash"});
  for (std::size_t k = 0; k < one.size(); ++k) {
    csv << k << sp.bin_frequency(k) << (one[k] > 0.0 ? 10.0 * std::log10(one[k]) : -400.0)
        << r.hash;
    csv.end_row();
  }
}

void export_sndr_sweep(Run &r, const std::string &name, const PipelineRunner &runner,
                       SimMode mode, const SineTest &base, const std::vector<int> &cycles) {
  CsvWriter csv(r.file(name), {"cycles", "f_in_hz", "sndr_db", "enob", "config_hash"});
  for (int j : cycles) {
    SineTest t = base;
    t.cycles = static_cast<std::size_t>(j);
    const auto res = pipeline_enob(runner, mode, t);
    csv << j << t.f_in() << res.sndr_db << res.enob << r.hash;
    csv.end_row();
  }
}

void cmd_simulate(const Common &c, const SimulateArgs &a, const std::vector<std::string> &argv) {
  Run r = load_run(c);
  const auto loaded = load_pipeline(a.pipeline, a.force);
  r.hash = loaded.config_hash;
  const auto mode = sim_mode_from(a.mode);
  const PipelineRunner runner(loaded.config);
  const auto test = r.cfg.stimulus;
  const auto samples = pipeline_output(runner, mode, test);
  const auto res = sndr_enob(samples, test.f_s, test.f_in());
  export_spectrum(r, "spectrum.csv", samples, test);
  {
    CsvWriter csv(r.file("enob.csv"),
                  {"mode", "resolution_bits", "sndr_db", "enob", "config_hash"});
    csv << a.mode << loaded.config.resolution() << res.sndr_db << res.enob << r.hash;
    csv.end_row();
  }
  if (!a.sweep_cycles.empty())
    export_sndr_sweep(r, "sndr_sweep.csv", runner, mode, test,
                      parse_list(a.sweep_cycles, "--sweep-cycles"));
  write_manifest(r, "simulate", argv, {{"pipeline", a.pipeline}});
  std::cout << "sndr_db " << format_double(res.sndr_db) << "\nenob " << format_double(res.enob)
            << "\n";
}

// --- mc-eval ---------------------------------------------------------------

struct McArgs {
  std::string pipeline;
  std::optional<int> runs;
  std::optional<double> sigma;
  std::optional<std::uint64_t> mc_seed;
  bool force = false;
};

void cmd_mc(const Common &c, const McArgs &a, const std::vector<std::string> &argv) {
  Run r = load_run(c);
  const auto loaded = load_pipeline(a.pipeline, a.force);
  r.hash = loaded.config_hash;
  McEvalSpec mc = r.cfg.mc;
  if (a.runs)
    mc.runs = *a.runs;
  if (a.sigma)
    mc.sigma = *a.sigma;
  if (a.mc_seed)
    mc.seed = *a.mc_seed;
  const auto s = monte_carlo_eval(loaded.config, mc, r.cfg.stimulus);
  {
    CsvWriter csv(r.file("mc_runs.csv"), {"run", "sigma", "enob", "config_hash"});
    for (std::size_t i = 0; i < s.run_enob.size(); ++i) {
      csv << i << mc.sigma << s.run_enob[i] << r.hash;
      csv.end_row();
    }
  }
  {
    CsvWriter csv(r.file("mc_summary.csv"),
                  {"runs", "sigma", "seed", "nominal_enob", "median_enob", "config_hash"});
    csv << mc.runs << mc.sigma << std::to_string(mc.seed) << s.nominal_enob << s.median_enob
        << r.hash;
    csv.end_row();
  }
  write_manifest(r, "mc-eval", argv, {{"pipeline", a.pipeline}});
  std::cout << "nominal_enob " << format_double(s.nominal_enob) << "\nmedian_enob "
            << format_double(s.median_enob) << "\n";
}

// --- dse -------------------------------------------------------------------

struct DseArgs {
  int reso = 8;
  std::string table;
  std::string enob;
  std::vector<std::string> library;
  std::optional<std::size_t> top;
};

void cmd_dse(const Common &c, const DseArgs &a, const std::vector<std::string> &argv) {
  Run r = load_run(c);
  if (!a.table.empty())
    r.cfg.cost_table = load_cost_table(a.table);
  if (!r.cfg.cost_table)
    throw ConfigError("config.cost_table: missing (pass --table)");
  if (!a.enob.empty())
    r.cfg.enob_source = enob_source_from_string(a.enob);
  r.cfg.validate();
  r.hash = config_hash(r.cfg);

  EnobOracle oracle;
  if (r.cfg.enob_source == EnobSource::simulated) {
    std::map<int, TrainedStage> library;
    for (const auto &f : a.library) {
      auto s = load_stage(f);
      if (!s.has_residue)
        throw ModelReferenceError(f + ": library stages need a residue network");
      library[s.spec.resolution_bits] = std::move(s);
    }
    const auto family = make_family(r.cfg);
    for (int n = 1; n <= 3; ++n) {
      if (library.count(n))
        continue;
      progress("training " + std::to_string(n) + "-bit library stage");
      StageTrainOptions opts;
      opts.residue_config = residue_train_config_for(r.cfg, 0);
      auto s = train_stage(stage_spec_for(r.cfg, n, 0), family, r.cfg.grid,
                           train_config_for(r.cfg, 0), opts);
      s.config_hash = r.hash;
      save_stage(s, r.file("library_n" + std::to_string(n) + ".json"));
      library[n] = std::move(s);
    }
    oracle = simulated_enob_oracle(std::move(library), r.cfg.encoding, r.cfg.stimulus);
  }
  const auto ranked = optimize(a.reso, *r.cfg.cost_table, r.cfg.enob_source, oracle, r.cfg.threads);
  CsvWriter csv(r.file("dse_ranked.csv"),
                {"rank", "composition", "stages", "power_w", "rate_sps", "area_mm2", "enob",
                 "fom_j_per_step", "operating_points", "config_hash"});
  const std::size_t n = a.top ? std::min(*a.top, ranked.size()) : ranked.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto &d = ranked[i];
    std::string comp, pts;
    for (std::size_t k = 0; k < d.composition.size(); ++k) {
      comp += (k ? "-" : "") + std::to_string(d.composition[k]);
      pts += (k ? "-" : "") + std::to_string(d.operating_points[k]);
    }
    csv << i + 1 << comp << d.composition.size() << d.power_w << d.rate_sps << d.area_mm2 << d.enob
        << d.fom_j << pts << r.hash;
    csv.end_row();
  }
  write_manifest(r, "dse", argv, {{"reso", a.reso}, {"enob_source", to_string(r.cfg.enob_source)}});
  const auto &w = ranked.front();
  std::string comp;
  for (std::size_t k = 0; k < w.composition.size(); ++k)
    comp += (k ? "-" : "") + std::to_string(w.composition[k]);
  std::cout << "winner " << comp << "\nfom_fj " << format_double(w.fom_j * 1e15) << "\n";
}

// --- export ----------------------------------------------------------------

struct ExportArgs {
  std::string stage;
  std::string pipeline;
  std::string what = "conductances";
  std::string mode = "behavioral";
  std::string cycles = "1,3,7,15,31,63,127,255,511,1023,2047";
  bool force = false;
};

void export_conductances(Run &r, const std::vector<TrainedStage> &stages) {
  CsvWriter csv(r.file("conductances.csv"),
                {"stage", "network", "layer", "row", "col", "g_upper_s", "g_lower_s", "weight",
                 "config_hash"});
  for (std::size_t i = 0; i < stages.size(); ++i) {
    auto dump = [&](const char *net, const CrossbarNetwork &n) {
      int li = 1;
      for (const auto *layer : {&n.layer1, &n.layer2}) {
        const auto w = weights_from_conductances(*layer);
        for (std::size_t row = 0; row < layer->rows(); ++row)
          for (std::size_t col = 0; col < layer->cols(); ++col) {
            const auto &p = layer->pair(row, col);
            csv << i << net << li << row << col << p.upper << p.lower << w.weights(row, col)
                << r.hash;
            csv.end_row();
          }
        ++li;
      }
    };
    if (stages[i].subadc)
      dump("subadc", *stages[i].subadc);
    if (stages[i].residue)
      dump("residue", *stages[i].residue);
  }
}

void export_transfer(Run &r, const std::vector<TrainedStage> &stages) {
  CsvWriter csv(r.file("transfer.csv"), {"stage", "v", "level", "ideal_level", "residue",
                                         "target_residue", "config_hash"});
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto &s = stages[i];
    const StageEvaluator eval(s);
    for (double v : residue_grid(s.spec.vdd)) {
      const auto o = eval.convert(v, s.has_residue);
      csv << i << v << o.level << target_level(v, s.spec, s.function);
      if (s.has_residue)
        csv << o.residue
            << std::clamp(target_residue(v, o.level, s.spec, s.function), 0.0, s.spec.vdd);
      else
        csv << "" << "";
      csv << r.hash;
      csv.end_row();
    }
  }
}

void cmd_export(const Common &c, const ExportArgs &a, const std::vector<std::string> &argv) {
  Run r = load_run(c);
  if (a.stage.empty() == a.pipeline.empty())
    throw ConfigError("export: pass exactly one of --stage or --pipeline");
  std::vector<TrainedStage> stages;
  std::optional<LoadedPipeline> loaded;
  if (!a.stage.empty()) {
    stages.push_back(load_stage(a.stage));
    r.hash = stages.front().config_hash;
  } else {
    loaded = load_pipeline(a.pipeline, a.force);
    stages = loaded->config.stages;
    r.hash = loaded->config_hash;
  }
  if (a.what == "conductances") {
    export_conductances(r, stages);
  } else if (a.what == "transfer") {
    export_transfer(r, stages);
  } else if (a.what == "spectrum" || a.what == "sndr-sweep") {
    if (!loaded)
      throw ConfigError("export: " + a.what + " needs --pipeline");
    const PipelineRunner runner(loaded->config);
    const auto mode = sim_mode_from(a.mode);
    if (a.what == "spectrum")
      export_spectrum(r, "spectrum.csv", pipeline_output(runner, mode, r.cfg.stimulus),
                      r.cfg.stimulus);
    else
      export_sndr_sweep(r, "sndr_sweep.csv", runner, mode, r.cfg.stimulus,
                        parse_list(a.cycles, "--cycles"));
  } else {
    throw ConfigError("export: --what must be conductances, transfer, spectrum or sndr-sweep");
  }
  write_manifest(r, "export", argv, {{"what", a.what}});
}

int exit_code_for(const std::exception_ptr &e) {
  try {
    std::rethrow_exception(e);
  } catch (const TrainingError &err) {
    std::cerr << "training diverged: " << err.what() << "\n";
    return 3;
  } catch (const ModelReferenceError &err) {
    std::cerr << "model reference error: " << err.what() << "\n";
    return 4;
  } catch (const ConfigError &err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const Error &err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const Json::exception &err) {
    std::cerr << "config error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception &err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Neural-network pipelined ADC toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", tool_version);
  const std::vector<std::string> args(argv, argv + argc);

  Common common;
  auto add_common = [&](CLI::App *sub) {
    sub->add_option("--config", common.config_file, "Experiment config (JSON)")
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", common.seed, "Master seed");
    sub->add_option("--out", common.out,
                    std::string("Output directory (overrides $") + output_dir_env + ")");
    sub->add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  };

  TrainStageArgs ts;
  auto *train = app.add_subcommand("train-stage", "Train one stage's sub-ADC and residue networks");
  add_common(train);
  train->add_option("--n", ts.n, "Stage resolution")->check(CLI::Range(1, 3));
  train->add_option("--ar", ts.ar, "RRAM precision bits")->check(CLI::Range(1, 7));
  train->add_option("--function", ts.function, "linear or logarithmic")
      ->check(CLI::IsMember({"linear", "logarithmic"}));
  train->add_flag("--terminal", ts.terminal, "Sub-ADC only (last pipeline stage)");
  train->add_option("--iters", ts.iters, "Override total training iterations");

  SweepArgs sw;
  auto *sweep = app.add_subcommand("sweep-precision", "Sub-ADC ENOB versus RRAM precision");
  add_common(sweep);
  sweep->add_option("--n", sw.n, "Stage resolutions, e.g. 1..3");
  sweep->add_option("--ar", sw.ar, "Precisions, e.g. 1..7");
  sweep->add_option("--hidden", sw.hidden, "Sub-ADC hidden sizes, e.g. 3,5,8");
  sweep->add_option("--runs", sw.runs, "Monte Carlo runs per point")->check(CLI::PositiveNumber);
  sweep->add_option("--sigma", sw.sigma, "Resistance perturbation sigma");
  sweep->add_flag("--with-residue", sw.with_residue, "Also train and measure residue networks");
  sweep->add_option("--iters", sw.iters, "Override total training iterations");

  BuildArgs bp;
  auto *build = app.add_subcommand("build-pipeline", "Train or assemble a pipeline");
  add_common(build);
  build->add_option("--composition", bp.composition, "Stage resolutions, e.g. 1,1,2");
  build->add_option("--encoding", bp.encoding, "linear or logarithmic")
      ->check(CLI::IsMember({"linear", "logarithmic"}));
  build->add_option("--stages", bp.stages, "Existing stage model files, MSB first")
      ->delimiter(',');
  build->add_option("--name", bp.name, "Pipeline file stem");
  build->add_flag("--force", bp.force, "Accept stages with differing config hashes");

  SimulateArgs sim;
  auto *simulate = app.add_subcommand("simulate", "Measure a pipeline on a coherent sine");
  add_common(simulate);
  simulate->add_option("--pipeline", sim.pipeline, "Pipeline file")->required();
  simulate->add_option("--mode", sim.mode, "ideal or behavioral")
      ->check(CLI::IsMember({"ideal", "behavioral"}));
  simulate->add_flag("--force", sim.force, "Ignore stage/pipeline hash mismatches");
  simulate->add_option("--sweep-cycles", sim.sweep_cycles,
                       "Also write SNDR versus input frequency for these cycle counts");

  McArgs mc;
  auto *mceval = app.add_subcommand("mc-eval", "Median ENOB under resistance perturbation");
  add_common(mceval);
  mceval->add_option("--pipeline", mc.pipeline, "Pipeline file")->required();
  mceval->add_option("--runs", mc.runs, "Monte Carlo runs")->check(CLI::PositiveNumber);
  mceval->add_option("--sigma", mc.sigma, "Perturbation sigma");
  mceval->add_option("--mc-seed", mc.mc_seed, "Monte Carlo seed");
  mceval->add_flag("--force", mc.force, "Ignore stage/pipeline hash mismatches");

  DseArgs ds;
  auto *dse = app.add_subcommand("dse", "Rank pipeline compositions by FoM and area");
  add_common(dse);
  dse->add_option("--reso", ds.reso, "Pipeline resolution")->check(CLI::Range(1, max_dse_resolution));
  dse->add_option("--table", ds.table, "Cost table file")->check(CLI::ExistingFile);
  dse->add_option("--enob", ds.enob, "assumed or simulated")
      ->check(CLI::IsMember({"assumed", "simulated"}));
  dse->add_option("--library", ds.library, "Trained stage files used for simulated ENOB")
      ->delimiter(',');
  dse->add_option("--top", ds.top, "Rows to write");

  ExportArgs ex;
  auto *exp = app.add_subcommand("export", "Write CSV views of stages and pipelines");
  add_common(exp);
  exp->add_option("--stage", ex.stage, "Stage model file");
  exp->add_option("--pipeline", ex.pipeline, "Pipeline file");
  exp->add_option("--what", ex.what, "conductances, transfer, spectrum or sndr-sweep");
  exp->add_option("--mode", ex.mode, "ideal or behavioral");
  exp->add_option("--cycles", ex.cycles, "Cycle counts for sndr-sweep");
  exp->add_flag("--force", ex.force, "Ignore stage/pipeline hash mismatches");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*train)
      cmd_train_stage(common, ts, args);
    else if (*sweep)
      cmd_sweep(common, sw, args);
    else if (*build)
      cmd_build(common, bp, args);
    else if (*simulate)
      cmd_simulate(common, sim, args);
    else if (*mceval)
      cmd_mc(common, mc, args);
    else if (*dse)
      cmd_dse(common, ds, args);
    else if (*exp)
      cmd_export(common, ex, args);
  } catch (...) {
    return exit_code_for(std::current_exception());
  }
  return 0;
}
