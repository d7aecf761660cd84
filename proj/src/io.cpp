#include "nnadc/io.hpp"

#include "nnadc/errors.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <set>
#include <sstream>

namespace nnadc {

namespace fs = std::filesystem;

std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string json_hash(const Json &j) { return fnv1a64_hex(j.dump()); }

namespace {

std::string slurp(const std::string &path, bool &ok) {
  std::ifstream in(path, std::ios::binary);
  ok = static_cast<bool>(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Typed field access that reports the schema path of a fault.
class Fields {
public:
  Fields(const Json &j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object())
      throw ConfigError(path_ + ": expected an object");
  }

  /// Rejects keys outside `allowed` so typos do not pass silently.
  void only(std::initializer_list<const char *> allowed) const {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto &[k, v] : j_.items())
      if (!ok.count(k))
        throw ConfigError(at(k) + ": unknown key");
  }

  bool has(const char *key) const { return j_.contains(key); }
  const Json &raw(const char *key) const { return j_.at(key); }
  std::string at(const std::string &key) const { return path_ + "." + key; }
  const std::string &path() const noexcept { return path_; }

  double num(const char *key, double def) const {
    if (!has(key))
      return def;
    const auto &v = j_.at(key);
    if (!v.is_number())
      throw ConfigError(at(key) + ": expected a number");
    return v.get<double>();
  }

  double positive(const char *key, double def) const {
    const double v = num(key, def);
    if (!(v > 0.0) || !std::isfinite(v))
      throw ConfigError(at(key) + ": must be positive");
    return v;
  }

  long long integer(const char *key, long long def, long long lo) const {
    if (!has(key))
      return def;
    const auto &v = j_.at(key);
    if (!v.is_number_integer())
      throw ConfigError(at(key) + ": expected an integer");
    const auto x = v.get<long long>();
    if (x < lo)
      throw ConfigError(at(key) + ": must be >= " + std::to_string(lo));
    return x;
  }

  std::uint64_t seed(const char *key, std::uint64_t def) const {
    if (!has(key))
      return def;
    const auto &v = j_.at(key);
    if (!v.is_number_unsigned())
      throw ConfigError(at(key) + ": expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string str(const char *key, const std::string &def) const {
    if (!has(key))
      return def;
    const auto &v = j_.at(key);
    if (!v.is_string())
      throw ConfigError(at(key) + ": expected a string");
    return v.get<std::string>();
  }

  Fields sub(const char *key) const { return Fields(j_.at(key), at(key)); }

private:
  const Json &j_;
  std::string path_;
};

template <class F> auto rethrow_at(const std::string &path, F &&f) {
  try {
    return f();
  } catch (const ConfigError &e) {
    const std::string what = e.what();
    if (what.rfind(path, 0) == 0)
      throw;
    throw ConfigError(path + ": " + what);
  }
}

Json grid_json(const DeviceGrid &g) {
  return {{"g_off", g.g_off}, {"g_on", g.g_on}, {"precision_bits", g.precision_bits}};
}

DeviceGrid grid_from(const Fields &f) {
  f.only({"g_off", "g_on", "precision_bits"});
  DeviceGrid g;
  g.g_off = f.positive("g_off", g.g_off);
  g.g_on = f.positive("g_on", g.g_on);
  g.precision_bits = static_cast<int>(f.integer("precision_bits", g.precision_bits, 1));
  rethrow_at(f.path(), [&] {
    g.validate();
    return 0;
  });
  return g;
}

Json vtc_json(const VtcParams &p) { return Json::array({p.v_m, p.s, p.v_high, p.v_low}); }

VtcParams vtc_from(const Json &j, const std::string &path) {
  if (!j.is_array() || j.size() != 4)
    throw ModelReferenceError(path + ": expected [v_m, s, v_high, v_low]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>(), j[3].get<double>()};
}

Json layer_json(const CrossbarLayer &l) {
  Json upper = Json::array(), lower = Json::array();
  for (const auto &p : l.pairs()) {
    upper.push_back(p.upper);
    lower.push_back(p.lower);
  }
  return {{"rows", l.rows()},       {"cols", l.cols()},        {"bias_voltage", l.bias_voltage()},
          {"grid", grid_json(l.grid())}, {"upper_s", upper}, {"lower_s", lower}};
}

CrossbarLayer layer_from(const Json &j, const std::string &path) {
  const auto rows = j.at("rows").get<std::size_t>();
  const auto cols = j.at("cols").get<std::size_t>();
  const auto &upper = j.at("upper_s");
  const auto &lower = j.at("lower_s");
  if (upper.size() != rows * cols || lower.size() != rows * cols)
    throw ModelReferenceError(path + ": conductance count does not match rows x cols");
  const DeviceGrid grid = grid_from(Fields(j.at("grid"), path + ".grid"));
  CrossbarLayer l(rows, cols, grid, j.at("bias_voltage").get<double>());
  auto pairs = l.pairs();
  for (std::size_t k = 0; k < pairs.size(); ++k)
    pairs[k] = {upper[k].get<double>(), lower[k].get<double>()};
  return l;
}

Json network_json(const CrossbarNetwork &n) {
  return {{"layer1", layer_json(n.layer1)},
          {"layer2", layer_json(n.layer2)},
          {"vtc_assignment", n.vtc_assignment}};
}

CrossbarNetwork network_from(const Json &j, const std::string &path) {
  CrossbarNetwork n;
  n.layer1 = layer_from(j.at("layer1"), path + ".layer1");
  n.layer2 = layer_from(j.at("layer2"), path + ".layer2");
  n.vtc_assignment = j.at("vtc_assignment").get<std::vector<std::size_t>>();
  if (n.vtc_assignment.size() != n.layer1.cols() || n.layer2.rows() != n.layer1.cols() + 1)
    throw ModelReferenceError(path + ": layer shapes are inconsistent");
  return n;
}

Json spec_json(const StageSpec &s) {
  Json table = Json::array();
  for (const auto &code : s.code_table)
    table.push_back(code);
  return {{"resolution_bits", s.resolution_bits}, {"smooth_width", s.smooth_width},
          {"subadc_hidden", s.subadc_hidden},     {"residue_hidden", s.residue_hidden},
          {"vdd", s.vdd},                         {"residue_gain", s.residue_gain},
          {"code_table", table}};
}

StageSpec spec_from(const Json &j) {
  StageSpec s;
  s.resolution_bits = j.at("resolution_bits").get<int>();
  s.smooth_width = j.at("smooth_width").get<int>();
  s.subadc_hidden = j.at("subadc_hidden").get<int>();
  s.residue_hidden = j.at("residue_hidden").get<int>();
  s.vdd = j.at("vdd").get<double>();
  s.residue_gain = j.at("residue_gain").get<double>();
  s.code_table = j.at("code_table").get<std::vector<Bits>>();
  return s;
}

Json metrics_json(const StageMetrics &m) {
  return {{"subadc_enob", m.subadc_enob},
          {"subadc_sndr_db", m.subadc_sndr_db},
          {"level_error_rate", m.level_error_rate},
          {"residue_mse", m.residue_mse},
          {"ideal_residue_mse", m.ideal_residue_mse}};
}

StageMetrics metrics_from(const Json &j) {
  StageMetrics m;
  m.subadc_enob = j.at("subadc_enob").get<double>();
  m.subadc_sndr_db = j.at("subadc_sndr_db").get<double>();
  m.level_error_rate = j.at("level_error_rate").get<double>();
  m.residue_mse = j.at("residue_mse").get<double>();
  m.ideal_residue_mse = j.at("ideal_residue_mse").get<double>();
  return m;
}

void expect_format(const Json &j, const char *format, const std::string &origin) {
  if (!j.is_object() || j.value("format", "") != format)
    throw ModelReferenceError(origin + ": not a " + std::string(format) + " file");
  if (j.value("schema_version", -1) != file_schema_version)
    throw ModelReferenceError(origin + ": unsupported schema version");
}

} // namespace

Json read_config_json(const std::string &path) {
  bool ok = false;
  const auto text = slurp(path, ok);
  if (!ok)
    throw ConfigError(path + ": cannot read file");
  try {
    return Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw ConfigError(path + ": " + e.what());
  }
}

Json read_model_json(const std::string &path) {
  bool ok = false;
  const auto text = slurp(path, ok);
  if (!ok)
    throw ModelReferenceError(path + ": cannot read file");
  try {
    return Json::parse(text);
  } catch (const Json::parse_error &e) {
    throw ModelReferenceError(path + ": " + e.what());
  }
}

void write_text_file(const std::string &path, const std::string &text) {
  const fs::path p(path);
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out)
    throw Error(path + ": write failed");
}

TrainConfig train_config_from_json(const Json &j, const std::string &path,
                                   const TrainConfig &base) {
  const Fields f(j, path);
  f.only({"batch_size", "total_iters", "projection_period", "lr_start", "lr_end", "adam",
          "vtc_policy", "surrogate_start", "surrogate_end", "restarts", "polish_sweeps",
          "unit_sweeps", "unit_max_shapes", "anneal_moves", "anneal_t_start", "anneal_t_end",
          "anneal_restarts", "validation_draws"});
  TrainConfig c = base;
  c.batch_size = static_cast<std::size_t>(f.integer("batch_size", c.batch_size, 1));
  c.total_iters = f.integer("total_iters", c.total_iters, 1);
  c.projection_period = f.integer("projection_period", c.projection_period, 1);
  c.lr_start = f.positive("lr_start", c.lr_start);
  c.lr_end = f.positive("lr_end", c.lr_end);
  if (f.has("adam")) {
    const auto a = f.sub("adam");
    a.only({"beta1", "beta2", "eps"});
    c.adam.beta1 = a.num("beta1", c.adam.beta1);
    c.adam.beta2 = a.num("beta2", c.adam.beta2);
    c.adam.eps = a.positive("eps", c.adam.eps);
  }
  if (f.has("vtc_policy"))
    c.vtc_policy = rethrow_at(f.at("vtc_policy"),
                              [&] { return vtc_policy_from_string(f.str("vtc_policy", "")); });
  c.surrogate_start = f.positive("surrogate_start", c.surrogate_start);
  c.surrogate_end = f.positive("surrogate_end", c.surrogate_end);
  c.restarts = static_cast<int>(f.integer("restarts", c.restarts, 1));
  c.polish_sweeps = static_cast<int>(f.integer("polish_sweeps", c.polish_sweeps, 0));
  c.unit_sweeps = static_cast<int>(f.integer("unit_sweeps", c.unit_sweeps, 0));
  c.unit_max_shapes = static_cast<std::size_t>(f.integer("unit_max_shapes", c.unit_max_shapes, 1));
  c.anneal_moves = f.integer("anneal_moves", c.anneal_moves, 0);
  c.anneal_t_start = f.positive("anneal_t_start", c.anneal_t_start);
  c.anneal_t_end = f.positive("anneal_t_end", c.anneal_t_end);
  c.anneal_restarts = static_cast<int>(f.integer("anneal_restarts", c.anneal_restarts, 1));
  c.validation_draws =
      static_cast<std::size_t>(f.integer("validation_draws", c.validation_draws, 1));
  rethrow_at(path, [&] {
    c.validate();
    return 0;
  });
  return c;
}

Json to_json(const TrainConfig &c, bool with_identity) {
  Json j = {{"batch_size", c.batch_size},
            {"total_iters", c.total_iters},
            {"projection_period", c.projection_period},
            {"lr_start", c.lr_start},
            {"lr_end", c.lr_end},
            {"adam", {{"beta1", c.adam.beta1}, {"beta2", c.adam.beta2}, {"eps", c.adam.eps}}},
            {"vtc_policy", to_string(c.vtc_policy)},
            {"surrogate_start", c.surrogate_start},
            {"surrogate_end", c.surrogate_end},
            {"restarts", c.restarts},
            {"polish_sweeps", c.polish_sweeps},
            {"unit_sweeps", c.unit_sweeps},
            {"unit_max_shapes", c.unit_max_shapes},
            {"anneal_moves", c.anneal_moves},
            {"anneal_t_start", c.anneal_t_start},
            {"anneal_t_end", c.anneal_t_end},
            {"anneal_restarts", c.anneal_restarts},
            {"validation_draws", c.validation_draws}};
  if (with_identity) {
    j["seed"] = c.seed;
    j["precision_bits"] = c.precision_bits;
  }
  return j;
}

CostTable cost_table_from_json(const Json &j, const std::string &path) {
  const Fields f(j, path);
  f.only({"format", "schema_version", "stages"});
  if (f.has("schema_version") && f.integer("schema_version", 0, 0) != file_schema_version)
    throw ConfigError(f.at("schema_version") + ": unsupported version");
  if (!f.has("stages"))
    throw ConfigError(f.at("stages") + ": missing");
  const auto stages = f.sub("stages");
  CostTable t;
  for (const auto &[key, pts] : f.raw("stages").items()) {
    const std::string at = stages.at(key);
    int bits = 0;
    const auto r = std::from_chars(key.data(), key.data() + key.size(), bits);
    if (r.ec != std::errc() || r.ptr != key.data() + key.size() || bits < 1 || bits > 3)
      throw ConfigError(at + ": stage resolution must be 1, 2 or 3");
    const Json list = pts.is_array() ? pts : Json::array({pts});
    auto &out = t.entries[bits];
    for (std::size_t k = 0; k < list.size(); ++k) {
      const Fields p(list[k], at + "[" + std::to_string(k) + "]");
      p.only({"power_w", "rate_sps", "area_mm2"});
      for (const char *need : {"power_w", "rate_sps", "area_mm2"})
        if (!p.has(need))
          throw ConfigError(p.at(need) + ": missing");
      out.push_back({p.positive("power_w", 0), p.positive("rate_sps", 0), p.positive("area_mm2", 0)});
    }
    if (out.empty())
      throw ConfigError(at + ": no operating points");
  }
  rethrow_at(path, [&] {
    t.validate();
    return 0;
  });
  return t;
}

Json to_json(const CostTable &t) {
  Json stages = Json::object();
  for (const auto &[bits, pts] : t.entries) {
    Json list = Json::array();
    for (const auto &p : pts)
      list.push_back({{"power_w", p.power_w}, {"rate_sps", p.rate_sps}, {"area_mm2", p.area_mm2}});
    stages[std::to_string(bits)] = list;
  }
  return {{"format", "nnadc-cost-table"}, {"schema_version", file_schema_version}, {"stages", stages}};
}

CostTable load_cost_table(const std::string &file) {
  return cost_table_from_json(read_config_json(file), file);
}

ExperimentConfig experiment_from_json(const Json &j, const std::string &base_dir) {
  const Fields f(j, "config");
  f.only({"schema_version", "vdd", "master_seed", "output_dir", "threads", "grid", "vtc", "train",
          "residue_train", "shapes", "pipeline", "stimulus", "mc", "cost_table", "enob_source"});
  if (f.integer("schema_version", experiment_schema_version, 0) != experiment_schema_version)
    throw ConfigError(f.at("schema_version") + ": unsupported version");
  ExperimentConfig c;
  c.vdd = f.positive("vdd", c.vdd);
  c.master_seed = f.seed("master_seed", c.master_seed);
  c.output_dir = f.str("output_dir", c.output_dir);
  c.threads = static_cast<unsigned>(f.integer("threads", c.threads, 1));
  if (f.has("grid"))
    c.grid = grid_from(f.sub("grid"));
  if (f.has("vtc")) {
    const auto v = f.sub("vtc");
    v.only({"size", "midpoint_fraction", "sigma_vm_fraction", "sigma_s_rel"});
    c.vtc.size = static_cast<std::size_t>(v.integer("size", c.vtc.size, 1));
    c.vtc.midpoint_fraction = v.positive("midpoint_fraction", c.vtc.midpoint_fraction);
    c.vtc.sigma_vm_fraction = v.num("sigma_vm_fraction", c.vtc.sigma_vm_fraction);
    c.vtc.sigma_s_rel = v.num("sigma_s_rel", c.vtc.sigma_s_rel);
  }
  if (f.has("train"))
    c.train = train_config_from_json(f.raw("train"), f.at("train"), c.train);
  if (f.has("residue_train"))
    c.residue_train = train_config_from_json(f.raw("residue_train"), f.at("residue_train"), c.train);
  if (f.has("shapes")) {
    const auto s = f.sub("shapes");
    for (const auto &[key, val] : f.raw("shapes").items()) {
      int bits = 0;
      std::from_chars(key.data(), key.data() + key.size(), bits);
      if (bits < 1 || bits > 3)
        throw ConfigError(s.at(key) + ": stage resolution must be 1, 2 or 3");
      const Fields e(val, s.at(key));
      e.only({"subadc_hidden", "residue_hidden", "residue_gain"});
      StageShape shape = shape_for(c, bits);
      shape.subadc_hidden = static_cast<int>(e.integer("subadc_hidden", shape.subadc_hidden, 1));
      shape.residue_hidden = static_cast<int>(e.integer("residue_hidden", shape.residue_hidden, 1));
      shape.residue_gain = e.positive("residue_gain", shape.residue_gain);
      c.shapes[bits] = shape;
    }
  }
  if (f.has("pipeline")) {
    const auto p = f.sub("pipeline");
    p.only({"composition", "encoding", "v_min", "v_max", "stages"});
    if (p.has("composition")) {
      const auto &comp = p.raw("composition");
      if (!comp.is_array() || comp.empty())
        throw ConfigError(p.at("composition") + ": expected a non-empty list");
      c.composition.clear();
      for (const auto &n : comp) {
        if (!n.is_number_integer() || n.get<int>() < 1 || n.get<int>() > 3)
          throw ConfigError(p.at("composition") + ": parts must be 1, 2 or 3");
        c.composition.push_back(n.get<int>());
      }
    }
    if (p.has("encoding"))
      c.encoding.kind = rethrow_at(p.at("encoding"), [&] {
        return encoding_kind_from_string(p.str("encoding", ""));
      });
    c.encoding.v_min = p.num("v_min", c.encoding.v_min);
    c.encoding.v_max = p.num("v_max", c.encoding.v_max);
    if (p.has("stages")) {
      const auto &list = p.raw("stages");
      if (!list.is_array())
        throw ConfigError(p.at("stages") + ": expected a list");
      for (std::size_t k = 0; k < list.size(); ++k) {
        const Fields o(list[k], p.at("stages") + "[" + std::to_string(k) + "]");
        o.only({"subadc_hidden", "residue_hidden", "train", "residue_train"});
        StageOverride so;
        if (o.has("subadc_hidden"))
          so.subadc_hidden = static_cast<int>(o.integer("subadc_hidden", 0, 1));
        if (o.has("residue_hidden"))
          so.residue_hidden = static_cast<int>(o.integer("residue_hidden", 0, 1));
        if (o.has("train"))
          so.train = train_config_from_json(o.raw("train"), o.at("train"), c.train);
        if (o.has("residue_train")) {
          const TrainConfig &base = c.residue_train ? *c.residue_train : so.train ? *so.train : c.train;
          so.residue_train = train_config_from_json(o.raw("residue_train"), o.at("residue_train"), base);
        }
        c.stage_overrides.push_back(so);
      }
    }
  }
  if (f.has("stimulus")) {
    const auto s = f.sub("stimulus");
    s.only({"n", "cycles", "amplitude_fraction"});
    c.stimulus.n = static_cast<std::size_t>(s.integer("n", c.stimulus.n, 2));
    c.stimulus.cycles = static_cast<std::size_t>(s.integer("cycles", c.stimulus.cycles, 1));
    c.stimulus.amplitude_fraction = s.positive("amplitude_fraction", c.stimulus.amplitude_fraction);
  }
  if (f.has("mc")) {
    const auto m = f.sub("mc");
    m.only({"runs", "sigma", "seed"});
    c.mc.runs = static_cast<int>(m.integer("runs", c.mc.runs, 1));
    c.mc.sigma = m.num("sigma", c.mc.sigma);
    c.mc.seed = m.seed("seed", component_seed(c.master_seed, SeedStream::monte_carlo));
  } else {
    c.mc.seed = component_seed(c.master_seed, SeedStream::monte_carlo);
  }
  if (f.has("cost_table")) {
    const auto &t = f.raw("cost_table");
    if (t.is_string()) {
      fs::path file = t.get<std::string>();
      if (file.is_relative())
        file = fs::path(base_dir) / file;
      c.cost_table = cost_table_from_json(read_config_json(file.string()), f.at("cost_table"));
    } else {
      c.cost_table = cost_table_from_json(t, f.at("cost_table"));
    }
  }
  if (f.has("enob_source"))
    c.enob_source = rethrow_at(f.at("enob_source"),
                               [&] { return enob_source_from_string(f.str("enob_source", "")); });
  rethrow_at("config", [&] {
    c.validate();
    return 0;
  });
  return c;
}

Json to_json(const ExperimentConfig &c) {
  Json shapes = Json::object();
  for (const auto &[bits, s] : c.shapes)
    shapes[std::to_string(bits)] = {{"subadc_hidden", s.subadc_hidden},
                                    {"residue_hidden", s.residue_hidden},
                                    {"residue_gain", s.residue_gain}};
  Json overrides = Json::array();
  for (const auto &o : c.stage_overrides) {
    Json e = Json::object();
    if (o.subadc_hidden)
      e["subadc_hidden"] = *o.subadc_hidden;
    if (o.residue_hidden)
      e["residue_hidden"] = *o.residue_hidden;
    if (o.train)
      e["train"] = to_json(*o.train);
    if (o.residue_train)
      e["residue_train"] = to_json(*o.residue_train);
    overrides.push_back(e);
  }
  Json j = {
      {"schema_version", experiment_schema_version},
      {"vdd", c.vdd},
      {"master_seed", c.master_seed},
      {"output_dir", c.output_dir},
      {"threads", c.threads},
      {"grid", grid_json(c.grid)},
      {"vtc",
       {{"size", c.vtc.size},
        {"midpoint_fraction", c.vtc.midpoint_fraction},
        {"sigma_vm_fraction", c.vtc.sigma_vm_fraction},
        {"sigma_s_rel", c.vtc.sigma_s_rel}}},
      {"train", to_json(c.train)},
      {"shapes", shapes},
      {"pipeline",
       {{"composition", c.composition},
        {"encoding", to_string(c.encoding.kind)},
        {"v_min", c.encoding.v_min},
        {"v_max", c.encoding.v_max},
        {"stages", overrides}}},
      {"stimulus",
       {{"n", c.stimulus.n},
        {"cycles", c.stimulus.cycles},
        {"amplitude_fraction", c.stimulus.amplitude_fraction}}},
      {"mc", {{"runs", c.mc.runs}, {"sigma", c.mc.sigma}, {"seed", c.mc.seed}}},
      {"enob_source", to_string(c.enob_source)},
  };
  if (c.residue_train)
    j["residue_train"] = to_json(*c.residue_train);
  if (c.cost_table)
    j["cost_table"] = to_json(*c.cost_table);
  return j;
}

ExperimentConfig load_experiment(const std::string &file) {
  const auto dir = fs::path(file).parent_path();
  return experiment_from_json(read_config_json(file), dir.empty() ? "." : dir.string());
}

std::string config_hash(const ExperimentConfig &cfg) {
  // Threads and output placement do not change results.
  Json j = to_json(cfg);
  j.erase("threads");
  j.erase("output_dir");
  return json_hash(j);
}

Json to_json(const TrainedStage &s) {
  Json j = {{"format", "nnadc-stage"},
            {"schema_version", file_schema_version},
            {"config_hash", s.config_hash},
            {"seed", s.seed},
            {"function", to_string(s.function)},
            {"ideal", s.ideal},
            {"has_residue", s.has_residue},
            {"spec", spec_json(s.spec)},
            {"grid", grid_json(s.grid)},
            {"metrics", metrics_json(s.metrics)}};
  if (s.family) {
    Json members = Json::array();
    for (const auto &m : s.family->members)
      members.push_back(vtc_json(m));
    const auto &v = s.family->variation;
    j["vtc_family"] = {{"seed", s.family->seed},
                       {"variation",
                        {{"nominal", vtc_json(v.nominal)},
                         {"sigma_vm", v.sigma_vm},
                         {"sigma_s_rel", v.sigma_s_rel}}},
                       {"members", members}};
  }
  if (s.subadc)
    j["subadc"] = network_json(*s.subadc);
  if (s.residue)
    j["residue"] = network_json(*s.residue);
  return j;
}

TrainedStage stage_from_json(const Json &j, const std::string &origin) {
  expect_format(j, "nnadc-stage", origin);
  try {
    TrainedStage s;
    s.config_hash = j.at("config_hash").get<std::string>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.function = stage_function_from_string(j.at("function").get<std::string>());
    s.ideal = j.at("ideal").get<bool>();
    s.has_residue = j.at("has_residue").get<bool>();
    s.spec = spec_from(j.at("spec"));
    s.spec.validate();
    s.grid = grid_from(Fields(j.at("grid"), origin + ".grid"));
    s.metrics = metrics_from(j.at("metrics"));
    if (j.contains("vtc_family")) {
      const auto &fj = j.at("vtc_family");
      auto fam = std::make_shared<VtcFamily>();
      fam->seed = fj.at("seed").get<std::uint64_t>();
      const auto &vj = fj.at("variation");
      fam->variation.nominal = vtc_from(vj.at("nominal"), origin + ".vtc_family.variation");
      fam->variation.sigma_vm = vj.at("sigma_vm").get<double>();
      fam->variation.sigma_s_rel = vj.at("sigma_s_rel").get<double>();
      for (const auto &m : fj.at("members"))
        fam->members.push_back(vtc_from(m, origin + ".vtc_family.members"));
      s.family = std::move(fam);
    }
    if (j.contains("subadc"))
      s.subadc = network_from(j.at("subadc"), origin + ".subadc");
    if (j.contains("residue"))
      s.residue = network_from(j.at("residue"), origin + ".residue");
    if (!s.ideal && (!s.subadc || !s.family || (s.has_residue && !s.residue)))
      throw ModelReferenceError(origin + ": trained stage is missing a network or its VTC family");
    for (const auto *net : {s.subadc ? &*s.subadc : nullptr, s.residue ? &*s.residue : nullptr})
      if (net)
        for (auto a : net->vtc_assignment)
          if (a >= s.family->size())
            throw ModelReferenceError(origin + ": VTC assignment outside the family");
    return s;
  } catch (const Json::exception &e) {
    throw ModelReferenceError(origin + ": " + e.what());
  } catch (const ConfigError &e) {
    throw ModelReferenceError(origin + ": " + e.what());
  }
}

void save_stage(const TrainedStage &stage, const std::string &file) {
  write_text_file(file, to_json(stage).dump(1) + "\n");
}

TrainedStage load_stage(const std::string &file) {
  return stage_from_json(read_model_json(file), file);
}

std::vector<std::string> save_pipeline(const PipelineConfig &p, const std::string &file,
                                       const std::string &config_hash) {
  const fs::path path(file);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  const std::string stem = path.stem().string();
  std::vector<std::string> written;
  Json stages = Json::array();
  for (std::size_t i = 0; i < p.stages.size(); ++i) {
    TrainedStage s = p.stages[i];
    s.config_hash = config_hash;
    const std::string name = stem + "_stage" + std::to_string(i) + ".json";
    save_stage(s, (dir / name).string());
    written.push_back((dir / name).string());
    stages.push_back({{"file", name}, {"config_hash", config_hash}});
  }
  const Json j = {{"format", "nnadc-pipeline"},
                  {"schema_version", file_schema_version},
                  {"config_hash", config_hash},
                  {"encoding",
                   {{"kind", to_string(p.enc.kind)}, {"v_min", p.enc.v_min}, {"v_max", p.enc.v_max}}},
                  {"sample_hold", {{"gain", p.sample_hold.gain}, {"offset", p.sample_hold.offset}}},
                  {"stages", stages}};
  write_text_file(file, j.dump(1) + "\n");
  written.push_back(file);
  return written;
}

LoadedPipeline load_pipeline(const std::string &file, bool force) {
  const Json j = read_model_json(file);
  expect_format(j, "nnadc-pipeline", file);
  const fs::path dir = fs::path(file).has_parent_path() ? fs::path(file).parent_path() : ".";
  LoadedPipeline out;
  try {
    out.config_hash = j.at("config_hash").get<std::string>();
    const auto &e = j.at("encoding");
    out.config.enc.kind = encoding_kind_from_string(e.at("kind").get<std::string>());
    out.config.enc.v_min = e.at("v_min").get<double>();
    out.config.enc.v_max = e.at("v_max").get<double>();
    out.config.sample_hold.gain = j.at("sample_hold").at("gain").get<double>();
    out.config.sample_hold.offset = j.at("sample_hold").at("offset").get<double>();
    for (const auto &entry : j.at("stages")) {
      const fs::path sf = dir / entry.at("file").get<std::string>();
      auto stage = load_stage(sf.string());
      const auto expected = entry.at("config_hash").get<std::string>();
      if (!force && (stage.config_hash != expected || expected != out.config_hash))
        throw ModelReferenceError(sf.string() + ": config hash " + stage.config_hash +
                                  " does not match the pipeline's " + out.config_hash);
      out.config.stages.push_back(std::move(stage));
    }
    out.config.validate();
  } catch (const Json::exception &e) {
    throw ModelReferenceError(file + ": " + e.what());
  } catch (const ConfigError &e) {
    throw ModelReferenceError(file + ": " + e.what());
  }
  return out;
}

std::string format_double(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

CsvWriter::CsvWriter(const std::string &file, std::initializer_list<std::string_view> header)
    : columns_(header.size()) {
  const fs::path p(file);
  if (p.has_parent_path())
    fs::create_directories(p.parent_path());
  out_.open(file, std::ios::binary | std::ios::trunc);
  if (!out_)
    throw Error(file + ": cannot open for writing");
  for (auto h : header)
    *this << h;
  end_row();
}

void CsvWriter::sep() {
  if (column_ >= columns_)
    throw UsageError("CSV row has more fields than the header");
  if (column_++ > 0)
    out_ << ',';
}

CsvWriter &CsvWriter::operator<<(double v) {
  sep();
  out_ << format_double(v);
  return *this;
}

CsvWriter &CsvWriter::operator<<(long long v) {
  sep();
  out_ << v;
  return *this;
}

CsvWriter &CsvWriter::operator<<(std::string_view v) {
  sep();
  if (v.find_first_of(",\"\n") == std::string_view::npos) {
    out_ << v;
    return *this;
  }
  out_ << '"';
  for (char c : v) {
    if (c == '"')
      out_ << '"';
    out_ << c;
  }
  out_ << '"';
  return *this;
}

void CsvWriter::end_row() {
  if (column_ != columns_)
    throw UsageError("CSV row has fewer fields than the header");
  out_ << '\n';
  column_ = 0;
}

} // namespace nnadc
