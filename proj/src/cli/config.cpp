#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fragsim/cli.hpp"
#include "fragsim/rng.hpp"

namespace fragsim::cli {

namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (const char c : key) {
    if (c == '~') out += "~0";
    else if (c == '/') out += "~1";
    else out += c;
  }
  return out;
}

// Typed access to one JSON object; every key must be consumed, so typos are reported.
class Fields {
 public:
  Fields(const Json& obj, std::string pointer) : obj_(obj), pointer_(std::move(pointer)) {
    if (!obj.is_object()) fail("", "expected an object");
  }

  std::string at(const std::string& key) const { return pointer_ + "/" + escape_token(key); }

  [[noreturn]] void fail(const std::string& key, const std::string& what) const {
    throw ConfigError(key.empty() ? (pointer_.empty() ? "/" : pointer_) : at(key), what);
  }

  bool has(const std::string& key) const { return obj_.contains(key); }

  const Json& raw(const std::string& key) {
    used_.insert(key);
    return obj_.at(key);
  }

  double number(const std::string& key) {
    if (!has(key)) fail(key, "required field is missing");
    const Json& v = raw(key);
    if (!v.is_number()) fail(key, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "expected a finite number");
    return x;
  }
  double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

  double positive(const std::string& key, double fallback) {
    const double x = number(key, fallback);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }
  double positive(const std::string& key) {
    const double x = number(key);
    if (!(x > 0.0)) fail(key, "must be positive");
    return x;
  }

  double unit_open(const std::string& key, double fallback) {
    const double x = number(key, fallback);
    if (!(x > 0.0 && x < 1.0)) fail(key, "must lie in (0, 1)");
    return x;
  }

  std::uint64_t count(const std::string& key, std::uint64_t fallback, std::uint64_t min = 1) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (v.is_number_integer() && v.get<std::int64_t>() < 0) fail(key, "must be a non-negative integer");
    if (!v.is_number_unsigned()) fail(key, "expected a non-negative integer");
    const std::uint64_t n = v.get<std::uint64_t>();
    if (n < min) fail(key, "must be at least " + std::to_string(min));
    return n;
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = raw(key);
    if (!v.is_boolean()) fail(key, "expected true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& key) {
    if (!has(key)) fail(key, "required field is missing");
    const Json& v = raw(key);
    if (!v.is_string()) fail(key, "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) { return has(key) ? string(key) : fallback; }

  std::vector<double> numbers(const std::string& key, bool positive_only = true) {
    if (!has(key)) fail(key, "required field is missing");
    const Json& v = raw(key);
    if (!v.is_array() || v.empty()) fail(key, "expected a non-empty array of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string where = at(key) + "/" + std::to_string(i);
      if (!v[i].is_number()) throw ConfigError(where, "expected a number");
      const double x = v[i].get<double>();
      if (!std::isfinite(x) || (positive_only && !(x > 0.0))) throw ConfigError(where, "must be a positive number");
      out.push_back(x);
    }
    return out;
  }
  std::vector<double> numbers(const std::string& key, std::vector<double> fallback) {
    return has(key) ? numbers(key) : std::move(fallback);
  }

  Fields object(const std::string& key) { return Fields(raw(key), at(key)); }

  void finish() const {
    for (const auto& [key, value] : obj_.items())
      if (!used_.contains(key)) throw ConfigError(at(key), "unknown field");
  }

 private:
  const Json& obj_;
  std::string pointer_;
  std::set<std::string> used_;
};

struct MeasureId {
  std::string kind;
  std::string variant;
  std::map<std::string, double> params;
};

// "kind", "kind:variant" or "kind:key=value,key=value".
MeasureId split_id(const std::string& id) {
  MeasureId out;
  const auto colon = id.find(':');
  out.kind = id.substr(0, colon);
  if (colon == std::string::npos) return out;
  std::stringstream rest(id.substr(colon + 1));
  std::string item;
  while (std::getline(rest, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) {
      if (!out.variant.empty()) throw ValidationError("malformed measure identifier '" + id + "'");
      out.variant = item;
      continue;
    }
    const std::string key = item.substr(0, eq);
    const std::string value = item.substr(eq + 1);
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != value.size() || !std::isfinite(x))
      throw ValidationError("parameter '" + key + "' of '" + id + "' is not a number");
    if (!out.params.emplace(key, x).second) throw ValidationError("parameter '" + key + "' repeated in '" + id + "'");
  }
  return out;
}

double take(MeasureId& m, const std::string& key, const std::string& id) {
  const auto it = m.params.find(key);
  if (it == m.params.end()) throw ValidationError("measure '" + id + "' needs parameter '" + key + "'");
  const double x = it->second;
  m.params.erase(it);
  return x;
}

double take(MeasureId& m, const std::string& key, double fallback) {
  const auto it = m.params.find(key);
  if (it == m.params.end()) return fallback;
  const double x = it->second;
  m.params.erase(it);
  return x;
}

void done(const MeasureId& m, const std::string& id) {
  if (!m.params.empty()) throw ValidationError("unknown parameter '" + m.params.begin()->first + "' in '" + id + "'");
}

template <class F>
auto located(const std::string& where, F&& f) {
  try {
    return f();
  } catch (const ConfigError&) {
    throw;
  } catch (const ValidationError& e) {
    throw ConfigError(where, e.what());
  }
}

DislocationPtr dislocation_field(Fields& f, const std::string& key, std::uint64_t master) {
  if (!f.has(key)) f.fail(key, "required field is missing");
  const Json& v = f.raw(key);
  const std::string where = f.at(key);
  if (v.is_string()) return located(where, [&] { return parse_dislocation(v.get<std::string>(), derive_seed(master, {stream::kPool})); });
  Fields g(v, where);
  const std::string id = g.string("id");
  StableDislocationOptions opts;
  opts.seed = g.count("seed", derive_seed(master, {stream::kPool}), 0);
  opts.pool = g.count("pool", opts.pool);
  opts.jump_floor = g.positive("jump_floor", opts.jump_floor);
  opts.max_children = g.count("max_children", opts.max_children);
  g.finish();
  return located(g.at("id"), [&]() -> DislocationPtr {
    MeasureId m = split_id(id);
    if (m.kind != "stable") {
      if (g.has("pool") || g.has("jump_floor") || g.has("max_children") || g.has("seed"))
        throw ValidationError("pool options apply to stable measures only");
      return parse_dislocation(id);
    }
    const double beta = take(m, "beta", id);
    done(m, id);
    return nu_stable(beta, opts);
  });
}

ImmigrationPtr immigration_field(Fields& f, const std::string& key, std::uint64_t master) {
  if (!f.has(key)) f.fail(key, "required field is missing");
  const Json& v = f.raw(key);
  const std::string where = f.at(key);
  const std::uint64_t seed = derive_seed(master, {stream::kImmigration});
  if (v.is_string()) return located(where, [&] { return parse_immigration(v.get<std::string>(), seed); });
  Fields g(v, where);
  const std::string id = g.string("id");
  const double scale = g.positive("scale", 1.0);
  g.finish();
  return located(g.at("id"), [&] {
    ImmigrationPtr base = parse_immigration(id, seed);
    return scale == 1.0 ? base : scaled_intensity(std::move(base), scale);
  });
}

RateFunction tau_field(Fields& f) {
  if (!f.has("tau")) f.fail("tau", "required field is missing");
  Fields g = f.object("tau");
  const double alpha = g.number("alpha");
  const double scale = g.positive("scale", 1.0);
  g.finish();
  return scale == 1.0 ? RateFunction::power(alpha) : RateFunction::scaled_power(scale, alpha);
}

Truncation truncation_field(Fields& f, const std::string& key = "truncation", Truncation t = {}) {
  if (!f.has(key)) return t;
  Fields g = f.object(key);
  t.epsilon = g.number("epsilon", t.epsilon);
  if (!(t.epsilon > 0.0 && t.epsilon <= 0.5)) g.fail("epsilon", "must lie in (0, 1/2]");
  t.loss_floor = g.number("loss_floor", t.loss_floor);
  if (t.loss_floor < 0.0) g.fail("loss_floor", "must be non-negative");
  t.mass_floor = g.number("mass_floor", t.mass_floor);
  if (t.mass_floor < 0.0) g.fail("mass_floor", "must be non-negative");
  t.max_children = g.count("max_children", t.max_children);
  t.max_events = g.count("max_events", t.max_events, 0);
  g.finish();
  return t;
}

EpsilonCoupling epsilon_field(Fields& f) {
  EpsilonCoupling e;
  if (!f.has("epsilon")) return e;
  Fields g = f.object("epsilon");
  if (g.has("fixed") && g.has("exponent")) g.fail("", "give either fixed or exponent");
  if (g.has("fixed")) {
    const double x = g.number("fixed");
    if (!(x > 0.0 && x <= 0.5)) g.fail("fixed", "must lie in (0, 1/2]");
    e.fixed = x;
  }
  e.exponent = g.number("exponent", e.exponent);
  if (!(e.exponent < 0.0)) g.fail("exponent", "must be negative");
  g.finish();
  return e;
}

Thresholds thresholds_field(Fields& f, Thresholds t = {}) {
  if (!f.has("thresholds")) return t;
  Fields g = f.object("thresholds");
  t.ks = g.number("ks", t.ks);
  if (!(t.ks > 0.0 && t.ks <= 1.0)) g.fail("ks", "must lie in (0, 1]");
  t.trend_slack = g.number("trend_slack", t.trend_slack);
  if (t.trend_slack < 0.0) g.fail("trend_slack", "must be non-negative");
  t.laplace_sigmas = g.positive("laplace_sigmas", t.laplace_sigmas);
  t.neglected_tolerance = g.positive("neglected_tolerance", t.neglected_tolerance);
  g.finish();
  return t;
}

std::vector<double> probe_times_field(Fields& f) { return f.numbers("probe_times"); }

Theorem1Spec theorem1(Fields& f, std::uint64_t seed) {
  Theorem1Spec s;
  s.tau = tau_field(f);
  s.nu = dislocation_field(f, "nu", seed);
  s.immigration = immigration_field(f, "immigration", seed);
  s.m_grid = f.numbers("m_grid");
  s.probe_times = probe_times_field(f);
  s.samples = f.count("samples", s.samples, 2);
  s.epsilon = epsilon_field(f);
  s.truncation = truncation_field(f);
  s.atom_floor = f.positive("atom_floor", s.atom_floor);
  s.laplace_q = f.numbers("laplace_q", s.laplace_q);
  s.thresholds = thresholds_field(f);
  return s;
}

Theorem2Spec theorem2(Fields& f, std::uint64_t seed) {
  Theorem2Spec s;
  const std::string regime = f.string("regime", "i");
  if (regime == "i") s.regime = Theorem2Spec::Regime::i;
  else if (regime == "ii") s.regime = Theorem2Spec::Regime::ii;
  else f.fail("regime", "must be \"i\" or \"ii\"");
  s.tau = tau_field(f);
  s.nu = dislocation_field(f, "nu", seed);
  s.immigration = immigration_field(f, "immigration", seed);
  if (f.has("time_scale")) {
    const Json& v = f.raw("time_scale");
    if (v.is_string()) {
      if (v.get<std::string>() != "phi_over_tau") throw ConfigError(f.at("time_scale"), "expected \"phi_over_tau\" or an object");
    } else {
      Fields g(v, f.at("time_scale"));
      const std::string kind = g.string("kind");
      if (kind == "power") {
        s.time_scale.kind = TimeScale::Kind::power;
        s.time_scale.exponent = g.number("exponent");
      } else if (kind != "phi_over_tau") {
        g.fail("kind", "must be \"power\" or \"phi_over_tau\"");
      }
      g.finish();
    }
  }
  s.m_grid = f.numbers("m_grid");
  s.probe_times = probe_times_field(f);
  s.samples = f.count("samples", s.samples, 2);
  s.epsilon = epsilon_field(f);
  s.truncation = truncation_field(f);
  s.atom_floor = f.positive("atom_floor", s.atom_floor);
  s.loss_of_mass = f.boolean("loss_of_mass", s.loss_of_mass);
  if (s.regime == Theorem2Spec::Regime::ii && !s.loss_of_mass)
    f.fail("loss_of_mass", "regime ii requires the loss-of-mass condition to be declared true");
  s.f2_quantile = f.unit_open("f2_quantile", s.f2_quantile);
  s.f2_threshold = f.positive("f2_threshold", s.f2_threshold);
  s.laplace_q = f.numbers("laplace_q", s.laplace_q);
  s.thresholds = thresholds_field(f);
  return s;
}

SmallTimeSpec small_time(Fields& f, std::uint64_t seed) {
  SmallTimeSpec s;
  s.alpha = f.number("alpha", s.alpha);
  s.nu = dislocation_field(f, "nu", seed);
  s.immigration = immigration_field(f, "immigration", seed);
  if (f.has("rate_scale")) s.rate_scale = f.positive("rate_scale");
  s.eps_grid = f.numbers("eps_grid");
  for (std::size_t i = 0; i < s.eps_grid.size(); ++i)
    if (!(s.eps_grid[i] < 1.0)) throw ConfigError(f.at("eps_grid") + "/" + std::to_string(i), "must lie in (0, 1)");
  s.probe_times = probe_times_field(f);
  s.samples = f.count("samples", s.samples, 2);
  s.truncation = truncation_field(f);
  s.atom_floor = f.positive("atom_floor", s.atom_floor);
  s.total_mass = f.boolean("total_mass", s.total_mass);
  s.total_mass_samples = f.count("total_mass_samples", s.total_mass_samples, 2);
  s.total_mass_truncation = truncation_field(f, "total_mass_truncation", s.total_mass_truncation);
  s.thresholds = thresholds_field(f);
  return s;
}

CrossValidationSpec cross_validation(Fields& f) {
  CrossValidationSpec s;
  s.m = f.positive("m", s.m);
  s.alpha = f.number("alpha", s.alpha);
  s.probe_times = f.numbers("probe_times", s.probe_times);
  s.samples = f.count("samples", s.samples, 2);
  s.grid = f.count("excursion_grid", s.grid, 2);
  s.truncation = truncation_field(f);
  s.thresholds = thresholds_field(f);
  return s;
}

StableImmigrationSpec stable_immigration(Fields& f, std::uint64_t seed) {
  StableImmigrationSpec s;
  s.beta = f.number("beta", s.beta);
  if (!(s.beta > 1.0 && s.beta < 2.0)) f.fail("beta", "must lie in (1, 2)");
  s.probe_times = f.numbers("probe_times", s.probe_times);
  s.samples = f.count("samples", s.samples, 2);
  s.atom_floor = f.positive("atom_floor", s.atom_floor);
  s.immigration.xmin_ratio = f.unit_open("xmin_ratio", s.immigration.xmin_ratio);
  s.immigration.max_children = f.count("atom_max_children", s.immigration.max_children);
  s.immigration.jump_floor = f.positive("atom_jump_floor", s.immigration.jump_floor);
  s.immigration.rate_samples = f.count("rate_samples", s.immigration.rate_samples, 1000);
  s.immigration.seed = derive_seed(seed, {stream::kImmigration});
  s.jump_floor = f.positive("jump_floor", s.jump_floor);
  s.max_children = f.count("max_children", s.max_children);
  s.laplace_r = f.numbers("laplace_r", s.laplace_r);
  s.laplace_q = f.numbers("laplace_q", s.laplace_q);
  s.laplace_samples = f.count("laplace_samples", s.laplace_samples, 2);
  s.thresholds = thresholds_field(f);
  return s;
}

SamplerSuiteSpec sampler_suite(Fields& f) {
  SamplerSuiteSpec s;
  s.samples = f.count("samples", s.samples, 100);
  s.laplace_sigmas = f.positive("laplace_sigmas", s.laplace_sigmas);
  return s;
}

std::string location(std::string_view text, std::size_t byte) {
  std::size_t line = 1, column = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      column = 1;
    } else {
      ++column;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

}  // namespace

DislocationPtr parse_dislocation(const std::string& id, std::uint64_t seed) {
  MeasureId m = split_id(id);
  DislocationPtr out;
  if (m.kind == "brownian" && m.variant.empty()) {
    out = nu_brownian();
  } else if (m.kind == "zero" && m.variant.empty()) {
    out = nu_zero();
  } else if (m.kind == "finite" && m.variant == "binary-half") {
    out = nu_binary_half(take(m, "weight", 1.0));
  } else if (m.kind == "power" && m.variant.empty()) {
    out = nu_power(take(m, "a", id));
  } else if (m.kind == "stable" && m.variant.empty()) {
    StableDislocationOptions opts;
    opts.seed = seed;
    out = nu_stable(take(m, "beta", id), opts);
  } else {
    throw ValidationError("unknown dislocation measure '" + id +
                          "' (known: brownian, zero, finite:binary-half, power:a=..., stable:beta=...)");
  }
  done(m, id);
  return out;
}

ImmigrationPtr parse_immigration(const std::string& id, std::uint64_t seed) {
  MeasureId m = split_id(id);
  ImmigrationPtr out;
  if (m.kind == "brownian" && m.variant.empty()) {
    out = immigration_brownian();
  } else if (m.kind == "zero" && m.variant.empty()) {
    out = immigration_zero();
  } else if (m.kind == "power" && m.variant.empty()) {
    const double c = take(m, "C", id);
    out = immigration_power(c, take(m, "gamma", id));
  } else if (m.kind == "stable" && m.variant.empty()) {
    StableImmigrationOptions opts;
    opts.seed = seed;
    out = immigration_stable(take(m, "beta", id), opts);
  } else {
    throw ValidationError("unknown immigration measure '" + id +
                          "' (known: brownian, zero, power:C=...,gamma=..., stable:beta=...)");
  }
  done(m, id);
  return out;
}

ExperimentConfig parse_config(std::string_view text, const Overrides& overrides, const std::string& source) {
  Json doc;
  try {
    doc = Json::parse(text.begin(), text.end());
  } catch (const nlohmann::json::parse_error& e) {
    std::string what = e.what();
    if (const auto pos = what.find("parse error at"); pos != std::string::npos) what = what.substr(pos);
    throw ConfigError(source + ", " + location(text, e.byte == 0 ? 0 : e.byte - 1), what);
  }

  Fields f(doc, "");
  ExperimentConfig cfg;
  cfg.kind = f.string("experiment");
  cfg.run.seed = f.count("seed", 1, 0);
  if (overrides.seed) cfg.run.seed = *overrides.seed;
  cfg.run.threads = static_cast<unsigned>(f.count("threads", 1));
  if (overrides.threads) cfg.run.threads = std::max(1u, *overrides.threads);
  cfg.run.keep_raw = overrides.dump_raw;
  cfg.output = f.string("output", "fragsim_out");
  if (overrides.out) cfg.output = *overrides.out;

  const std::uint64_t seed = cfg.run.seed;
  if (cfg.kind == "theorem1") cfg.spec = theorem1(f, seed);
  else if (cfg.kind == "theorem2") cfg.spec = theorem2(f, seed);
  else if (cfg.kind == "small_time") cfg.spec = small_time(f, seed);
  else if (cfg.kind == "cross_validate_brownian") cfg.spec = cross_validation(f);
  else if (cfg.kind == "stable_immigration") cfg.spec = stable_immigration(f, seed);
  else if (cfg.kind == "validate_samplers") cfg.spec = sampler_suite(f);
  else
    f.fail("experiment", "unknown experiment kind '" + cfg.kind +
                             "' (known: theorem1, theorem2, small_time, validate_samplers, "
                             "cross_validate_brownian, stable_immigration)");
  f.finish();

  // Thread count and output location do not change results, so they stay out of the hash.
  Json canonical = doc;
  canonical["seed"] = seed;
  canonical.erase("threads");
  canonical.erase("output");
  cfg.canonical = nlohmann::json::parse(canonical.dump()).dump();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path, const Overrides& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), "cannot read config file");
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), overrides, path.string());
}

}  // namespace fragsim::cli
