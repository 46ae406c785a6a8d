#include "mirror_sinkhorn/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <limits>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "mirror_sinkhorn/baselines.hpp"
#include "mirror_sinkhorn/generators.hpp"
#include "mirror_sinkhorn/objectives.hpp"
#include "mirror_sinkhorn/rounding.hpp"
#include "mirror_sinkhorn/stats.hpp"
#include "mirror_sinkhorn/tensor.hpp"

namespace mirror_sinkhorn {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(const std::string& key, std::string_view text) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ConfigError(key + ": expected a number, got '" + std::string(text) + "'");
  }
  return v;
}

long long to_integer(const std::string& key, std::string_view text) {
  long long v = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (text.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected an integer, got '" + std::string(text) + "'");
  }
  return v;
}

bool to_bool(const std::string& key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + std::string(text) + "'");
}

std::vector<double> to_double_list(const std::string& key, std::string_view text) {
  std::vector<double> out;
  if (trim(text).empty()) return out;
  for (auto field : split(text, ',')) out.push_back(to_double(key, field));
  return out;
}

// "0..31", "1,4,9" or a mix such as "0..3,10".
std::vector<std::uint64_t> to_seed_list(std::string_view text) {
  std::vector<std::uint64_t> out;
  if (trim(text).empty()) return out;
  for (auto field : split(text, ',')) {
    const auto dots = field.find("..");
    if (dots == std::string_view::npos) {
      const auto v = to_integer("seeds", field);
      if (v < 0) throw ConfigError("seeds must be >= 0");
      out.push_back(static_cast<std::uint64_t>(v));
      continue;
    }
    const auto lo = to_integer("seeds", trim(field.substr(0, dots)));
    const auto hi = to_integer("seeds", trim(field.substr(dots + 2)));
    if (lo < 0 || hi < lo) throw ConfigError("seed range '" + std::string(field) + "' is empty or negative");
    for (auto s = lo; s <= hi; ++s) out.push_back(static_cast<std::uint64_t>(s));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    if constexpr (std::is_floating_point_v<T>) {
      out += format_double(values[i]);
    } else {
      out += std::to_string(values[i]);
    }
  }
  return out;
}

std::vector<std::uint64_t> seed_range(std::uint64_t count) {
  std::vector<std::uint64_t> out(count);
  for (std::uint64_t s = 0; s < count; ++s) out[s] = s;
  return out;
}

// Independent stream per (seed, purpose).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

bool is_config_error(const std::exception_ptr& e) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError&) {
    return true;
  } catch (const ParseError&) {
    return true;
  } catch (const SizeLimitError&) {
    return true;
  } catch (const DimensionError&) {
    return true;
  } catch (...) {
    return false;
  }
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::ot_synthetic:
      return "ot-synthetic";
    case ExperimentKind::ot_images:
      return "ot-images";
    case ExperimentKind::strongly_convex:
      return "strongly-convex";
    case ExperimentKind::procrustes:
      return "procrustes";
    case ExperimentKind::tensor_demo:
      return "tensor-demo";
    case ExperimentKind::online_demo:
      return "online-demo";
  }
  return "unknown";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (auto kind : {ExperimentKind::ot_synthetic, ExperimentKind::ot_images, ExperimentKind::strongly_convex,
                    ExperimentKind::procrustes, ExperimentKind::tensor_demo, ExperimentKind::online_demo}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown experiment kind '" + name + "'");
}

ExperimentConfig ExperimentConfig::defaults(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  c.seeds = seed_range(32);
  c.out = "results/" + to_string(kind);
  switch (kind) {
    case ExperimentKind::ot_synthetic:
      c.sigmas = {0.1, 1.0};
      c.alphas = {0.1, 0.01};
      c.schedule = {{"kind", "ot_anytime"}};
      break;
    case ExperimentKind::ot_images:
      c.horizon = 2000;
      c.seeds = seed_range(10);
      c.alphas = {0.1, 0.01};
      c.schedule = {{"kind", "ot_anytime"}};
      break;
    case ExperimentKind::strongly_convex:
      c.m = 50;
      c.n = 60;
      c.sigmas = {1.0};
      c.normalizations = {1, 10};
      c.schedule = {{"kind", "inverse_t"}};
      break;
    case ExperimentKind::procrustes:
      c.n = 60;
      c.m = 60;
      c.seeds = seed_range(8);
      c.normalizations = {1, 10};
      c.averaging = Averaging::last_iterate;
      // TODO: pick ell from a measured curvature of the instance rather than a fixed constant.
      c.schedule = {{"kind", "inverse_t"}, {"ell", "0.05"}};
      break;
    case ExperimentKind::tensor_demo:
      c.schedule = {{"kind", "anytime_sqrt"}};
      break;
    case ExperimentKind::online_demo:
      c.m = 10;
      c.n = 10;
      c.sigmas = {0.1};
      c.schedule = {{"kind", "anytime_sqrt"}};
      break;
  }
  return c;
}

const std::vector<std::string>& ExperimentConfig::keys() {
  static const std::vector<std::string> k{
      "kind",    "m",          "n",        "size",     "source_image", "target_image", "d",        "k_nn",
      "noise",   "lambda",     "threshold_c", "rank",  "mode_size",    "T",            "seeds",    "sigma",
      "oracle",  "sample_size", "alphas",  "alpha",    "k_s",          "schedule",     "B",        "delta",
      "ell",     "epsilon",    "step",     "averaging", "checkpoint_stride", "timing",  "workers",  "out"};
  return k;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string value(trim(raw));
  const auto positive = [&key](long long v) {
    if (v < 1) throw ConfigError(key + " must be >= 1");
    return v;
  };
  if (key == "kind") {
    kind = parse_experiment_kind(value);
  } else if (key == "m") {
    m = positive(to_integer(key, value));
  } else if (key == "n") {
    n = positive(to_integer(key, value));
  } else if (key == "size") {
    image_size = positive(to_integer(key, value));
  } else if (key == "source_image") {
    source_image = value;
  } else if (key == "target_image") {
    target_image = value;
  } else if (key == "d") {
    dim = positive(to_integer(key, value));
  } else if (key == "k_nn") {
    k_nn = static_cast<int>(positive(to_integer(key, value)));
  } else if (key == "noise") {
    noise = to_double(key, value);
  } else if (key == "lambda") {
    lambda = to_double(key, value);
  } else if (key == "threshold_c") {
    threshold_c = to_double(key, value);
  } else if (key == "rank") {
    tensor_rank = positive(to_integer(key, value));
  } else if (key == "mode_size") {
    mode_size = positive(to_integer(key, value));
  } else if (key == "T") {
    horizon = positive(to_integer(key, value));
  } else if (key == "seeds") {
    seeds = to_seed_list(value);
  } else if (key == "sigma") {
    sigmas = to_double_list(key, value);
  } else if (key == "oracle") {
    if (value != "noisy" && value != "subsampled") throw ConfigError("oracle must be noisy or subsampled");
    oracle = value;
  } else if (key == "sample_size") {
    sample_size = to_integer(key, value);
  } else if (key == "alphas") {
    alphas = to_double_list(key, value);
  } else if (key == "alpha") {
    alpha = to_double(key, value);
  } else if (key == "k_s") {
    normalizations.clear();
    for (auto field : split(value, ',')) normalizations.push_back(static_cast<int>(to_integer(key, field)));
  } else if (key == "schedule") {
    parse_schedule_kind(value);
    schedule["kind"] = value;
  } else if (key == "B" || key == "delta" || key == "ell" || key == "epsilon") {
    if (value != "auto") to_double(key, value);
    if (value == "auto") {
      schedule.erase(key);
    } else {
      schedule[key] = value;
    }
  } else if (key == "step") {
    to_double(key, value);
    schedule["value"] = value;
  } else if (key == "averaging") {
    if (value == "mean") {
      averaging = Averaging::mean;
    } else if (value == "last") {
      averaging = Averaging::last_iterate;
    } else {
      throw ConfigError("averaging must be mean or last");
    }
  } else if (key == "checkpoint_stride") {
    checkpoint_stride = to_integer(key, value);
  } else if (key == "timing") {
    record_timing = to_bool(key, value);
  } else if (key == "workers") {
    workers = static_cast<int>(positive(to_integer(key, value)));
  } else if (key == "out") {
    out = value;
  } else {
    throw ConfigError("unknown configuration key '" + key + "'");
  }
}

void ExperimentConfig::validate() const {
  if (m < 1 || n < 1 || image_size < 1 || dim < 1 || mode_size < 1) throw ConfigError("sizes must be >= 1");
  if (tensor_rank < 2) throw ConfigError("rank must be >= 2");
  if (k_nn < 1) throw ConfigError("k_nn must be >= 1");
  if (horizon < 1) throw ConfigError("T must be >= 1");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (checkpoint_stride < 0) throw ConfigError("checkpoint_stride must be >= 0");
  if (sample_size < 0) throw ConfigError("sample_size must be >= 0");
  if (!(noise >= 0.0)) throw ConfigError("noise must be >= 0");
  if (!(alpha > 0.0)) throw ConfigError("alpha must be > 0");
  if (!(threshold_c > 0.0)) throw ConfigError("threshold_c must be > 0");
  for (double s : sigmas) {
    if (!(s >= 0.0)) throw ConfigError("sigma values must be >= 0");
  }
  for (double a : alphas) {
    if (!(a > 0.0)) throw ConfigError("alphas must be > 0");
  }
  if (normalizations.empty()) throw ConfigError("k_s must not be empty");
  for (int k : normalizations) {
    if (k < 1) throw ConfigError("k_s values must be >= 1");
  }
  if (source_image.empty() != target_image.empty()) {
    throw ConfigError("source_image and target_image must be given together");
  }
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream s;
  const auto sched = [this](const std::string& k) {
    const auto it = schedule.find(k);
    return it == schedule.end() ? std::string("auto") : it->second;
  };
  s << "kind = " << to_string(kind) << '\n'
    << "m = " << m << '\n'
    << "n = " << n << '\n'
    << "size = " << image_size << '\n'
    << "source_image = " << source_image << '\n'
    << "target_image = " << target_image << '\n'
    << "d = " << dim << '\n'
    << "k_nn = " << k_nn << '\n'
    << "noise = " << format_double(noise) << '\n'
    << "lambda = " << format_double(lambda) << '\n'
    << "threshold_c = " << format_double(threshold_c) << '\n'
    << "rank = " << tensor_rank << '\n'
    << "mode_size = " << mode_size << '\n'
    << "T = " << horizon << '\n'
    << "seeds = " << join(seeds) << '\n'
    << "sigma = " << join(sigmas) << '\n'
    << "oracle = " << oracle << '\n'
    << "sample_size = " << sample_size << '\n'
    << "alphas = " << join(alphas) << '\n'
    << "alpha = " << format_double(alpha) << '\n'
    << "k_s = " << join(normalizations) << '\n'
    << "schedule = " << sched("kind") << '\n'
    << "B = " << sched("B") << '\n'
    << "delta = " << sched("delta") << '\n'
    << "ell = " << sched("ell") << '\n'
    << "epsilon = " << sched("epsilon") << '\n';
  if (schedule.count("value")) s << "step = " << schedule.at("value") << '\n';
  s << "averaging = " << (averaging == Averaging::mean ? "mean" : "last") << '\n'
    << "checkpoint_stride = " << checkpoint_stride << '\n'
    << "timing = " << (record_timing ? "true" : "false") << '\n'
    << "workers = " << workers << '\n'
    << "out = " << out.string() << '\n';
  return s.str();
}

std::vector<std::pair<std::string, std::string>> parse_config_text(std::string_view text) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t line_no = 0;
  for (auto line : split(text, '\n')) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError("config line " + std::to_string(line_no) + ": empty key");
    out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

std::string variant_name(std::string_view prefix, double value) {
  return std::string(prefix) + "_" + format_double(value);
}

std::vector<double> column_values(const CsvTable& table, std::string_view name) {
  const int c = table.column(name);
  if (c < 0) throw ParseError("missing column '" + std::string(name) + "'");
  std::vector<double> out;
  out.reserve(table.rows.size());
  for (const auto& row : table.rows) {
    const auto& field = row[static_cast<std::size_t>(c)];
    if (field.empty()) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw ParseError("column '" + std::string(name) + "' holds a non-number: '" + field + "'");
    }
    out.push_back(v);
  }
  return out;
}

namespace {

CsvTable trace_table(const RunTrace& trace) { return parse_csv_table(format_trace_csv(trace)); }

void append_column(CsvTable& table, const std::string& name, const std::vector<double>& values) {
  if (values.size() != table.rows.size()) throw DimensionError("column " + name + " has the wrong length");
  table.header.push_back(name);
  for (std::size_t r = 0; r < values.size(); ++r) table.rows[r].push_back(format_double(values[r]));
}

std::vector<double> checkpoint_times(const CsvTable& table) { return column_values(table, "t"); }

StepSchedule make_schedule(const ExperimentConfig& cfg, double delta, std::optional<double> lipschitz, double sigma,
                           std::optional<double> ell) {
  auto fields = cfg.schedule;
  fields["sigma"] = format_double(sigma);
  fields["T"] = std::to_string(cfg.horizon);
  if (!fields.count("B") && lipschitz) fields["B"] = format_double(*lipschitz);
  if (!fields.count("ell") && ell) fields["ell"] = format_double(*ell);
  return schedule_from_fields(fields, EntropicRadius{delta});
}

SolverConfig base_solver_config(const ExperimentConfig& cfg, std::uint64_t seed) {
  SolverConfig s;
  s.horizon = cfg.horizon;
  s.averaging = cfg.averaging;
  s.checkpoint_stride = cfg.checkpoint_stride;
  s.record_timing = cfg.record_timing;
  s.seed = seed;
  return s;
}

std::shared_ptr<GradientOracle> stochastic_oracle(const ExperimentConfig& cfg, std::shared_ptr<const Objective> f,
                                                  double sigma, Index cells, std::uint64_t seed) {
  if (cfg.oracle == "subsampled") {
    const Index size = cfg.sample_size > 0 ? std::min(cfg.sample_size, cells) : std::max<Index>(1, cells / 10);
    return std::make_shared<SubsampledOracle>(std::move(f), size, seed);
  }
  return std::make_shared<NoisyOracle>(std::move(f), sigma, seed);
}

// Mirror Sinkhorn runs on <C, .> plus the Sinkhorn comparisons. With
// `bound`, a column holds the anytime guarantee for the rounded output.
std::map<std::string, CsvTable> run_ot(const ExperimentConfig& cfg, std::uint64_t seed, const OtInstance& inst,
                                       bool bound) {
  std::map<std::string, CsvTable> out;
  auto f = std::make_shared<LinearObjective>(inst.cost);
  const double delta = entropic_radius(inst.spec).delta;
  const auto f_eval = [&f](const Matrix& g) { return f->value(g); };
  const Index cells = inst.spec.m() * inst.spec.n();

  const auto add_bound = [&](CsvTable& table, double sigma) {
    if (!bound) return;
    std::vector<double> b;
    for (double t : checkpoint_times(table)) {
      b.push_back(9.0 / 8.0 * std::sqrt((1.0 + sigma * sigma) * delta / t) * (2.0 + std::log(t)));
    }
    append_column(table, "bound", b);
  };

  for (int k : cfg.normalizations) {
    SolverConfig sc = base_solver_config(cfg, seed);
    sc.schedule = make_schedule(cfg, delta, f->info().lipschitz, 0.0, std::nullopt);
    sc.normalizations_per_step = k;
    sc.round_checkpoints = true;
    ExactOracle oracle(*f);
    CsvTable table = trace_table(solve(oracle, inst.spec, sc, f_eval));
    add_bound(table, 0.0);
    out[k == 1 ? std::string("mirror") : "mirror_ks_" + std::to_string(k)] = std::move(table);
  }
  for (std::size_t v = 0; v < cfg.sigmas.size(); ++v) {
    const double sigma = cfg.sigmas[v];
    SolverConfig sc = base_solver_config(cfg, seed);
    sc.schedule = make_schedule(cfg, delta, f->info().lipschitz, sigma, std::nullopt);
    sc.round_checkpoints = true;
    auto oracle = stochastic_oracle(cfg, f, sigma, cells, derive_seed(seed, v));
    CsvTable table = trace_table(solve(*oracle, inst.spec, sc, f_eval));
    add_bound(table, sigma);
    out[variant_name("sigma", sigma)] = std::move(table);
  }
  for (double a : cfg.alphas) {
    SinkhornOptions opts;
    opts.checkpoint_stride = cfg.checkpoint_stride;
    out[variant_name("sinkhorn_alpha", a)] = trace_table(sinkhorn(inst.cost, a, inst.spec, cfg.horizon, opts));
  }
  return out;
}

std::map<std::string, CsvTable> run_strongly_convex(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::map<std::string, CsvTable> out;
  const auto planted = gen_planted(cfg.m, cfg.n, seed);
  auto f = std::make_shared<EntropicObjective>(planted_strongly_convex(planted.spec, planted.gamma_star, cfg.alpha));
  const double f_star = f->value(planted.gamma_star);
  const auto info = f->info();
  const double b = (f->gradient(planted.gamma_star)).cwiseAbs().maxCoeff();
  const double ell = *info.strong_convexity;
  const double l = *info.smoothness;
  const double delta = entropic_radius(planted.spec).delta;
  const auto gap = [&f, f_star](const Matrix& g) { return f->value(g) - f_star; };

  const auto add_bound = [&](CsvTable& table) {
    std::vector<double> bound;
    for (double t : checkpoint_times(table)) {
      bound.push_back((2.0 * b + l) * (2.0 * b + l) * (1.0 + std::log(t)) / (8.0 * ell * t));
    }
    append_column(table, "bound", bound);
  };

  for (int k : cfg.normalizations) {
    SolverConfig sc = base_solver_config(cfg, seed);
    sc.schedule = make_schedule(cfg, delta, b, 0.0, ell);
    sc.normalizations_per_step = k;
    ExactOracle oracle(*f);
    CsvTable table = trace_table(solve(oracle, planted.spec, sc, gap));
    add_bound(table);
    out["ks_" + std::to_string(k)] = std::move(table);
  }
  for (std::size_t v = 0; v < cfg.sigmas.size(); ++v) {
    const double sigma = cfg.sigmas[v];
    SolverConfig sc = base_solver_config(cfg, seed);
    sc.schedule = make_schedule(cfg, delta, b, sigma, ell);
    auto oracle = stochastic_oracle(cfg, f, sigma, cfg.m * cfg.n, derive_seed(seed, v));
    CsvTable table = trace_table(solve(*oracle, planted.spec, sc, gap));
    add_bound(table);
    out[variant_name("sigma", sigma)] = std::move(table);
  }
  return out;
}

std::map<std::string, CsvTable> run_procrustes(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::map<std::string, CsvTable> out;
  const auto data = gen_procrustes_data(cfg.n, cfg.dim, cfg.k_nn, seed, cfg.noise);
  const TransportPolytope spec{Marginal::uniform(cfg.n), Marginal::uniform(cfg.n)};
  const ProcrustesObjective f(data.kx, data.ky, cfg.lambda);
  const double delta = entropic_radius(spec).delta;
  for (int k : cfg.normalizations) {
    std::vector<double> predicted;
    std::vector<double> hits;
    const auto f_eval = [&](const Matrix& g) {
      const auto counts = threshold_matching(g, data.permutation, cfg.threshold_c);
      predicted.push_back(static_cast<double>(counts.predicted));
      hits.push_back(static_cast<double>(counts.true_positives));
      return f.value(g);
    };
    SolverConfig sc = base_solver_config(cfg, seed);
    sc.schedule = make_schedule(cfg, delta, std::nullopt, 0.0, std::nullopt);
    sc.normalizations_per_step = k;
    ExactOracle oracle(f);
    CsvTable table = trace_table(solve(oracle, spec, sc, f_eval));
    append_column(table, "predicted", predicted);
    append_column(table, "true_positives", hits);
    out["ks_" + std::to_string(k)] = std::move(table);
  }
  return out;
}

std::map<std::string, CsvTable> run_tensor(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  TensorPolytope spec;
  for (Index k = 0; k < cfg.tensor_rank; ++k) spec.marginals.push_back(random_marginal(cfg.mode_size, rng));
  DenseTensor cost(spec.shape());
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& v : cost.data()) v = unit(rng);
  LinearTensorObjective f(cost);
  const double delta = entropic_radius(spec).delta;

  SolverConfig sc = base_solver_config(cfg, seed);
  sc.schedule = make_schedule(cfg, delta, f.info().lipschitz, 0.0, std::nullopt);
  const auto trace = tensor_solve(f, spec, sc, [&f](const DenseTensor& g) { return f.value(g); });
  CsvTable table = parse_csv_table(format_trace_csv(trace));
  std::vector<double> bound;
  for (double t : checkpoint_times(table)) bound.push_back(1.5 * std::sqrt(delta / t) * (2.0 + std::log(t)));
  append_column(table, "c_bound", bound);
  return {{"tensor", std::move(table)}};
}

// Passes a noisy linear stream through and snapshots its running cost sum
// at the checkpoints.
class RecordingStream final : public LossStream {
 public:
  RecordingStream(NoisyLinearLossStream& inner, std::int64_t horizon, std::int64_t stride)
      : inner_(inner), horizon_(horizon), stride_(stride) {}

  const Objective& loss(std::int64_t t) override {
    const Objective& f = inner_.loss(t);
    if (is_checkpoint(t, horizon_, stride_)) snapshots.push_back(inner_.cumulative_cost());
    return f;
  }

  std::vector<Matrix> snapshots;

 private:
  NoisyLinearLossStream& inner_;
  std::int64_t horizon_;
  std::int64_t stride_;
};

std::map<std::string, CsvTable> run_online(const ExperimentConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix mean(cfg.m, cfg.n);
  for (Index i = 0; i < cfg.m; ++i) {
    for (Index j = 0; j < cfg.n; ++j) mean(i, j) = unit(rng);
  }
  const TransportPolytope spec{random_marginal(cfg.m, rng), random_marginal(cfg.n, rng)};
  const double sigma = cfg.sigmas.empty() ? 0.0 : cfg.sigmas.front();
  NoisyLinearLossStream stream(mean, sigma, derive_seed(seed, 0));
  RecordingStream recorder(stream, cfg.horizon, cfg.checkpoint_stride);
  const double b = stream.lipschitz_bound();
  const double delta = entropic_radius(spec).delta;

  SolverConfig sc = base_solver_config(cfg, seed);
  sc.schedule = make_schedule(cfg, delta, b, 0.0, std::nullopt);
  const RunTrace trace = solve_online(recorder, spec, sc);
  CsvTable table = trace_table(trace);

  std::vector<double> regret, rounded_regret, bound;
  double run = 0.0, run_rounded = 0.0;
  std::size_t next = 0;
  const auto times = checkpoint_times(table);
  for (std::size_t t = 1; t <= trace.losses.size(); ++t) {
    run += trace.losses[t - 1];
    run_rounded += trace.rounded_losses[t - 1];
    if (next < times.size() && static_cast<double>(t) == times[next]) {
      const double best = transport_simplex(recorder.snapshots[next], spec).value;
      regret.push_back(run - best);
      rounded_regret.push_back(run_rounded - best);
      const double td = static_cast<double>(t);
      bound.push_back(9.0 * b / 8.0 * std::sqrt(delta * td) * (2.0 + std::log(td)));
      ++next;
    }
  }
  append_column(table, "regret", regret);
  append_column(table, "rounded_regret", rounded_regret);
  append_column(table, "bound", bound);
  return {{"online", std::move(table)}};
}

}  // namespace

std::map<std::string, CsvTable> run_seed(const ExperimentConfig& cfg, std::uint64_t seed) {
  switch (cfg.kind) {
    case ExperimentKind::ot_synthetic:
      return run_ot(cfg, seed, gen_ot_synthetic(cfg.m, cfg.n, seed), true);
    case ExperimentKind::ot_images: {
      if (!cfg.source_image.empty()) {
        const auto pair = image_pair(read_matrix(cfg.source_image), read_matrix(cfg.target_image));
        return run_ot(cfg, seed, pair.problem, false);
      }
      return run_ot(cfg, seed, gen_squares(cfg.image_size, seed).problem, false);
    }
    case ExperimentKind::strongly_convex:
      return run_strongly_convex(cfg, seed);
    case ExperimentKind::procrustes:
      return run_procrustes(cfg, seed);
    case ExperimentKind::tensor_demo:
      return run_tensor(cfg, seed);
    case ExperimentKind::online_demo:
      return run_online(cfg, seed);
  }
  throw ConfigError("unknown experiment kind");
}

CsvTable summarize(const std::vector<CsvTable>& traces) {
  if (traces.empty()) throw ParseError("nothing to summarize");
  const CsvTable& first = traces.front();
  const auto times = column_values(first, "t");
  for (const auto& tr : traces) {
    if (column_values(tr, "t") != times) throw ParseError("traces do not share their checkpoints");
  }
  CsvTable out;
  out.header = {"t"};
  const bool has_norm = first.column("normalizations") >= 0;
  if (has_norm) out.header.push_back("normalizations");
  std::vector<std::string> metrics;
  for (const auto& name : first.header) {
    if (name == "t" || name == "normalizations" || name == "elapsed_ns") continue;
    metrics.push_back(name);
    for (const char* suffix : {"_median", "_p10", "_p90"}) out.header.push_back(name + suffix);
  }
  std::vector<std::vector<std::vector<double>>> values;  // metric -> trace -> row
  for (const auto& name : metrics) {
    std::vector<std::vector<double>> per;
    for (const auto& tr : traces) per.push_back(column_values(tr, name));
    values.push_back(std::move(per));
  }
  for (std::size_t r = 0; r < times.size(); ++r) {
    std::vector<std::string> row{first.rows[r][static_cast<std::size_t>(first.column("t"))]};
    if (has_norm) row.push_back(first.rows[r][static_cast<std::size_t>(first.column("normalizations"))]);
    for (const auto& per : values) {
      std::vector<double> sample;
      bool complete = true;
      for (const auto& col : per) {
        if (std::isnan(col[r])) complete = false;
        sample.push_back(col[r]);
      }
      if (!complete) {
        row.insert(row.end(), 3, std::string());
        continue;
      }
      row.push_back(format_double(percentile(sample, 0.5)));
      row.push_back(format_double(percentile(sample, 0.1)));
      row.push_back(format_double(percentile(sample, 0.9)));
    }
    out.rows.push_back(std::move(row));
  }
  return out;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  const auto& seeds = config.seeds;
  std::vector<std::map<std::string, CsvTable>> per_seed(seeds.size());
  std::vector<std::exception_ptr> errors(seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex io;

  if (!config.out.empty()) {
    std::filesystem::create_directories(config.out);
    write_text_file_atomic(config.out / "config.txt", config.to_text());
  }

  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= seeds.size()) return;
      try {
        per_seed[i] = run_seed(config, seeds[i]);
        if (!config.out.empty()) {
          const auto dir = config.out / ("seed_" + std::to_string(seeds[i]));
          std::lock_guard<std::mutex> lock(io);
          std::filesystem::create_directories(dir);
          for (const auto& [variant, table] : per_seed[i]) {
            write_text_file_atomic(dir / (variant + ".csv"), format_csv_table(table));
          }
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto count = static_cast<std::size_t>(std::max(1, config.workers));
  if (count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < std::min(count, seeds.size()); ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ExperimentResult result;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (errors[i]) {
      std::string message;
      try {
        std::rethrow_exception(errors[i]);
      } catch (const std::exception& e) {
        message = e.what();
      } catch (...) {
        message = "unknown error";
      }
      result.failures.push_back({seeds[i], message, errors[i]});
      continue;
    }
    result.completed_seeds.push_back(seeds[i]);
    for (auto& [variant, table] : per_seed[i]) result.traces[variant].push_back(std::move(table));
  }
  for (const auto& [variant, tables] : result.traces) {
    result.variants.push_back(variant);
    result.summaries[variant] = summarize(tables);
    if (!config.out.empty()) {
      write_text_file_atomic(config.out / ("summary_" + variant + ".csv"), format_csv_table(result.summaries[variant]));
    }
  }
  if (!result.failures.empty()) {
    if (!config.out.empty()) {
      CsvTable manifest;
      manifest.header = {"seed", "kind", "message"};
      for (const auto& f : result.failures) {
        std::string msg = f.message;
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        manifest.rows.push_back({std::to_string(f.seed), is_config_error(f.error) ? "config" : "numerical", msg});
      }
      write_text_file_atomic(config.out / "failures.csv", format_csv_table(manifest));
    }
    std::rethrow_exception(result.failures.front().error);
  }
  return result;
}

}  // namespace mirror_sinkhorn
