// mirror-sinkhorn <subcommand> [--config FILE] [--key VALUE ...]
//
// Exit status: 0 on success, 1 on configuration or input errors, 2 on
// numerical failures.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mirror_sinkhorn/baselines.hpp"
#include "mirror_sinkhorn/csv_io.hpp"
#include "mirror_sinkhorn/experiment.hpp"
#include "mirror_sinkhorn/plot.hpp"
#include "mirror_sinkhorn/rounding.hpp"
#include "mirror_sinkhorn/stats.hpp"

namespace ms = mirror_sinkhorn;

namespace {

struct Command {
  std::string name;
  std::string help;
  std::vector<std::string> keys;
  std::string config_path;
  std::map<std::string, std::string> flags;
};

using Fields = std::map<std::string, std::string>;

// Config file entries first, flags override them.
Fields collect(const Command& cmd) {
  Fields fields;
  if (!cmd.config_path.empty()) {
    for (auto& [k, v] : ms::parse_config_text(ms::read_text_file(cmd.config_path))) fields[k] = v;
  }
  for (const auto& [k, v] : cmd.flags) fields[k] = v;
  for (const auto& [k, v] : fields) {
    if (std::find(cmd.keys.begin(), cmd.keys.end(), k) == cmd.keys.end()) {
      throw ms::ConfigError(cmd.name + ": unknown key '" + k + "'");
    }
  }
  return fields;
}

std::string require(const Fields& f, const std::string& key) {
  const auto it = f.find(key);
  if (it == f.end() || it->second.empty()) throw ms::ConfigError("missing required key '" + key + "'");
  return it->second;
}

std::string get(const Fields& f, const std::string& key, const std::string& fallback) {
  const auto it = f.find(key);
  return it == f.end() || it->second.empty() ? fallback : it->second;
}

double number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ms::ConfigError(key + ": expected a number, got '" + text + "'");
  }
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(',', start);
    out.push_back(text.substr(start, end == std::string::npos ? std::string::npos : end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

// Missing marginals default to uniform. An invalid marginal file is an
// input error rather than a numerical one.
ms::TransportPolytope polytope(const Fields& f, ms::Index m, ms::Index n) {
  try {
    const auto mu = f.count("mu") ? ms::read_marginal(f.at("mu")) : ms::Marginal::uniform(m);
    const auto nu = f.count("nu") ? ms::read_marginal(f.at("nu")) : ms::Marginal::uniform(n);
    return {mu, nu};
  } catch (const ms::DomainError& e) {
    throw ms::ConfigError(e.what());
  }
}

int run_experiment_command(const std::string& kind, const Fields& fields) {
  auto config = ms::ExperimentConfig::defaults(ms::parse_experiment_kind(kind));
  for (const auto& [k, v] : fields) config.set(k, v);
  const auto result = ms::run_experiment(config);
  std::cout << kind << ": " << result.completed_seeds.size() << " seeds";
  if (!config.out.empty()) std::cout << ", written to " << config.out.string();
  std::cout << '\n';
  for (const auto& variant : result.variants) {
    const auto& summary = result.summaries.at(variant);
    const auto& last = summary.rows.back();
    std::cout << "  " << variant << "  t=" << last[0];
    for (const char* metric : {"f_value_median", "f_rounded_median", "c_avg_median", "regret_median"}) {
      const int c = summary.column(metric);
      if (c >= 0 && !last[static_cast<std::size_t>(c)].empty()) {
        std::cout << "  " << metric << "=" << last[static_cast<std::size_t>(c)];
      }
    }
    std::cout << '\n';
  }
  return 0;
}

int run_sinkhorn_command(const Fields& f) {
  const ms::Matrix cost = ms::read_matrix(require(f, "cost"));
  const auto spec = polytope(f, cost.rows(), cost.cols());
  const double alpha = number("alpha", require(f, "alpha"));
  const auto iterations = static_cast<std::int64_t>(number("iterations", get(f, "iterations", "1000")));
  const auto trace = ms::sinkhorn(cost, alpha, spec, iterations);
  const auto& last = trace.checkpoints.back();
  std::cout << "sinkhorn: objective " << ms::format_double(*last.f_value) << ", violation "
            << ms::format_double(last.c_iter) << '\n';
  if (f.count("out")) {
    const std::filesystem::path dir = f.at("out");
    std::filesystem::create_directories(dir);
    ms::write_text_file_atomic(dir / "trace.csv", ms::format_trace_csv(trace));
    ms::write_text_file_atomic(dir / "plan.csv", ms::format_coupling(trace.output));
    ms::write_text_file_atomic(dir / "rounded.csv", ms::format_coupling(trace.rounded));
  }
  return 0;
}

int run_exact_command(const Fields& f) {
  const ms::Matrix cost = ms::read_matrix(require(f, "cost"));
  const auto spec = polytope(f, cost.rows(), cost.cols());
  const bool unguarded = get(f, "unguarded", "false") == "true";
  const auto result = unguarded ? ms::transport_simplex(cost, spec) : ms::exact_ot_small(cost, spec);
  std::cout << "exact-ot: value " << ms::format_double(result.value) << '\n';
  if (f.count("out")) ms::write_text_file_atomic(f.at("out"), ms::format_coupling(result.plan));
  return 0;
}

int run_round_command(const Fields& f) {
  const ms::Matrix gamma = ms::read_matrix(require(f, "coupling"));
  const auto spec = polytope(f, gamma.rows(), gamma.cols());
  const ms::Coupling rounded = ms::round_to_polytope(gamma, spec);
  std::cout << "round: violation before " << ms::format_double(ms::constraint_violation(gamma, spec)) << ", after "
            << ms::format_double(ms::constraint_violation(rounded, spec)) << '\n';
  if (f.count("out")) {
    ms::write_text_file_atomic(f.at("out"), ms::format_coupling(rounded));
  } else {
    std::cout << ms::format_coupling(rounded);
  }
  return 0;
}

int run_plot_command(const Fields& f) {
  const auto files = split_list(require(f, "summary"));
  const auto labels = f.count("labels") ? split_list(f.at("labels")) : files;
  if (labels.size() != files.size()) throw ms::ConfigError("labels must match the summary files one to one");
  std::vector<ms::PlotSeries> series;
  for (std::size_t k = 0; k < files.size(); ++k) {
    series.push_back({labels[k], ms::parse_csv_table(ms::read_text_file(files[k]))});
  }
  ms::PlotSpec spec;
  spec.metrics = split_list(get(f, "metrics", "f_value"));
  spec.log_x = get(f, "log_x", "true") == "true";
  spec.log_y = get(f, "log_y", "true") == "true";
  spec.x_label = get(f, "x_label", "t");
  spec.title = get(f, "title", "");
  const std::string out = require(f, "out");
  ms::emit_plot(series, spec, out);
  std::cout << "plot: wrote " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mirror Sinkhorn: optimization over transport polytopes"};
  app.require_subcommand(1);

  std::vector<Command> commands;
  const std::vector<std::string> experiments{"ot-synthetic", "strongly-convex", "ot-images",
                                             "procrustes",   "tensor-demo",     "online-demo"};
  std::vector<std::string> experiment_keys;
  for (const auto& k : ms::ExperimentConfig::keys()) {
    if (k != "kind") experiment_keys.push_back(k);
  }
  for (const auto& e : experiments) commands.push_back({e, "run the " + e + " experiment", experiment_keys, {}, {}});
  commands.push_back({"sinkhorn", "entropic Sinkhorn on a cost matrix", {"cost", "mu", "nu", "alpha", "iterations", "out"}, {}, {}});
  commands.push_back({"exact-ot", "exact optimal transport on a small instance", {"cost", "mu", "nu", "out", "unguarded"}, {}, {}});
  commands.push_back({"round", "round a nonnegative matrix onto the polytope", {"coupling", "mu", "nu", "out"}, {}, {}});
  commands.push_back({"plot", "SVG plot of summary CSV files",
                      {"summary", "labels", "metrics", "log_x", "log_y", "x_label", "title", "out"}, {}, {}});

  std::vector<CLI::App*> subs;
  for (auto& cmd : commands) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", cmd.config_path, "flat key = value file");
    for (const auto& key : cmd.keys) {
      sub->add_option_function<std::string>(
          "--" + key, [&cmd, key](const std::string& v) { cmd.flags[key] = v; }, "config key " + key);
    }
    subs.push_back(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    for (std::size_t k = 0; k < commands.size(); ++k) {
      if (!subs[k]->parsed()) continue;
      const auto& cmd = commands[k];
      const Fields fields = collect(cmd);
      if (cmd.name == "sinkhorn") return run_sinkhorn_command(fields);
      if (cmd.name == "exact-ot") return run_exact_command(fields);
      if (cmd.name == "round") return run_round_command(fields);
      if (cmd.name == "plot") return run_plot_command(fields);
      return run_experiment_command(cmd.name, fields);
    }
  } catch (const ms::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 1;
  } catch (const ms::ParseError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 1;
  } catch (const ms::SizeLimitError& e) {
    std::cerr << "size limit: " << e.what() << '\n';
    return 1;
  } catch (const ms::DimensionError& e) {
    std::cerr << "shape error: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "file error: " << e.what() << '\n';
    return 1;
  } catch (const ms::Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
