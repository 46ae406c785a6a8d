#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "mirror_sinkhorn/baselines.hpp"
#include "mirror_sinkhorn/csv_io.hpp"
#include "mirror_sinkhorn/errors.hpp"
#include "mirror_sinkhorn/experiment.hpp"
#include "mirror_sinkhorn/generators.hpp"
#include "mirror_sinkhorn/objectives.hpp"
#include "mirror_sinkhorn/plot.hpp"
#include "mirror_sinkhorn/stats.hpp"
#include "mirror_sinkhorn/tensor.hpp"
#include "oracles.hpp"

namespace ms = mirror_sinkhorn;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("ms_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

double naive_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

TEST_SUITE("generators") {
  TEST_CASE("synthetic OT instances") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto inst = ms::gen_ot_synthetic(7, 7, seed);
      CHECK(inst.cost.diagonal().cwiseAbs().maxCoeff() == 0.0);
      CHECK(inst.cost.minCoeff() >= 0.0);
      CHECK(inst.cost.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
      CHECK(inst.spec.rows.values() == inst.spec.cols.values());
      CHECK(inst.spec.rows.values().minCoeff() > 0.0);
      CHECK(std::abs(inst.spec.rows.values().sum() - 1.0) <= 1e-12);
      const ms::Matrix diag = inst.spec.rows.values().asDiagonal();
      CHECK(ms::constraint_violation(diag, inst.spec) <= 1e-15);
      CHECK(inst.cost.cwiseProduct(diag).sum() == 0.0);
    }
    const auto a = ms::gen_ot_synthetic(2, 2, 42), b = ms::gen_ot_synthetic(2, 2, 42);
    CHECK(a.cost == b.cost);
    CHECK(a.spec.rows.values() == b.spec.rows.values());
    CHECK(ms::exact_ot_small(a.cost, a.spec).value == 0.0);
    CHECK_THROWS_AS(ms::gen_ot_synthetic(3, 4, 1), ms::ConfigError);
  }

  TEST_CASE("pixel costs and square images") {
    const auto c = ms::pixel_distance_cost(2, 3);
    // Pixels (r, c) in row-major order; the farthest pair is (0,0)-(1,2).
    const double far = std::sqrt(5.0);
    CHECK(c(0, 5) == doctest::Approx(1.0));
    CHECK(c(0, 1) == doctest::Approx(1.0 / far));
    CHECK(c(1, 3) == doctest::Approx(std::sqrt(2.0) / far));
    CHECK(c.maxCoeff() <= 1.0 + 1e-12);
    CHECK(c.diagonal().cwiseAbs().maxCoeff() == 0.0);

    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto pair = ms::gen_squares(8, seed);
      CHECK(pair.problem.spec.m() == 64);
      CHECK(pair.problem.spec.rows.values().minCoeff() > 0.0);
      CHECK(std::isfinite(ms::entropic_radius(pair.problem.spec).delta));
      CHECK(pair.source_image.maxCoeff() == 1.0);
      CHECK(pair.source_image.minCoeff() == doctest::Approx(0.1));
      CHECK(std::abs(pair.problem.cost.cwiseAbs().maxCoeff() - 1.0) <= 1e-12);
    }
    CHECK_THROWS_AS(ms::image_marginal(ms::Matrix::Zero(2, 2)), ms::DomainError);
  }

  TEST_CASE("image transport: identical images cost nothing, point masses cost their distance") {
    const auto pair = ms::gen_squares(4, 3);
    const auto same = ms::image_pair(pair.source_image, pair.source_image);
    const auto r = ms::transport_simplex(same.problem.cost, same.problem.spec);
    CHECK(std::abs(r.value) <= 1e-15);
    const ms::Matrix diag = same.problem.spec.rows.values().asDiagonal();
    CHECK((r.plan - diag).cwiseAbs().maxCoeff() <= 1e-12);

    ms::Matrix a = ms::Matrix::Zero(4, 4), b = ms::Matrix::Zero(4, 4);
    a(0, 1) = 1.0;
    b(3, 3) = 1.0;
    const auto points = ms::image_pair(a, b, 1e-12);
    const double want = std::sqrt(9.0 + 4.0) / std::sqrt(18.0);
    CHECK(ms::transport_simplex(points.problem.cost, points.problem.spec).value == doctest::Approx(want).epsilon(1e-9));
  }

  TEST_CASE("six-node path graph") {
    std::vector<std::vector<ms::Index>> path(6);
    std::vector<std::vector<long>> adj(6);
    for (ms::Index i = 0; i + 1 < 6; ++i) {
      path[static_cast<std::size_t>(i)].push_back(i + 1);
      path[static_cast<std::size_t>(i + 1)].push_back(i);
      adj[static_cast<std::size_t>(i)].push_back(i + 1);
      adj[static_cast<std::size_t>(i + 1)].push_back(i);
    }
    const auto d = ms::shortest_path_distances(path);
    const auto ref = oracle::all_pairs(adj);
    for (ms::Index i = 0; i < 6; ++i) {
      for (ms::Index j = 0; j < 6; ++j) {
        CHECK(d(i, j) == static_cast<double>(std::abs(i - j)));
        CHECK(d(i, j) == ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
      }
    }
    // Off-diagonal distances: ten 1s, eight 2s, six 3s, four 4s, two 5s.
    // Position 0.95 * 29 = 27.55 falls between the last 4 and the first 5.
    const double cap = 4.55;
    const auto capped = ms::cap_and_normalize(d);
    CHECK(capped(0, 5) == 1.0);
    CHECK(capped(0, 4) == doctest::Approx(4.0 / cap).epsilon(1e-14));
    CHECK(capped(2, 3) == doctest::Approx(1.0 / cap).epsilon(1e-14));
    CHECK(capped.maxCoeff() <= 1.0);

    std::vector<std::vector<ms::Index>> split(4);
    split[0] = {1};
    split[1] = {0};
    split[2] = {3};
    split[3] = {2};
    const auto ds = ms::shortest_path_distances(split);
    CHECK(std::isinf(ds(0, 2)));
    CHECK_THROWS_AS(ms::cap_and_normalize(ds), ms::DomainError);
  }

  TEST_CASE("k-NN graph against brute force") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    ms::Matrix pts(12, 5);
    for (ms::Index i = 0; i < 12; ++i) {
      for (ms::Index j = 0; j < 5; ++j) pts(i, j) = z(rng);
    }
    const int k = 3;
    const auto g = ms::knn_graph(pts, k);
    // Pearson correlation between rows.
    std::vector<std::vector<double>> corr(12, std::vector<double>(12));
    for (int i = 0; i < 12; ++i) {
      for (int j = 0; j < 12; ++j) {
        const ms::Vector a = pts.row(i).transpose().array() - pts.row(i).mean();
        const ms::Vector b = pts.row(j).transpose().array() - pts.row(j).mean();
        corr[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = a.dot(b) / (a.norm() * b.norm());
      }
    }
    std::vector<std::vector<bool>> want(12, std::vector<bool>(12, false));
    for (int i = 0; i < 12; ++i) {
      std::vector<int> order;
      for (int j = 0; j < 12; ++j) {
        if (j != i) order.push_back(j);
      }
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return corr[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)] >
               corr[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)];
      });
      for (int r = 0; r < k; ++r) {
        want[static_cast<std::size_t>(i)][static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = true;
        want[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])][static_cast<std::size_t>(i)] = true;
      }
    }
    for (int i = 0; i < 12; ++i) {
      const auto& nb = g[static_cast<std::size_t>(i)];
      CHECK(std::is_sorted(nb.begin(), nb.end()));
      int count = 0;
      for (int j = 0; j < 12; ++j) {
        const bool has = std::find(nb.begin(), nb.end(), j) != nb.end();
        CHECK(has == want[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]);
        count += has;
      }
      CHECK(count >= k);
    }
  }

  TEST_CASE("procrustes data without noise is an exact relabelling") {
    const auto data = ms::gen_procrustes_data(15, 4, 4, 7, 0.0);
    const auto n = static_cast<ms::Index>(data.permutation.size());
    for (ms::Index i = 0; i < n; ++i) {
      for (ms::Index j = 0; j < n; ++j) {
        CHECK(data.ky(data.permutation[static_cast<std::size_t>(i)], data.permutation[static_cast<std::size_t>(j)]) ==
              data.kx(i, j));
      }
    }
    CHECK(data.kx.maxCoeff() <= 1.0);
    CHECK(data.kx.minCoeff() >= 0.0);
    const ms::Coupling p = ms::planted_matching(data.permutation);
    const auto f = ms::procrustes_objective(data.kx, data.ky, 3.0);
    CHECK(f.value(p) == doctest::Approx(-3.0 * p.squaredNorm()).epsilon(1e-12));
    const auto counts = ms::threshold_matching(p, data.permutation);
    CHECK(counts.predicted == n);
    CHECK(counts.true_positives == n);
    const auto uniform = ms::threshold_matching(ms::Matrix::Constant(n, n, 1.0 / static_cast<double>(n * n)),
                                                data.permutation);
    // Uniform mass 1/n^2 sits below the c/n level.
    CHECK(uniform.predicted == 0);
    CHECK(uniform.true_positives == 0);
    const auto loose = ms::threshold_matching(ms::Matrix::Constant(n, n, 1.0 / static_cast<double>(n * n)),
                                              data.permutation, 1.0 / static_cast<double>(n));
    CHECK(loose.predicted == n * n);
    CHECK(loose.true_positives == n);
  }
}

TEST_SUITE("stats") {
  TEST_CASE("percentiles match a sort-based recomputation") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-5, 5);
    for (int size : {1, 2, 3, 10, 32, 33}) {
      std::vector<double> v(static_cast<std::size_t>(size));
      for (auto& x : v) x = u(rng);
      for (double q : {0.0, 0.1, 0.5, 0.9, 1.0}) CHECK(ms::percentile(v, q) == naive_percentile(v, q));
      CHECK(ms::median(v) == naive_percentile(v, 0.5));
    }
    CHECK_THROWS(ms::percentile({}, 0.5));
  }

  TEST_CASE("log-log slope") {
    std::vector<double> x, y;
    for (double t = 1; t <= 1000; t *= 2) {
      x.push_back(t);
      y.push_back(3.0 * std::pow(t, -0.5));
    }
    CHECK(ms::loglog_slope(x, y) == doctest::Approx(-0.5).epsilon(1e-12));
    y[2] = 0.0;
    CHECK_THROWS_AS(ms::loglog_slope(x, y), ms::DomainError);
  }
}

TEST_SUITE("csv_io") {
  TEST_CASE("doubles survive a text round trip") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 1000; ++k) {
      const double v = u(rng) * std::pow(10.0, 40 * u(rng));
      CHECK(std::stod(ms::format_double(v)) == v);
    }
    CHECK(ms::format_double(0.1) == "0.1");
  }

  TEST_CASE("matrix, coupling, vector and tensor formats") {
    ms::Matrix m(2, 3);
    m << 0.1, 1.0 / 3, -2e-300, 4, 5.5, 1e22;
    CHECK(ms::parse_matrix(ms::format_matrix(m)) == m);
    CHECK(ms::parse_coupling(ms::format_coupling(m)) == m);
    CHECK(ms::format_coupling(m).rfind("2,3\n", 0) == 0);
    const ms::Vector v = (ms::Vector(3) << 0.2, 0.3, 0.5).finished();
    CHECK(ms::parse_vector(ms::format_vector(v)) == v);
    CHECK(ms::parse_vector("0.2\n0.3\n0.5\n") == v);
    ms::DenseTensor t({2, 2, 3});
    for (std::size_t f = 0; f < t.size(); ++f) t[f] = 0.01 * static_cast<double>(f);
    const auto back = ms::parse_tensor(ms::format_tensor(t));
    CHECK(back.shape() == t.shape());
    for (std::size_t f = 0; f < t.size(); ++f) CHECK(back[f] == t[f]);

    CHECK_THROWS_AS(ms::parse_matrix("1,2\n3\n"), ms::ParseError);
    CHECK_THROWS_AS(ms::parse_matrix("1,x\n"), ms::ParseError);
    CHECK_THROWS_AS(ms::parse_coupling("2,2\n1,2\n"), ms::ParseError);
  }

  TEST_CASE("files") {
    const auto dir = scratch("csv");
    ms::write_text_file_atomic(dir / "a.csv", "0.5,0.5\n");
    CHECK(ms::read_marginal(dir / "a.csv")[1] == 0.5);
    CHECK(!fs::exists(dir / "a.csv.tmp"));
    ms::write_text_file_atomic(dir / "b.csv", "0.5,0\n");
    CHECK_THROWS_AS(ms::read_marginal(dir / "b.csv"), ms::DomainError);
    CHECK_THROWS_AS(ms::read_text_file(dir / "missing.csv"), ms::ParseError);

    ms::CsvTable table;
    table.header = {"t", "x"};
    table.rows = {{"1", "0.5"}, {"2", ""}};
    const auto parsed = ms::parse_csv_table(ms::format_csv_table(table));
    CHECK(parsed.header == table.header);
    CHECK(parsed.rows == table.rows);
    CHECK(parsed.column("x") == 1);
    CHECK(parsed.column("y") == -1);
    fs::remove_all(dir);
  }
}

TEST_SUITE("experiment") {
  TEST_CASE("configuration keys") {
    auto cfg = ms::ExperimentConfig::defaults(ms::ExperimentKind::strongly_convex);
    CHECK(cfg.m == 50);
    CHECK(cfg.n == 60);
    CHECK(cfg.seeds.size() == 32);
    cfg.set("seeds", "3..5");
    CHECK(cfg.seeds == std::vector<std::uint64_t>{3, 4, 5});
    cfg.set("sigma", "0.1,1");
    CHECK(cfg.sigmas == std::vector<double>{0.1, 1.0});
    cfg.set("k_s", "1,10");
    CHECK(cfg.normalizations == std::vector<int>{1, 10});
    CHECK_THROWS_AS(cfg.set("bogus", "1"), ms::ConfigError);
    CHECK_THROWS_AS(cfg.set("m", "ten"), ms::ConfigError);

    // to_text reads back to the same configuration.
    auto copy = ms::ExperimentConfig::defaults(ms::ExperimentKind::ot_synthetic);
    for (const auto& [k, v] : ms::parse_config_text(cfg.to_text())) copy.set(k, v);
    CHECK(copy.to_text() == cfg.to_text());

    const auto lines = ms::parse_config_text("# comment\n\nm = 4\nn=5 # trailing\n");
    REQUIRE(lines.size() == 2);
    CHECK(lines[1].first == "n");
    CHECK(lines[1].second == "5");
    CHECK_THROWS_AS(ms::parse_config_text("m 4\n"), ms::ParseError);
    CHECK(ms::variant_name("sigma", 0.1) == "sigma_0.1");
    for (const auto* name : {"ot-synthetic", "ot-images", "strongly-convex", "procrustes", "tensor-demo", "online-demo"}) {
      CHECK(ms::to_string(ms::parse_experiment_kind(name)) == name);
    }
  }

  TEST_CASE("summaries match a naive recomputation") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<ms::CsvTable> traces(7);
    for (auto& t : traces) {
      t.header = {"t", "normalizations", "f_value", "c_avg", "elapsed_ns"};
      for (int r = 1; r <= 4; ++r) {
        t.rows.push_back({std::to_string(r), std::to_string(r - 1), ms::format_double(u(rng)),
                          ms::format_double(u(rng)), "17"});
      }
    }
    traces[3].rows[2][3] = "";
    const auto s = ms::summarize(traces);
    CHECK(s.column("elapsed_ns_median") == -1);
    REQUIRE(s.column("f_value_p90") >= 0);
    for (std::size_t r = 0; r < 4; ++r) {
      std::vector<double> col;
      for (const auto& t : traces) col.push_back(std::stod(t.rows[r][2]));
      CHECK(std::stod(s.rows[r][static_cast<std::size_t>(s.column("f_value_median"))]) == naive_percentile(col, 0.5));
      CHECK(std::stod(s.rows[r][static_cast<std::size_t>(s.column("f_value_p10"))]) == naive_percentile(col, 0.1));
      CHECK(std::stod(s.rows[r][static_cast<std::size_t>(s.column("f_value_p90"))]) == naive_percentile(col, 0.9));
    }
    CHECK(s.rows[2][static_cast<std::size_t>(s.column("c_avg_median"))].empty());
    traces[1].rows.pop_back();
    CHECK_THROWS_AS(ms::summarize(traces), ms::ParseError);
  }

  TEST_CASE("runs are reproducible file for file, whatever the worker count") {
    auto cfg = ms::ExperimentConfig::defaults(ms::ExperimentKind::ot_synthetic);
    cfg.m = cfg.n = 6;
    cfg.horizon = 300;
    cfg.set("seeds", "0..3");
    const auto a = scratch("run_a"), b = scratch("run_b");
    cfg.out = a;
    const auto ra = ms::run_experiment(cfg);
    cfg.out = b;
    cfg.workers = 3;
    ms::run_experiment(cfg);
    CHECK(ra.completed_seeds.size() == 4);
    CHECK(!fs::exists(a / "failures.csv"));
    std::size_t files = 0;
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
      if (!entry.is_regular_file()) continue;
      const auto rel = fs::relative(entry.path(), a);
      if (rel == "config.txt") continue;  // records the worker count
      CHECK(slurp(entry.path()) == slurp(b / rel));
      ++files;
    }
    CHECK(files == 4 * ra.variants.size() + ra.variants.size());
    CHECK(fs::exists(a / "seed_2" / "mirror.csv"));
    CHECK(fs::exists(a / "summary_sinkhorn_alpha_0.1.csv"));
    fs::remove_all(a);
    fs::remove_all(b);
  }

  TEST_CASE("a failing seed is recorded and the rest still complete") {
    auto cfg = ms::ExperimentConfig::defaults(ms::ExperimentKind::procrustes);
    // In two dimensions every centred row is a multiple of (1, -1), so rows
    // correlate at exactly +1 or -1 and small k leaves the graph split in two.
    // Seeds 0 and 1 stay disconnected after the retries.
    cfg.n = 12;
    cfg.dim = 2;
    cfg.k_nn = 1;
    cfg.horizon = 20;
    cfg.set("seeds", "0..5");
    cfg.out = scratch("failures");
    CHECK_THROWS_AS(ms::run_experiment(cfg), ms::ConfigError);
    const auto table = ms::parse_csv_table(ms::read_text_file(cfg.out / "failures.csv"));
    CHECK(table.header == std::vector<std::string>{"seed", "kind", "message"});
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0][0] == "0");
    CHECK(table.rows[1][0] == "1");
    CHECK(table.rows[0][1] == "config");
    for (int seed = 2; seed <= 5; ++seed) CHECK(fs::exists(cfg.out / ("seed_" + std::to_string(seed)) / "ks_1.csv"));
    CHECK(!fs::exists(cfg.out / "seed_0"));
    CHECK(fs::exists(cfg.out / "summary_ks_1.csv"));
    fs::remove_all(cfg.out);
  }

}

TEST_SUITE("procrustes_recovery") {
  TEST_CASE("procrustes at zero noise recovers the planted matching") {
    auto cfg = ms::ExperimentConfig::defaults(ms::ExperimentKind::procrustes);
    cfg.n = 20;
    cfg.noise = 0.0;
    cfg.horizon = 2000;
    cfg.set("k_s", "1");
    const auto out = ms::run_seed(cfg, 1);
    const auto& table = out.at("ks_1");
    const auto tp = ms::column_values(table, "true_positives");
    const auto pred = ms::column_values(table, "predicted");
    MESSAGE("final predicted " << pred.back() << ", true positives " << tp.back());
    CHECK(tp.back() == 20.0);
    CHECK(pred.back() == 20.0);
  }

  TEST_CASE("procrustes matches at least chance level") {
    auto cfg = ms::ExperimentConfig::defaults(ms::ExperimentKind::procrustes);
    cfg.n = 20;
    cfg.noise = 0.0;
    cfg.horizon = 2000;
    cfg.set("k_s", "1");
    // A random set of `predicted` cells hits predicted / n of the n planted ones on average.
    double hits = 0.0, chance = 0.0;
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      const auto table = ms::run_seed(cfg, seed).at("ks_1");
      hits += ms::column_values(table, "true_positives").back();
      chance += ms::column_values(table, "predicted").back() / 20.0;
    }
    MESSAGE("true positives " << hits << " vs chance " << chance << " over 8 seeds");
    CHECK(hits >= chance);
  }
}

TEST_SUITE("plot") {
  TEST_CASE("one series of three points") {
    ms::CsvTable s;
    s.header = {"t", "f_value_median", "f_value_p10", "f_value_p90"};
    s.rows = {{"1", "1", "0.5", "2"}, {"10", "0.3", "0.2", "0.4"}, {"100", "0.1", "0.05", "0.2"}};
    ms::PlotSpec spec;
    spec.x_label = "iterations";
    const auto svg = ms::render_plot_svg({{"mirror", s}}, spec);
    std::size_t lines = 0;
    for (auto p = svg.find("<polyline"); p != std::string::npos; p = svg.find("<polyline", p + 1)) ++lines;
    CHECK(lines == 1);
    CHECK(svg.find("<polygon") != std::string::npos);
    CHECK(svg.find("class=\"x-label\"") != std::string::npos);
    CHECK(svg.find(">iterations<") != std::string::npos);
    CHECK(svg.find("class=\"y-label\"") != std::string::npos);
    CHECK(svg.find(">mirror<") != std::string::npos);

    spec.metrics = {"f_value", "c_avg"};
    CHECK_THROWS_AS(ms::render_plot_svg({{"mirror", s}}, spec), ms::ParseError);
  }

  TEST_CASE("nothing is written on error") {
    const auto dir = scratch("plot");
    ms::CsvTable empty;
    empty.header = {"t", "f_value_median"};
    CHECK_THROWS_AS(ms::emit_plot({{"empty", empty}}, {}, dir / "p.svg"), ms::ParseError);
    CHECK_THROWS_AS(ms::emit_plot({}, {}, dir / "q.svg"), ms::ParseError);
    CHECK(fs::is_empty(dir));
    fs::remove_all(dir);
  }
}
