#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"
#include "ofs/harness.hpp"

namespace fs = std::filesystem;
using namespace ofs;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  return nlohmann::json::parse(in);
}

ExperimentConfig load(const std::string& path, const std::string& out, std::optional<std::uint64_t> seed) {
  auto cfg = load_experiment_config(path);
  if (!out.empty()) cfg.output_dir = out;
  if (seed) cfg.master_seed = *seed;
  return cfg;
}

BaselineRecord baseline_of(Workspace& ws) {
  const fs::path p = fs::path(ws.config().output_dir) / "baseline.json";
  if (fs::exists(p)) return read_json(p.string()).get<BaselineRecord>();
  const auto& cfg = ws.config();
  return evaluate_baseline(ws.simulator(), ws.library(), static_cast<std::size_t>(cfg.simulator.K), cfg.baseline_K,
                           derive_seed(cfg.master_seed, {0xba5e}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal filter selection: library generation, solver campaigns and analysis"};
  app.require_subcommand(1);

  std::string config, out, metric = "d1", reference, solver, input;
  std::optional<std::uint64_t> seed;
  std::size_t L = 200, Q = 256, n = 32, K = 100, budget = 0, K_big = 10000, grid = 100, repeats = 10;

  auto* gen = app.add_subcommand("generate-library", "write a synthetic filter library as JSON");
  gen->add_option("--seed", seed, "library seed")->required();
  gen->add_option("--L", L, "number of filters");
  gen->add_option("--Q", Q, "wavelength samples");
  gen->add_option("--out", out, "output file")->required();

  auto* run = app.add_subcommand("run", "run every solver of a campaign config");
  auto* rank = app.add_subcommand("rank", "rank solvers of a finished campaign by final best-so-far");
  auto* hood = app.add_subcommand("neighborhood", "neighborhood flatness experiment");
  auto* sel = app.add_subcommand("select", "greedy diverse selection from one solver's evaluated pool");
  auto* reev = app.add_subcommand("reevaluate", "re-estimate a diverse set at large K");
  auto* prec = app.add_subcommand("precision", "inverse-LAP mutation precision experiment");

  for (auto* sub : {run, rank, hood, sel, reev, prec}) {
    sub->add_option("--config", config, "experiment config JSON")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory (defaults to the config's output_dir)");
    sub->add_option("--seed", seed, "override the master seed");
  }
  rank->add_option("--reference", reference, "reference solver name")->required();
  rank->add_option("--budget", budget, "evaluation index b (defaults to the reference budget)");
  hood->add_option("--metric", metric, "hamming, d1 or d2");
  hood->add_option("--n", n, "parents and mutants per parent");
  hood->add_option("--K", K, "samples per point");
  sel->add_option("--solver", solver, "solver whose runs form the pool")->required();
  reev->add_option("--in", input, "diverse set JSON")->required()->check(CLI::ExistingFile);
  reev->add_option("--K", K_big, "samples per member");
  prec->add_option("--metric", metric, "d1 or d2");
  prec->add_option("--grid", grid, "number of target step sizes");
  prec->add_option("--repeats", repeats, "parents per target");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      auto lib = generate_library(*seed, L, Q);
      save_library(lib, out);
      std::cout << "wrote " << lib.size() << " filters to " << out << "\n";
      return 0;
    }

    const auto cfg = load(config, out, seed);
    const fs::path dir(cfg.output_dir);

    if (*run) {
      const auto res = run_campaign(cfg);
      std::cout << "campaign " << res.manifest.at("campaign_id").get<std::string>() << ": " << res.log_paths.size()
                << " logs in " << dir.string() << "\n";
      return 0;
    }
    if (*rank) {
      const auto logs = load_campaign_logs(cfg);
      std::size_t b = budget;
      if (b == 0)
        for (const auto& s : cfg.solvers)
          if (s.name == reference) b = s.config.budget;
      if (b == 0) throw InvalidInput("unknown reference solver " + reference);
      const auto table = rank_solvers(logs, reference, b, static_cast<std::size_t>(cfg.simulator.M));
      const auto csv = rank_table_csv(table);
      write_file(dir / "ranking.csv", csv);
      std::cout << csv;
      return 0;
    }

    Workspace ws(cfg);
    if (*hood) {
      const auto m = neighborhood_metric_from_string(metric);
      const FilterMetric* d = nullptr;
      const MetricContext* ctx = nullptr;
      if (m != NeighborhoodMetric::hamming) {
        const auto id = metric_from_string(metric);
        d = &ws.metric(id);
        ctx = &ws.context(id);
      }
      const auto rep = neighborhood_experiment(ws.simulator(), m, n, K, d, ctx, derive_seed(cfg.master_seed, {0x4e}));
      write_file(dir / ("neighborhood_" + metric + ".csv"), neighborhood_csv(rep));
      write_file(dir / ("neighborhood_" + metric + ".json"), neighborhood_summary_json(rep));
      std::cout << "rejection fraction " << rep.rejection_fraction << " at threshold " << rep.threshold << "\n";
      return 0;
    }
    if (*sel) {
      const auto logs = load_campaign_logs(cfg);
      const auto it = logs.find(solver);
      if (it == logs.end()) throw InvalidInput("unknown solver " + solver);
      const auto& d = ws.metric(MetricId::d1);
      const double d_min =
          calibrate_d_min(d, static_cast<std::size_t>(cfg.simulator.M), 1000, derive_seed(cfg.master_seed, {0xd1}));
      const auto set = select_diverse(pool_from_logs(it->second), d_min, baseline_of(ws).f_max, d);
      write_file(dir / ("selection_" + solver + ".json"), nlohmann::json(set).dump(2) + "\n");
      std::cout << set.solutions.size() << " diverse solutions (D_min " << d_min << ", f_max " << set.f_max << ")\n";
      return 0;
    }
    if (*reev) {
      const auto set = read_json(input).get<DiverseSet>();
      const auto res = reevaluate(set, K_big, ws.simulator(), derive_seed(cfg.master_seed, {0x7e}));
      const auto name = fs::path(input).stem().string() + "_reevaluated.json";
      write_file(dir / name, nlohmann::json(res).dump(2) + "\n");
      std::cout << "re-evaluated " << res.solutions.size() << " members at K=" << K_big << "\n";
      return 0;
    }
    if (*prec) {
      const auto id = metric_from_string(metric);
      const auto& d = ws.metric(id);
      const auto& ctx = ws.context(id);
      const auto ps = precision_experiment(d, ctx, static_cast<std::size_t>(cfg.simulator.M), grid, repeats,
                                           derive_seed(cfg.master_seed, {0x9e}));
      std::string csv = "s,S,mean_rel_dev\n";
      for (std::size_t i = 0; i < ps.means.size(); ++i)
        csv += fmt::format("{},{},{}\n", ps.steps[i], ps.distances[i], ps.means[i]);
      write_file(dir / ("precision_" + metric + ".csv"), csv);
      nlohmann::json summary{{"metric", metric},
                             {"median", ps.median},
                             {"lap_evaluations", ps.lap_evaluations},
                             {"context", ctx}};
      write_file(dir / ("precision_" + metric + ".json"), summary.dump(2) + "\n");
      std::cout << "median of means " << ps.median << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
