#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <span>

#include <nlohmann/json.hpp>

#include "ofs/errors.hpp"
#include "ofs/harness.hpp"

namespace py = pybind11;
using namespace ofs;

namespace {

py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

nlohmann::json from_py(const py::object& o) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

Candidate candidate(const std::vector<FilterIndex>& genes) { return Candidate{genes}; }

MetricId metric_id(const std::string& s) { return metric_from_string(s); }

Alternative alternative(const std::string& s) {
  if (s == "two-sided" || s == "two_sided") return Alternative::two_sided;
  if (s == "less") return Alternative::less;
  throw InvalidArgument("alternative must be 'two-sided' or 'less'");
}

MwuMethod mwu_method(const std::string& s) {
  if (s == "auto") return MwuMethod::automatic;
  if (s == "exact") return MwuMethod::exact;
  if (s == "asymptotic") return MwuMethod::asymptotic;
  throw InvalidArgument("method must be 'auto', 'exact' or 'asymptotic'");
}

py::dict test_result(const TestResult& r) {
  py::dict d;
  d["statistic"] = r.statistic;
  d["p_value"] = r.p_value;
  d["df"] = r.degrees_of_freedom;
  return d;
}

py::dict runlog_dict(const RunLog& log) {
  std::vector<std::size_t> t;
  std::vector<double> f, g;
  std::vector<std::vector<FilterIndex>> genes;
  for (const auto& r : log.records) {
    t.push_back(r.t);
    f.push_back(r.f);
    g.push_back(r.g);
    genes.push_back(r.candidate.genes);
  }
  py::dict d;
  d["t"] = t;
  d["f"] = f;
  d["g"] = g;
  d["genes"] = genes;
  d["best"] = log.best.genes;
  d["best_value"] = log.best_value;
  d["seed"] = log.seed;
  d["config"] = to_py(log.config);
  d["context"] = to_py(log.context);
  return d;
}

}  // namespace

PYBIND11_MODULE(_ofs, m) {
  m.doc() = "Optimal filter selection core";

  py::register_exception<InvalidConfiguration>(m, "InvalidConfiguration", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<DegenerateFilter>(m, "DegenerateFilter", PyExc_ValueError);
  py::register_exception<NotRepresentable>(m, "NotRepresentable", PyExc_ValueError);
  py::register_exception<ExplorationFailure>(m, "ExplorationFailure", PyExc_RuntimeError);
  py::register_exception<SamplingDegeneracy>(m, "SamplingDegeneracy", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<FilterLibrary>(m, "Library")
      .def_property_readonly("size", &FilterLibrary::size)
      .def_property_readonly("Q", [](const FilterLibrary& l) { return l.grid.q_count; })
      .def_property_readonly("seed", [](const FilterLibrary& l) { return l.seed; })
      .def_property_readonly("wavelengths", [](const FilterLibrary& l) { return l.grid.samples(); })
      .def_property_readonly("absorption", [](const FilterLibrary& l) { return l.absorption.values; })
      .def("filter", [](const FilterLibrary& l, std::size_t i) { return l.filters.at(i).values; })
      .def("__len__", &FilterLibrary::size)
      .def("save", [](const FilterLibrary& l, const std::string& path) { save_library(l, path); });

  m.def("generate_library", &generate_library, py::arg("seed") = 7, py::arg("L") = 200, py::arg("Q") = 256);
  m.def("load_library", &load_library, py::arg("path"));
  m.def("baseline_selection", &baseline_selection, py::arg("library"), py::arg("count"));
  m.def("d1", [](const FilterLibrary& l, std::size_t i, std::size_t j) { return d1(l.filters.at(i), l.filters.at(j), l.absorption); });
  m.def("d2", [](const FilterLibrary& l, std::size_t i, std::size_t j) { return d2(l.filters.at(i), l.filters.at(j)); });
  m.def("second_moment", [](const std::vector<double>& v) { return second_moment(std::span<const double>(v)); });

  py::class_<FilterMetric>(m, "Metric")
      .def(py::init([](const FilterLibrary& l, const std::string& id) { return FilterMetric(l, metric_id(id)); }),
           py::arg("library"), py::arg("metric") = "d1")
      .def_property_readonly("name", [](const FilterMetric& d) { return to_string(d.id()); })
      .def_property_readonly("size", &FilterMetric::size)
      .def("__call__", [](const FilterMetric& d, std::size_t i, std::size_t j) {
        if (i >= d.size() || j >= d.size()) throw InvalidArgument("filter index out of range");
        return d(i, j);
      })
      .def("lap", [](const FilterMetric& d, const std::vector<FilterIndex>& x, const std::vector<FilterIndex>& y) {
        return lap_metric(d, candidate(x), candidate(y));
      });

  m.def("hamming", [](const std::vector<FilterIndex>& x, const std::vector<FilterIndex>& y) {
    return hamming(candidate(x), candidate(y));
  });
  m.def(
      "explore",
      [](const FilterMetric& d, std::size_t M, std::size_t R, std::uint64_t seed) {
        return to_py(nlohmann::json(explore(d, M, R, seed)));
      },
      py::arg("metric"), py::arg("M") = 8, py::arg("R") = 10, py::arg("seed") = 0);
  m.def(
      "dd_mutation",
      [](const std::vector<FilterIndex>& x0, const FilterMetric& d, double target, std::size_t budget, std::size_t lambda,
         std::size_t retries, std::uint64_t seed) {
        Rng rng(seed);
        const auto r = dd_mutation(candidate(x0), d, target, DDMutationParams{budget, lambda, retries}, rng);
        return py::make_tuple(r.candidate.genes, r.value, r.lap_evaluations);
      },
      py::arg("x0"), py::arg("metric"), py::arg("target"), py::arg("budget") = 1000, py::arg("lambda_") = 5,
      py::arg("retries") = 10, py::arg("seed") = 0);
  m.def("stepsize_rate", [](double mean) { return build_stepsize_distribution(mean).rate; }, py::arg("mean"));

  m.def("desk_config", [] { return to_py(nlohmann::json(desk_config())); });

  py::class_<Simulator>(m, "Simulator")
      .def(py::init([](const FilterLibrary& l, const py::object& cfg) {
             return Simulator(l, cfg.is_none() ? desk_config() : from_py(cfg).get<SimulatorConfig>());
           }),
           py::arg("library"), py::arg("config") = py::none())
      .def_property_readonly("config", [](const Simulator& s) { return to_py(nlohmann::json(s.config())); })
      .def("sample_D",
           [](const Simulator& s, const std::vector<FilterIndex>& genes, std::uint64_t seed) {
             const auto d = s.sample_D(candidate(genes), seed);
             return py::make_tuple(d.value, d.failed);
           })
      .def(
          "evaluate",
          [](const Simulator& s, const std::vector<FilterIndex>& genes, std::size_t K, std::uint64_t seed) {
            const auto e = s.evaluate(candidate(genes), K, seed);
            py::dict d;
            d["estimate"] = e.estimate;
            d["deviations"] = e.deviations;
            d["failures"] = e.failures;
            d["K"] = e.K;
            return d;
          },
          py::arg("genes"), py::arg("K") = 100, py::arg("seed") = 0);

  m.def("distinct_count", [](const std::vector<FilterIndex>& x) { return distinct_count(candidate(x)); });

  m.def(
      "welch_test",
      [](const std::vector<double>& a, const std::vector<double>& b) { return test_result(welch_test(a, b)); },
      py::arg("a"), py::arg("b"));
  m.def(
      "mwu_test",
      [](const std::vector<double>& a, const std::vector<double>& b, const std::string& alt, const std::string& method) {
        return test_result(mwu_test(a, b, alternative(alt), mwu_method(method)));
      },
      py::arg("a"), py::arg("b"), py::arg("alternative") = "two-sided", py::arg("method") = "auto");

  m.def(
      "run_solver",
      [](const py::dict& config, const FilterLibrary& lib, const py::object& sim_config, std::uint64_t seed) {
        auto cfg = from_py(config).get<OptimizerConfig>();
        const Simulator sim(lib, sim_config.is_none() ? desk_config() : from_py(sim_config).get<SimulatorConfig>());
        cfg.L = lib.size();
        cfg.M = static_cast<std::size_t>(sim.config().M);
        cfg.seed = seed;
        std::optional<FilterMetric> d;
        std::optional<MetricContext> ctx;
        if (cfg.algorithm == Algorithm::dd_ea || cfg.algorithm == Algorithm::umda_u_pls_dist) d.emplace(lib, cfg.metric);
        if (cfg.algorithm == Algorithm::dd_ea) ctx = explore(*d, cfg.M, 10, derive_seed(seed, {0xc0}));
        Rng rng(seed);
        const auto obj = simulator_objective(sim, static_cast<std::size_t>(sim.config().K), derive_seed(seed, {0xe}));
        return runlog_dict(run_solver(cfg, obj, d ? &*d : nullptr, ctx ? &*ctx : nullptr, rng));
      },
      py::arg("config"), py::arg("library"), py::arg("simulator") = py::none(), py::arg("seed") = 0);
  m.def("read_runlog", [](const std::string& path) { return runlog_dict(read_runlog(path)); }, py::arg("path"));

  m.def(
      "run_campaign",
      [](const py::dict& config) {
        auto cfg = from_py(config).get<ExperimentConfig>();
        const auto res = run_campaign(cfg);
        return to_py(res.manifest);
      },
      py::arg("config"));
  m.def(
      "rank",
      [](const py::dict& config, const std::string& reference, std::size_t budget) {
        const auto cfg = from_py(config).get<ExperimentConfig>();
        return rank_table_csv(
            rank_solvers(load_campaign_logs(cfg), reference, budget, static_cast<std::size_t>(cfg.simulator.M)));
      },
      py::arg("config"), py::arg("reference"), py::arg("budget"));
  m.def(
      "neighborhood",
      [](const FilterLibrary& lib, const std::string& metric, std::size_t n, std::size_t K, std::uint64_t seed) {
        const Simulator sim(lib, desk_config());
        const auto nm = neighborhood_metric_from_string(metric);
        std::optional<FilterMetric> d;
        std::optional<MetricContext> ctx;
        if (nm != NeighborhoodMetric::hamming) {
          d.emplace(lib, metric_id(metric));
          ctx = explore(*d, static_cast<std::size_t>(sim.config().M), 10, derive_seed(seed, {0xc0}));
        }
        const auto rep = neighborhood_experiment(sim, nm, n, K, d ? &*d : nullptr, ctx ? &*ctx : nullptr, seed);
        return py::make_tuple(neighborhood_csv(rep), neighborhood_summary_json(rep));
      },
      py::arg("library"), py::arg("metric") = "hamming", py::arg("n") = 8, py::arg("K") = 50, py::arg("seed") = 0);
  m.def(
      "select_diverse",
      [](const std::vector<std::pair<std::vector<FilterIndex>, double>>& pool, double D_min, double f_max,
         const FilterMetric& d) {
        std::vector<PoolEntry> entries;
        for (const auto& [g, v] : pool) entries.push_back(PoolEntry{candidate(g), v});
        return to_py(nlohmann::json(select_diverse(entries, D_min, f_max, d)));
      },
      py::arg("pool"), py::arg("D_min"), py::arg("f_max"), py::arg("metric"));
  m.def(
      "calibrate_d_min",
      [](const FilterMetric& d, std::size_t M, std::size_t pairs, std::uint64_t seed) {
        return calibrate_d_min(d, M, pairs, seed);
      },
      py::arg("metric"), py::arg("M") = 8, py::arg("pairs") = 1000, py::arg("seed") = 0);
  m.def("sha256", [](const py::bytes& b) { return sha256_hex(std::string(b)); });
}
