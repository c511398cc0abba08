#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "drflex/behavior.hpp"
#include "drflex/core.hpp"
#include "drflex/harness.hpp"
#include "drflex/online.hpp"
#include "drflex/rng.hpp"
#include "drflex/serde.hpp"
#include "drflex/solver.hpp"
#include "drflex/thermal.hpp"

namespace py = pybind11;
using namespace drflex;

namespace {

ThermalModel to_model(const LinearThermal& m) { return ThermalModel{m}; }

// Thompson-sampling event over a generated population, mirroring the CLI
// run-event path: exogenous series and per-customer streams derive from seed.
std::vector<EventResult> run_event_py(const PopulationFile& pop, EventConfig cfg,
                                      std::uint64_t seed, const OnlineConfig& ocfg,
                                      const Belief& prior) {
  cfg.validate();
  StreamKey master{seed};
  auto exo_eng = master.child(stream::exogenous).engine();
  ExogenousSeries exo = gen_exogenous(exo_eng, cfg.T);
  if (cfg.mode == Mode::soc2 && cfg.L.empty())
    cfg.L.assign(cfg.T, static_cast<double>(pop.customers.size()));

  std::vector<EventCustomer> customers;
  std::vector<Belief> beliefs;
  for (const auto& spec : pop.customers) {
    EventCustomer c;
    c.id = spec.id;
    c.theta_star = spec.theta_star;
    c.model = to_model(spec.thermal);
    c.u_init = cfg.auto_u_init()
                   ? baseline_power(c.model, cfg.s_set, exo.s_out[0], cfg.u_max).u
                   : cfg.u_init;
    customers.push_back(std::move(c));
    beliefs.push_back(prior);
  }
  return run_dr_event(customers, cfg, exo, pop.scaling,
                      beliefs, master.child(stream::events).child(1), ocfg);
}

LocalSolution solve_plan_py(const BehaviorParams& theta, const LinearThermal& model,
                            const EventConfig& cfg, const FactorScaling& scaling,
                            const ExogenousSeries& exo, const SolverConfig& scfg) {
  ThermalModel m = to_model(model);
  EnvFactors start = initial_factors(cfg, exo);
  double u0 = cfg.auto_u_init()
                  ? baseline_power(m, cfg.s_set, exo.s_out[0], cfg.u_max).u
                  : cfg.u_init;
  PlanContext ctx = make_plan_context(theta, m, cfg, scaling, exo, 1, start, u0);
  return cfg.mode == Mode::soc1
             ? solve_local_soc1(ctx, scfg)
             : solve_local_soc2(ctx, Eigen::VectorXd::Zero(cfg.T), scfg);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Incentive-based demand-response control core";

  py::register_exception<ParseError>(m, "ParseError");
  py::register_exception<FitError>(m, "FitError");

  py::enum_<Mode>(m, "Mode")
      .value("soc1", Mode::soc1)
      .value("soc2", Mode::soc2);

  py::class_<EventConfig>(m, "EventConfig")
      .def(py::init<>())
      .def_readwrite("T", &EventConfig::T)
      .def_readwrite("dt", &EventConfig::dt)
      .def_readwrite("u_max", &EventConfig::u_max)
      .def_readwrite("du_max", &EventConfig::du_max)
      .def_readwrite("s_set", &EventConfig::s_set)
      .def_readwrite("rho", &EventConfig::rho)
      .def_readwrite("r0", &EventConfig::r0)
      .def_readwrite("r1", &EventConfig::r1)
      .def_readwrite("r2", &EventConfig::r2)
      .def_readwrite("mode", &EventConfig::mode)
      .def_readwrite("L", &EventConfig::L)
      .def_readwrite("u_init", &EventConfig::u_init)
      .def_readwrite("heating", &EventConfig::heating)
      .def("validate", &EventConfig::validate);

  py::class_<EnvFactors>(m, "EnvFactors")
      .def(py::init<>())
      .def_readwrite("s", &EnvFactors::s)
      .def_readwrite("d", &EnvFactors::d)
      .def_readwrite("r", &EnvFactors::r)
      .def_readwrite("s_out", &EnvFactors::s_out)
      .def_readwrite("price", &EnvFactors::price);

  py::class_<ExogenousSeries>(m, "ExogenousSeries")
      .def(py::init<>())
      .def_readwrite("s_out", &ExogenousSeries::s_out)
      .def_readwrite("price", &ExogenousSeries::price);

  py::class_<FactorScaling>(m, "FactorScaling")
      .def(py::init<>())
      .def_readwrite("s_scale", &FactorScaling::s_scale)
      .def_readwrite("d_scale", &FactorScaling::d_scale)
      .def_readwrite("r_scale", &FactorScaling::r_scale)
      .def_readwrite("s_out_scale", &FactorScaling::s_out_scale)
      .def_readwrite("price_scale", &FactorScaling::price_scale)
      .def("normalized", &FactorScaling::normalized);

  py::class_<LinearThermal>(m, "LinearThermal")
      .def(py::init<>())
      .def(py::init([](double kappa, double eta) {
             LinearThermal t{kappa, eta};
             t.validate();
             return t;
           }),
           py::arg("kappa"), py::arg("eta"))
      .def_readwrite("kappa", &LinearThermal::kappa)
      .def_readwrite("eta", &LinearThermal::eta)
      .def("predict", &LinearThermal::predict,
           py::arg("s_prev"), py::arg("s_out_prev"), py::arg("u"));

  py::class_<MeteringHistory>(m, "MeteringHistory")
      .def(py::init([](std::vector<double> t, std::vector<double> s,
                       std::vector<double> o, std::vector<double> u) {
             MeteringHistory h{std::move(t), std::move(s), std::move(o), std::move(u)};
             h.validate();
             return h;
           }),
           py::arg("time_h"), py::arg("indoor_f"), py::arg("outdoor_f"), py::arg("ac_kw"))
      .def_readonly("time_h", &MeteringHistory::time_h)
      .def_readonly("indoor_f", &MeteringHistory::indoor_f)
      .def_readonly("outdoor_f", &MeteringHistory::outdoor_f)
      .def_readonly("ac_kw", &MeteringHistory::ac_kw);

  m.def("fit_linear", &fit_linear, py::arg("history"));

  py::class_<GpConfig>(m, "GpConfig")
      .def(py::init<>())
      .def_readwrite("n_starts", &GpConfig::n_starts)
      .def_readwrite("max_iters", &GpConfig::max_iters)
      .def_readwrite("max_rows", &GpConfig::max_rows)
      .def_readwrite("seed", &GpConfig::seed);

  py::class_<GpThermal, std::shared_ptr<GpThermal>>(m, "GpThermal")
      .def_static("fit", &GpThermal::fit, py::arg("history"), py::arg("config") = GpConfig{})
      .def("mean", &GpThermal::mean, py::arg("s_prev"), py::arg("s_out_prev"), py::arg("u"))
      .def("variance", &GpThermal::variance,
           py::arg("s_prev"), py::arg("s_out_prev"), py::arg("u"))
      .def("log_marginal", &GpThermal::log_marginal);

  m.def("baseline_power",
        [](const LinearThermal& t, double s_set, double s_out, double u_max) {
          BaselinePower b = baseline_power(to_model(t), s_set, s_out, u_max);
          return py::make_tuple(b.u, b.clamped);
        },
        py::arg("model"), py::arg("s_set"), py::arg("s_out"), py::arg("u_max"));

  m.def("sigmoid", &sigmoid, py::arg("x"));
  m.def("log_sigmoid", &log_sigmoid, py::arg("x"));

  py::class_<BehaviorParams>(m, "BehaviorParams")
      .def(py::init<>())
      .def(py::init([](const Vec6& theta) {
             BehaviorParams p{theta};
             p.validate();
             return p;
           }),
           py::arg("theta"))
      .def_readwrite("theta", &BehaviorParams::theta);

  m.def("stay_in_prob", &stay_in_prob, py::arg("params"), py::arg("w_hat"));

  py::class_<Belief>(m, "Belief")
      .def(py::init<>())
      .def(py::init([](const Vec6& mu, const Mat6& sigma) {
             Belief b{mu, sigma};
             b.validate();
             return b;
           }),
           py::arg("mu"), py::arg("sigma"))
      .def_readwrite("mu", &Belief::mu)
      .def_readwrite("sigma", &Belief::Sigma);

  py::class_<VariationalResult>(m, "VariationalResult")
      .def_readonly("belief", &VariationalResult::belief)
      .def_readonly("xi", &VariationalResult::xi)
      .def_readonly("repaired", &VariationalResult::repaired);

  m.def("variational_update",
        [](const Belief& prior, const Vec6& w_hat, bool z, int iters) {
          Observation obs{w_hat, z};
          return variational_update(prior, obs, iters);
        },
        py::arg("prior"), py::arg("w_hat"), py::arg("z"), py::arg("iters") = 3);
  m.def("jj_l", &jj_l, py::arg("xi"));
  m.def("default_prior", &make_default_prior);

  py::class_<SolverConfig>(m, "SolverConfig")
      .def(py::init<>())
      .def_readwrite("max_iters", &SolverConfig::max_iters)
      .def_readwrite("multi_start", &SolverConfig::multi_start)
      .def_readwrite("seed", &SolverConfig::seed);

  py::class_<GammaSchedule>(m, "GammaSchedule")
      .def(py::init<>())
      .def_readwrite("a", &GammaSchedule::a)
      .def_readwrite("floor", &GammaSchedule::floor)
      .def_readwrite("scale", &GammaSchedule::scale)
      .def("at", [](const GammaSchedule& g, int k) { return g(k); }, py::arg("k"));

  py::class_<LocalSolution>(m, "LocalSolution")
      .def_readonly("u", &LocalSolution::u)
      .def_readonly("l", &LocalSolution::l)
      .def_readonly("value", &LocalSolution::value)
      .def_readonly("iters", &LocalSolution::iters);

  m.def("project_feasible",
        [](const Eigen::VectorXd& u, double u_prev, double u_max, double du_max) {
          return project_feasible(u, u_prev, u_max, du_max);
        },
        py::arg("u"), py::arg("u_prev"), py::arg("u_max"), py::arg("du_max"));

  m.def("solve_plan", &solve_plan_py, py::arg("theta"), py::arg("model"),
        py::arg("config"), py::arg("scaling"), py::arg("exogenous"),
        py::arg("solver") = SolverConfig{});

  py::class_<OnlineConfig>(m, "OnlineConfig")
      .def(py::init<>())
      .def_readwrite("solver", &OnlineConfig::solver)
      .def_readwrite("gamma", &OnlineConfig::gamma)
      .def_readwrite("dual_eps", &OnlineConfig::dual_eps)
      .def_readwrite("dual_kmax", &OnlineConfig::dual_kmax)
      .def_readwrite("dual_res_tol", &OnlineConfig::dual_res_tol)
      .def_readwrite("resolve_multi_start", &OnlineConfig::resolve_multi_start)
      .def_readwrite("warm_start", &OnlineConfig::warm_start)
      .def_readwrite("transcripts", &OnlineConfig::transcripts);

  py::class_<CustomerSpec>(m, "CustomerSpec")
      .def_readonly("id", &CustomerSpec::id)
      .def_readonly("theta_star", &CustomerSpec::theta_star)
      .def_readonly("thermal", &CustomerSpec::thermal);

  py::class_<PopulationFile>(m, "PopulationFile")
      .def_readonly("scaling", &PopulationFile::scaling)
      .def_readonly("customers", &PopulationFile::customers);

  m.def("gen_population",
        [](int n, std::uint64_t seed) {
          return gen_population(n, StreamKey{seed}.child(stream::population));
        },
        py::arg("n"), py::arg("seed"));
  m.def("save_population", &save_population, py::arg("path"), py::arg("population"));
  m.def("load_population", &load_population, py::arg("path"));

  m.def("gen_exogenous",
        [](int T, std::uint64_t seed) {
          auto eng = StreamKey{seed}.child(stream::exogenous).engine();
          return gen_exogenous(eng, T);
        },
        py::arg("T"), py::arg("seed"));

  py::class_<EventResult>(m, "EventResult")
      .def_readonly("customer_id", &EventResult::customer_id)
      .def_readonly("applied_u", &EventResult::applied_u)
      .def_readonly("applied_l", &EventResult::applied_l)
      .def_readonly("planned_u", &EventResult::planned_u)
      .def_readonly("planned_l", &EventResult::planned_l)
      .def_readonly("p_true", &EventResult::p_true)
      .def_readonly("opt_out_step", &EventResult::opt_out_step)
      .def_readonly("n_updates", &EventResult::n_updates)
      .def_readonly("energy_kwh", &EventResult::energy_kwh)
      .def_readonly("solver_warning", &EventResult::solver_warning)
      .def_readonly("belief_repaired", &EventResult::belief_repaired);

  m.def("run_event", &run_event_py, py::arg("population"), py::arg("config"),
        py::arg("seed"), py::arg("online") = OnlineConfig{},
        py::arg("prior") = make_default_prior(),
        py::call_guard<py::gil_scoped_release>());

  m.def("run_campaign",
        [](const std::string& config_json, const std::string& out_dir) {
          CampaignConfig cc = campaign_config_from_json_text(config_json);
          CampaignResult res;
          {
            py::gil_scoped_release release;
            res = run_campaign(cc, out_dir);
          }
          CampaignSummary s = summarize(res.records);
          py::dict d;
          d["rho"] = res.rho_used;
          d["any_failed"] = res.any_failed;
          d["events"] = res.records.size();
          d["early_mean_regret"] = s.early_mean_regret;
          d["late_mean_regret"] = s.late_mean_regret;
          d["cum_rate_40"] = s.cum_rate_40;
          d["cum_rate_end"] = s.cum_rate_end;
          d["mean_energy_after_100"] = s.mean_energy_after_100;
          d["total_optouts"] = s.total_optouts;
          return d;
        },
        py::arg("config_json"), py::arg("out_dir") = std::string());
}
