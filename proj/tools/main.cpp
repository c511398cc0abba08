#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "drflex/harness.hpp"
#include "json.hpp"

namespace {

using namespace drflex;

GpConfig gp_config_from_file(const std::string& path, std::uint64_t seed) {
  GpConfig gc;
  gc.seed = seed;
  if (path.empty()) return gc;
  nlohmann::json j = nlohmann::json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ParseError(path + ": malformed GP config");
  for (const auto& [key, val] : j.items()) {
    if (key == "n_starts") gc.n_starts = val.get<int>();
    else if (key == "max_iters") gc.max_iters = val.get<int>();
    else if (key == "max_rows") gc.max_rows = val.get<int>();
    else throw ParseError(path + ": unknown GP config key '" + key + "'");
  }
  return gc;
}

int cmd_fit_thermal(const std::string& model, const std::string& hist_path,
                    const std::string& cfg_path, std::uint64_t seed,
                    const std::string& out) {
  const MeteringHistory hist = read_metering_csv(hist_path);
  ThermalModel m;
  if (model == "linear") {
    m = fit_linear(hist);
  } else {
    auto gp = std::make_shared<GpThermal>(
        GpThermal::fit(hist, gp_config_from_file(cfg_path, seed)));
    m = std::shared_ptr<const GpThermal>(gp);
  }
  save_thermal_model(out, m);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_gen_customers(int n, const std::string& cfg_path, std::uint64_t seed,
                      const std::string& out) {
  PopulationConfig pc;
  if (!cfg_path.empty()) {
    nlohmann::json j = nlohmann::json::parse(read_text_file(cfg_path), nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw ParseError(cfg_path + ": malformed population config");
    for (const auto& [key, val] : j.items()) {
      if (key == "kappa") {
        pc.kappa_lo = val.at(0).get<double>();
        pc.kappa_hi = val.at(1).get<double>();
      } else if (key == "eta") {
        pc.eta_lo = val.at(0).get<double>();
        pc.eta_hi = val.at(1).get<double>();
      } else {
        throw ParseError(cfg_path + ": unknown population key '" + key + "'");
      }
    }
  }
  const PopulationFile pop = gen_population(n, StreamKey{seed}.child(stream::population), pc);
  save_population(out, pop);
  std::cout << "wrote " << out << " (" << pop.customers.size() << " customers)\n";
  return 0;
}

int cmd_gen_history(int steps, double noise_sd, double kappa, double eta, double dt,
                    std::uint64_t seed, const std::string& out) {
  LinearThermal truth;
  truth.kappa = kappa;
  truth.eta = eta;
  std::mt19937_64 eng = StreamKey{seed}.child(stream::exogenous).engine();
  const MeteringHistory hist = gen_synthetic_history(eng, truth, steps, noise_sd, dt);
  write_metering_csv(out, hist);
  std::cout << "wrote " << out << " (" << hist.rows() << " rows)\n";
  return 0;
}

int cmd_run_event(const std::string& customers_path, const std::string& cfg_path,
                  const std::string& exo_path, std::uint64_t seed,
                  const std::string& out_dir) {
  const PopulationFile pop = load_population(customers_path);
  EventConfig cfg = cfg_path.empty() ? EventConfig{} : load_event_config(cfg_path);
  if (cfg.mode == Mode::soc2 && cfg.L.empty())
    cfg.L.assign(static_cast<std::size_t>(cfg.T),
                 static_cast<double>(pop.customers.size()));
  const StreamKey master{seed};
  ExogenousSeries exo;
  if (exo_path.empty()) {
    std::mt19937_64 eng = master.child(stream::exogenous).engine();
    exo = gen_exogenous(eng, cfg.T);
  } else {
    exo = read_exogenous_csv(exo_path);
    exo.validate(cfg.T);
  }

  std::vector<EventCustomer> customers;
  for (const auto& c : pop.customers) {
    EventCustomer e;
    e.id = c.id;
    e.theta_star = c.theta_star;
    e.model = c.thermal;
    e.u_init = cfg.auto_u_init()
                   ? baseline_power(c.thermal, cfg.s_set, exo.s_out[0], cfg.u_max).u
                   : cfg.u_init;
    customers.push_back(e);
  }
  std::vector<Belief> beliefs(customers.size(), make_default_prior());
  const OnlineConfig ocfg;
  const auto results = run_dr_event(customers, cfg, exo, pop.scaling, beliefs,
                                    master.child(stream::events).child(1), ocfg);

  std::filesystem::create_directories(out_dir);
  write_exogenous_csv(out_dir + "/exogenous.csv", exo);
  {
    std::ostringstream ss;
    ss << "customer,opt_out_step,n_updates,energy_kwh,solver_warning\n";
    for (const auto& r : results)
      ss << r.customer_id << ',' << r.opt_out_step << ',' << r.n_updates << ','
         << fmt12(r.energy_kwh) << ',' << (r.solver_warning ? 1 : 0) << '\n';
    write_text_file(out_dir + "/event_summary.csv", ss.str());
  }
  {
    std::ofstream ts(out_dir + "/transcripts.jsonl", std::ios::binary);
    if (!ts) throw ParseError("cannot open transcripts.jsonl for writing");
    write_step_transcript(ts, 1, results);
  }
  std::cout << "wrote " << out_dir << "/event_summary.csv\n";
  return 0;
}

int cmd_campaign(const std::string& cfg_path, bool seed_given, std::uint64_t seed,
                 int n, int m_events, const std::string& mode, bool transcripts,
                 const std::string& out_dir) {
  CampaignConfig cc;
  if (!cfg_path.empty()) cc = load_campaign_config(cfg_path);
  if (seed_given) cc.master_seed = seed;
  if (n > 0) cc.n = n;
  if (m_events > 0) cc.m_events = m_events;
  if (!mode.empty()) cc.event.mode = mode == "soc2" ? Mode::soc2 : Mode::soc1;
  if (transcripts) cc.write_transcripts = true;
  const CampaignResult res = run_campaign(cc, out_dir);
  std::cout << "rho=" << fmt12(res.rho_used) << " events=" << res.records.size()
            << " cum_regret=" << fmt12(res.records.back().cumulative)
            << (res.any_failed ? " [FAILED EVENTS]" : "") << "\n";
  return res.any_failed ? 1 : 0;
}

int cmd_regret_report(const std::string& records_path, const std::string& out_dir) {
  const auto recs = read_records_csv(records_path);
  const CampaignSummary s = summarize(recs);
  const std::string body = summary_json(s) + "\n";
  std::cout << body;
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/report.json", body);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"demand-response AC flexibility toolkit"};
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit-thermal", "fit a thermal model from metering CSV");
  std::string fit_model = "linear", fit_hist, fit_cfg, fit_out = "model.json";
  std::uint64_t fit_seed = 0;
  fit->add_option("--model", fit_model, "linear or gp")
      ->check(CLI::IsMember({"linear", "gp"}));
  fit->add_option("--history", fit_hist, "metering CSV path")->required();
  fit->add_option("--config", fit_cfg, "GP fit options (JSON)");
  fit->add_option("--seed", fit_seed, "hyperparameter search seed");
  fit->add_option("--out", fit_out, "output model file");

  auto* genc = app.add_subcommand("gen-customers", "generate a simulated population");
  int genc_n = 20;
  std::string genc_cfg, genc_out = "customers.json";
  std::uint64_t genc_seed = 0;
  genc->add_option("--n", genc_n, "population size");
  genc->add_option("--config", genc_cfg, "population ranges (JSON)");
  genc->add_option("--seed", genc_seed, "master seed");
  genc->add_option("--out", genc_out, "output population file");

  auto* genh = app.add_subcommand("gen-history", "generate synthetic metering data");
  int genh_steps = 480;
  double genh_noise = 0.05, genh_kappa = 0.08, genh_eta = -1.2, genh_dt = 0.25;
  std::string genh_cfg, genh_out = "history.csv";
  std::uint64_t genh_seed = 0;
  genh->add_option("--steps", genh_steps, "number of rows");
  genh->add_option("--noise-sd", genh_noise, "indoor observation noise (F)");
  genh->add_option("--kappa", genh_kappa, "true ambient coupling");
  genh->add_option("--eta", genh_eta, "true power coefficient");
  genh->add_option("--dt", genh_dt, "hours per row");
  genh->add_option("--config", genh_cfg, "(unused)");
  genh->add_option("--seed", genh_seed, "generation seed");
  genh->add_option("--out", genh_out, "output CSV");

  auto* runev = app.add_subcommand("run-event", "run a single DR event");
  std::string runev_customers, runev_cfg, runev_exo, runev_out = "event_out";
  std::uint64_t runev_seed = 0;
  runev->add_option("--customers", runev_customers, "population file")->required();
  runev->add_option("--config", runev_cfg, "event config (JSON)");
  runev->add_option("--exogenous", runev_exo, "exogenous CSV (generated if absent)");
  runev->add_option("--seed", runev_seed, "event seed");
  runev->add_option("--out", runev_out, "output directory");

  auto* camp = app.add_subcommand("campaign", "run a DR event campaign");
  std::string camp_cfg, camp_mode, camp_out = "campaign_out";
  std::uint64_t camp_seed = 0;
  int camp_n = 0, camp_events = 0;
  bool camp_transcripts = false;
  camp->add_option("--config", camp_cfg, "campaign config (JSON)");
  auto* camp_seed_opt = camp->add_option("--seed", camp_seed, "master seed");
  camp->add_option("--n", camp_n, "population size override");
  camp->add_option("--events", camp_events, "event count override");
  camp->add_option("--mode", camp_mode, "soc1 or soc2")
      ->check(CLI::IsMember({"soc1", "soc2"}));
  camp->add_flag("--transcripts", camp_transcripts, "write transcripts.jsonl");
  camp->add_option("--out", camp_out, "output directory");

  auto* rep = app.add_subcommand("regret-report", "summarize a records.csv");
  std::string rep_records, rep_cfg, rep_out;
  std::uint64_t rep_seed = 0;
  rep->add_option("--records", rep_records, "records.csv path")->required();
  rep->add_option("--config", rep_cfg, "(unused)");
  rep->add_option("--seed", rep_seed, "(unused)");
  rep->add_option("--out", rep_out, "directory for report.json");

  CLI11_PARSE(app, argc, argv);

  try {
    if (fit->parsed())
      return cmd_fit_thermal(fit_model, fit_hist, fit_cfg, fit_seed, fit_out);
    if (genc->parsed()) return cmd_gen_customers(genc_n, genc_cfg, genc_seed, genc_out);
    if (genh->parsed())
      return cmd_gen_history(genh_steps, genh_noise, genh_kappa, genh_eta, genh_dt,
                             genh_seed, genh_out);
    if (runev->parsed())
      return cmd_run_event(runev_customers, runev_cfg, runev_exo, runev_seed, runev_out);
    if (camp->parsed())
      return cmd_campaign(camp_cfg, camp_seed_opt->count() > 0, camp_seed, camp_n,
                          camp_events, camp_mode, camp_transcripts, camp_out);
    if (rep->parsed()) return cmd_regret_report(rep_records, rep_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
