#include "drflex/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace drflex {

namespace {

using nlohmann::json;

std::uint64_t fnv1a_double(std::uint64_t h, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  for (int i = 0; i < 8; ++i) {
    h ^= (bits >> (8 * i)) & 0xffULL;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string vec_digest(const double* p, int n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (int i = 0; i < n; ++i) h = fnv1a_double(h, p[i]);
  return hex64(h);
}

double unif(std::mt19937_64& eng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(eng);
}

}  // namespace

PopulationFile gen_population(int n, StreamKey key, const PopulationConfig& pc) {
  if (n < 1) throw std::invalid_argument("gen_population: n must be >= 1");
  std::mt19937_64 eng = key.engine();
  PopulationFile pop;
  pop.scaling = pc.profile.scaling;
  for (int i = 0; i < n; ++i) {
    CustomerSpec c;
    c.id = i;
    c.thermal.kappa = unif(eng, pc.kappa_lo, pc.kappa_hi);
    c.thermal.eta = unif(eng, pc.eta_lo, pc.eta_hi);
    c.thermal.validate();
    c.theta_star = gen_ground_truth(eng, pc.profile);
    pop.customers.push_back(c);
  }
  return pop;
}

ExogenousSeries gen_exogenous(std::mt19937_64& eng, int T, const ExogenousConfig& xc) {
  if (T < 1) throw std::invalid_argument("gen_exogenous: T must be >= 1");
  const double peak = unif(eng, xc.peak_lo, xc.peak_hi);
  const double drop = unif(eng, xc.drop_lo, xc.drop_hi);
  ExogenousSeries exo;
  for (int t = 0; t <= T; ++t) {
    const double frac = static_cast<double>(t) / static_cast<double>(T);
    const double bump = 1.0 - (2.0 * frac - 1.0) * (2.0 * frac - 1.0);
    exo.s_out.push_back(peak - drop * (1.0 - bump) + unif(eng, -xc.noise, xc.noise));
  }
  for (int t = 1; t <= T; ++t) exo.price.push_back(unif(eng, 0.0, 1.0));
  exo.validate(T);
  return exo;
}

MeteringHistory gen_synthetic_history(std::mt19937_64& eng, const LinearThermal& truth,
                                      int steps, double noise_sd, double dt) {
  if (steps < 10) throw std::invalid_argument("gen_synthetic_history: steps must be >= 10");
  if (noise_sd < 0.0 || dt <= 0.0)
    throw std::invalid_argument("gen_synthetic_history: bad noise_sd or dt");
  truth.validate();
  std::normal_distribution<double> noise(0.0, noise_sd);
  const double s_set = 72.0, u_max = 2.0, band = 0.7;
  MeteringHistory hist;
  double s = s_set + unif(eng, -1.0, 1.0);
  double u = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double s_out =
        86.0 + 7.0 * std::sin(2.0 * M_PI * (k * dt) / 24.0) + unif(eng, -1.0, 1.0);
    if (k > 0) {
      const double s_prev = s;
      // Thermostat-like duty cycling with occasional random excursions keeps
      // (s_out - s, u) well conditioned for regression.
      if (unif(eng, 0.0, 1.0) < 0.05) {
        u = unif(eng, 0.0, u_max);
      } else if (s_prev > s_set + band) {
        u = u_max * unif(eng, 0.7, 1.0);
      } else if (s_prev < s_set - band) {
        u = 0.0;
      } else {
        u = std::clamp(u + unif(eng, -0.3, 0.3), 0.0, u_max);
      }
      s = truth.predict(s_prev, hist.outdoor_f[k - 1], u);
    }
    hist.time_h.push_back(k * dt);
    hist.indoor_f.push_back(s + (noise_sd > 0.0 ? noise(eng) : 0.0));
    hist.outdoor_f.push_back(s_out);
    hist.ac_kw.push_back(u);
  }
  hist.validate();
  return hist;
}

double system_value(const std::vector<PlanContext>& ctxs,
                    const std::vector<Trajectory>& plans, double sum_tol) {
  if (ctxs.empty() || ctxs.size() != plans.size())
    throw std::invalid_argument("system_value: ctxs/plans mismatch");
  const EventConfig& cfg = ctxs[0].cfg;
  if (cfg.mode == Mode::soc1) {
    double v = 0.0;
    for (std::size_t i = 0; i < ctxs.size(); ++i) v += soc1_value(ctxs[i], plans[i].u);
    return v;
  }
  const int h = ctxs[0].horizon();
  if (ctxs[0].start_step != 1)
    throw std::invalid_argument("system_value: soc2 expects full-horizon contexts");
  Eigen::VectorXd sum_l = Eigen::VectorXd::Zero(h);
  const Eigen::VectorXd zero_lambda = Eigen::VectorXd::Zero(h);
  double v = 0.0;
  for (std::size_t i = 0; i < ctxs.size(); ++i) {
    if (ctxs[i].horizon() != h)
      throw std::invalid_argument("system_value: horizon mismatch across customers");
    if (plans[i].l.size() != h)
      throw std::invalid_argument("system_value: soc2 plan missing l");
    sum_l += plans[i].l;
    v += soc2_local_value(ctxs[i], plans[i].u, plans[i].l, zero_lambda) + ctxs[i].cfg.rho;
  }
  for (int j = 0; j < h; ++j)
    if (std::abs(sum_l[j] - cfg.L[j]) > sum_tol * std::max(1.0, std::abs(cfg.L[j])))
      throw std::invalid_argument("system_value: shares do not sum to the target");
  return v;
}

OracleResult oracle_control(const std::vector<PlanContext>& ctxs,
                            const SolverConfig& scfg, const GammaSchedule& gamma,
                            double dual_eps, int dual_kmax, double dual_res_tol,
                            const std::vector<std::vector<Trajectory>>& candidates) {
  if (ctxs.empty()) throw std::invalid_argument("oracle_control: no contexts");
  for (const auto& cand : candidates)
    if (cand.size() != ctxs.size())
      throw std::invalid_argument("oracle_control: candidate set size mismatch");
  const StreamKey base{scfg.seed};
  OracleResult out;
  if (ctxs[0].cfg.mode == Mode::soc1) {
    out.plans.resize(ctxs.size());
    for (std::size_t i = 0; i < ctxs.size(); ++i) {
      SolverConfig ci = scfg;
      ci.seed = base.child(static_cast<std::uint64_t>(i)).key;
      std::vector<Eigen::VectorXd> extra;
      for (const auto& cand : candidates) extra.push_back(cand[i].u);
      const LocalSolution sol = solve_local_soc1(ctxs[i], ci, extra);
      out.warning = out.warning || sol.line_search_failed;
      out.plans[i] = {sol.u, Eigen::VectorXd()};
    }
    out.value = system_value(ctxs, out.plans);
    return out;
  }

  const int h = ctxs[0].horizon();
  const std::vector<double>& L = ctxs[0].cfg.L;
  Eigen::VectorXd Lv(h);
  for (int j = 0; j < h; ++j) Lv[j] = L[j];
  const double Lnorm = std::max(Lv.norm(), 1e-12);

  bool have_best = false;
  const auto consider = [&](std::vector<Trajectory> set) {
    project_shares(set, L);
    const double v = system_value(ctxs, set);
    if (!have_best || v < out.value) {
      out.value = v;
      out.plans = std::move(set);
      have_best = true;
    }
  };
  for (const auto& cand : candidates) consider(cand);

  // Dual gradient under theta*, keeping the best projected iterate rather
  // than only the final one: the multiplier path oscillates on nonconvex
  // locals, and intermediate primal iterates are often the strongest plans.
  std::vector<std::unique_ptr<LocalAgent>> agents;
  for (std::size_t i = 0; i < ctxs.size(); ++i) {
    SolverConfig ci = scfg;
    ci.seed = base.child(static_cast<std::uint64_t>(i)).key;
    agents.push_back(std::make_unique<LocalAgent>(ctxs[i], ci, static_cast<int>(i)));
  }
  Eigen::VectorXd lambda = Eigen::VectorXd::Zero(h);
  bool aborted = false;
  for (int k = 1; k <= dual_kmax; ++k) {
    Eigen::VectorXd sum_l = Eigen::VectorXd::Zero(h);
    std::vector<Trajectory> iterate(ctxs.size());
    for (std::size_t i = 0; i < ctxs.size(); ++i) {
      try {
        agents[i]->solve_local(lambda);
      } catch (const std::exception&) {
        aborted = true;
        break;
      }
      iterate[i] = {agents[i]->current().u, agents[i]->current().l};
      sum_l += agents[i]->current().l;
    }
    if (aborted) break;
    consider(std::move(iterate));
    const Eigen::VectorXd res = sum_l - Lv;
    const Eigen::VectorXd dlambda = gamma(k) * res;
    lambda += dlambda;
    if (dlambda.norm() <= dual_eps) break;
    if (dual_res_tol > 0.0 && res.norm() <= dual_res_tol * Lnorm) break;
  }
  for (const auto& a : agents) out.warning = out.warning || a->any_warning();
  if (aborted) out.warning = true;
  if (!have_best) throw std::runtime_error("oracle_control: dual solve aborted");
  return out;
}

BaselineRecord baseline_setpoint_raise(double delta_f, const EventConfig& cfg,
                                       const ExogenousSeries& exo,
                                       const FactorScaling& scaling,
                                       const std::vector<EventCustomer>& customers,
                                       StreamKey key, int event_index) {
  if (delta_f < 0.0) throw std::invalid_argument("baseline_setpoint_raise: delta_f < 0");
  cfg.validate();
  exo.validate(cfg.T);
  BaselineRecord rec;
  rec.event = event_index;
  rec.delta_f = delta_f;
  const int T = cfg.T;
  for (const auto& c : customers) {
    Eigen::VectorXd plan(T), u_set(T);
    for (int t = 1; t <= T; ++t) {
      u_set[t - 1] = baseline_power(c.model, cfg.s_set, exo.s_out[t], cfg.u_max).u;
      plan[t - 1] =
          baseline_power(c.model, cfg.s_set + delta_f, exo.s_out[t], cfg.u_max).u;
    }
    plan = project_feasible(plan, c.u_init, cfg.u_max, cfg.du_max);
    std::mt19937_64 eng = key.child(static_cast<std::uint64_t>(c.id)).engine();
    EnvFactors f = initial_factors(cfg, exo);
    OptOutState opt;
    for (int t = 1; t <= T; ++t) {
      const double u_apply = opt.in ? plan[t - 1] : u_set[t - 1];
      f = step_factors(f, u_apply, u_set[t - 1], exo.s_out[t], exo.price[t - 1], cfg,
                       c.model);
      rec.energy_kwh += cfg.dt * (u_set[t - 1] - u_apply);
      if (opt.in) {
        const double p = stay_in_prob(c.theta_star, scaling.normalized(f));
        opt = transition(eng, opt, p, t);
        if (!opt.in) rec.optouts += 1;
      }
    }
  }
  return rec;
}

void CampaignConfig::validate() const {
  if (n < 1) throw std::invalid_argument("CampaignConfig: n must be >= 1");
  if (m_events < 1) throw std::invalid_argument("CampaignConfig: m_events must be >= 1");
  if (l_per_customer_lo > l_per_customer_hi || l_per_customer_lo <= 0.0)
    throw std::invalid_argument("CampaignConfig: bad l_per_customer range");
  if (oracle_multistart_factor < 1)
    throw std::invalid_argument("CampaignConfig: oracle_multistart_factor must be >= 1");
  for (double d : baseline_deltas)
    if (d < 0.0) throw std::invalid_argument("CampaignConfig: negative baseline delta");
  EventConfig ec = event;
  ec.rho = event.rho < 0.0 ? 1.0 : event.rho;  // rho < 0 means auto-calibrate
  if (ec.mode == Mode::soc2 && ec.L.empty())
    ec.L.assign(static_cast<std::size_t>(ec.T), static_cast<double>(n));
  ec.validate();
  prior.validate();
  online.solver.validate();
}

Belief make_default_prior() {
  Belief b;
  b.mu = Vec6::Zero();
  b.mu[0] = 2.0;  // mildly optimistic stay-in at default conditions
  b.Sigma = 4.0 * Mat6::Identity();
  return b;
}

double calibrate_rho(StreamKey key, const CampaignConfig& cc) {
  // One seeded calibration customer and exogenous draw; the event uses the
  // energy objective so the calibration is mode-independent.
  const PopulationFile pop = gen_population(1, key.child(stream::population), cc.population);
  const CustomerSpec& c = pop.customers[0];
  std::mt19937_64 xeng = key.child(stream::exogenous).engine();
  const ExogenousSeries exo = gen_exogenous(xeng, cc.event.T, cc.exogenous);

  EventConfig ec = cc.event;
  ec.mode = Mode::soc1;
  ec.L.clear();
  ec.rho = 1.0;
  const double u_init =
      baseline_power(c.thermal, ec.s_set, exo.s_out[0], ec.u_max).u;
  ec.u_init = u_init;

  SolverConfig scfg = cc.online.solver;
  scfg.multi_start = std::max(scfg.multi_start, 6);
  scfg.seed = key.child(stream::solver).key;

  const auto final_stay_prob = [&](double rho) {
    EventConfig e = ec;
    e.rho = rho;
    const PlanContext ctx = make_plan_context(c.theta_star, c.thermal, e, pop.scaling,
                                              exo, 1, initial_factors(e, exo), u_init);
    const LocalSolution sol = solve_local_soc1(ctx, scfg);
    const Rollout ro = rollout(ctx, sol.u);
    return ro.p[ctx.horizon() - 1];
  };

  double lo = 0.5, hi = 64.0;
  if (final_stay_prob(lo) >= 0.5) return lo;
  if (final_stay_prob(hi) < 0.5) return hi;
  for (int it = 0; it < 12; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (final_stay_prob(mid) >= 0.5)
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

namespace {

std::string record_csv_row(const RegretRecord& r) {
  std::ostringstream ss;
  ss << r.event << ',' << fmt12(r.regret) << ',' << fmt12(r.cumulative) << ','
     << r.optouts << ',' << fmt12(r.energy_kwh) << '\n';
  return ss.str();
}

void append_event_transcript(std::ostream& os, const RegretRecord& r,
                             const std::vector<EventResult>& results) {
  os << "{\"type\":\"event\",\"event\":" << r.event << ",\"regret\":" << fmt12(r.regret)
     << ",\"cum_regret\":" << fmt12(r.cumulative)
     << ",\"online_value\":" << fmt12(r.online_value)
     << ",\"oracle_value\":" << fmt12(r.oracle_value) << ",\"optouts\":" << r.optouts
     << ",\"energy_kwh\":" << fmt12(r.energy_kwh)
     << ",\"failed\":" << (r.failed ? "true" : "false") << "}\n";
  write_step_transcript(os, r.event, results);
}

}  // namespace

void write_step_transcript(std::ostream& os, int event_index,
                           const std::vector<EventResult>& results) {
  for (const auto& res : results) {
    for (const auto& rec : res.transcript) {
      os << "{\"type\":\"step\",\"event\":" << event_index
         << ",\"customer\":" << rec.customer << ",\"step\":" << rec.step
         << ",\"theta_digest\":\"" << vec_digest(rec.theta_hat.data(), 6)
         << "\",\"u\":" << fmt12(rec.u) << ",\"z\":" << (rec.z ? 1 : 0)
         << ",\"belief_digest\":\"" << vec_digest(rec.mu.data(), 6) << "\",\"mu\":[";
      for (int i = 0; i < 6; ++i) os << (i ? "," : "") << fmt12(rec.mu[i]);
      os << "],\"tr_sigma\":" << fmt12(rec.tr_sigma) << "}\n";
    }
  }
}

CampaignResult run_campaign(const CampaignConfig& cc, const std::string& out_dir) {
  cc.validate();
  const StreamKey master{cc.master_seed};
  const PopulationFile pop =
      gen_population(cc.n, master.child(stream::population), cc.population);
  CampaignResult out;
  out.rho_used = cc.event.rho < 0.0 ? calibrate_rho(master.child(stream::calibrate), cc)
                                    : cc.event.rho;

  std::vector<Belief> beliefs(static_cast<std::size_t>(cc.n), cc.prior);

  OnlineConfig ocfg = cc.online;

  std::ofstream transcripts;
  const bool want_transcripts = !out_dir.empty() && cc.write_transcripts;
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  if (want_transcripts) {
    transcripts.open(out_dir + "/transcripts.jsonl", std::ios::binary);
    if (!transcripts) throw ParseError("cannot open transcripts.jsonl for writing");
  }

  double cum = 0.0;
  for (int m = 1; m <= cc.m_events; ++m) {
    const StreamKey ekey = master.child(stream::events).child(static_cast<std::uint64_t>(m));
    std::mt19937_64 xeng = ekey.child(stream::exogenous).engine();
    const ExogenousSeries exo = gen_exogenous(xeng, cc.event.T, cc.exogenous);

    EventConfig ec = cc.event;
    ec.rho = out.rho_used;
    if (ec.mode == Mode::soc2) {
      std::mt19937_64 teng = ekey.child(stream::target).engine();
      ec.L.resize(static_cast<std::size_t>(ec.T));
      for (int t = 0; t < ec.T; ++t)
        ec.L[static_cast<std::size_t>(t)] =
            cc.n * unif(teng, cc.l_per_customer_lo, cc.l_per_customer_hi);
    }

    std::vector<EventCustomer> customers;
    for (const auto& c : pop.customers) {
      EventCustomer e;
      e.id = c.id;
      e.theta_star = c.theta_star;
      e.model = c.thermal;
      e.u_init = baseline_power(c.thermal, ec.s_set, exo.s_out[0], ec.u_max).u;
      customers.push_back(e);
    }

    RegretRecord rec;
    rec.event = m;
    std::vector<EventResult> results;
    try {
      results = run_dr_event(customers, ec, exo, pop.scaling, beliefs, ekey, ocfg);

      std::vector<PlanContext> ctxs;
      std::vector<Trajectory> online_plans;
      for (std::size_t i = 0; i < customers.size(); ++i) {
        ctxs.push_back(make_plan_context(customers[i].theta_star, customers[i].model,
                                         ec, pop.scaling, exo, 1,
                                         initial_factors(ec, exo),
                                         customers[i].u_init));
        online_plans.push_back({results[i].planned_u, results[i].planned_l});
      }
      project_shares(online_plans, ec.L);
      rec.online_value = system_value(ctxs, online_plans);

      SolverConfig oscfg = cc.online.solver;
      oscfg.multi_start = oscfg.multi_start * cc.oracle_multistart_factor;
      oscfg.seed = ekey.child(stream::solver).key;
      const OracleResult oracle =
          oracle_control(ctxs, oscfg, ocfg.gamma, ocfg.dual_eps, 2 * ocfg.dual_kmax,
                         0.5 * ocfg.dual_res_tol, {online_plans});
      rec.oracle_value = oracle.value;
      rec.regret = rec.online_value - rec.oracle_value;
      rec.solver_warning = oracle.warning;
      for (const auto& r : results) {
        rec.solver_warning = rec.solver_warning || r.solver_warning;
        rec.energy_kwh += r.energy_kwh;
        if (r.opt_out_step > 0) rec.optouts += 1;
      }
      if (rec.regret < -1e-3) rec.solver_warning = true;
    } catch (const std::exception&) {
      rec.failed = true;
      out.any_failed = true;
    }
    cum += rec.regret;
    rec.cumulative = cum;
    out.records.push_back(rec);

    for (std::size_t b = 0; b < cc.baseline_deltas.size(); ++b) {
      out.baselines.push_back(baseline_setpoint_raise(
          cc.baseline_deltas[b], ec, exo, pop.scaling, customers,
          ekey.child(stream::baseline).child(b), m));
    }
    if (want_transcripts) append_event_transcript(transcripts, rec, results);
  }

  if (!out_dir.empty()) {
    write_records_csv(out_dir + "/records.csv", out.records);
    write_baselines_csv(out_dir + "/baselines.csv", out.baselines);
    const CampaignSummary s = summarize(out.records);
    std::ostringstream ss;
    ss << "{\"rho\":" << fmt12(out.rho_used)
       << ",\"any_failed\":" << (out.any_failed ? "true" : "false")
       << ",\"summary\":" << summary_json(s) << "}\n";
    write_text_file(out_dir + "/summary.json", ss.str());
  }
  return out;
}

void write_records_csv(const std::string& path, const std::vector<RegretRecord>& recs) {
  std::ostringstream ss;
  ss << "event,regret,cum_regret,optouts,energy_kwh\n";
  for (const auto& r : recs) ss << record_csv_row(r);
  write_text_file(path, ss.str());
}

std::vector<RegretRecord> read_records_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(f, line) ||
      (line != "event,regret,cum_regret,optouts,energy_kwh" &&
       line != "event,regret,cum_regret,optouts,energy_kwh\r"))
    throw ParseError(path + ": expected records.csv header");
  std::vector<RegretRecord> recs;
  while (std::getline(f, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    RegretRecord r;
    std::istringstream ss(line);
    char c1, c2, c3, c4;
    if (!(ss >> r.event >> c1 >> r.regret >> c2 >> r.cumulative >> c3 >> r.optouts >>
          c4 >> r.energy_kwh) ||
        c1 != ',' || c2 != ',' || c3 != ',' || c4 != ',')
      throw ParseError(path + ": malformed row '" + line + "'");
    recs.push_back(r);
  }
  return recs;
}

void write_baselines_csv(const std::string& path,
                         const std::vector<BaselineRecord>& recs) {
  std::ostringstream ss;
  ss << "event,delta_f,energy_kwh,optouts\n";
  for (const auto& r : recs)
    ss << r.event << ',' << fmt12(r.delta_f) << ',' << fmt12(r.energy_kwh) << ','
       << r.optouts << '\n';
  write_text_file(path, ss.str());
}

CampaignSummary summarize(const std::vector<RegretRecord>& recs) {
  if (recs.empty()) throw std::invalid_argument("summarize: no records");
  CampaignSummary s;
  const int M = static_cast<int>(recs.size());
  const int early_n = std::min(20, M);
  for (int i = 0; i < early_n; ++i) s.early_mean_regret += recs[i].regret;
  s.early_mean_regret /= early_n;
  const int late_n = std::max(1, M / 4);
  for (int i = M - late_n; i < M; ++i) s.late_mean_regret += recs[i].regret;
  s.late_mean_regret /= late_n;
  const int k40 = std::min(40, M);
  s.cum_rate_40 = recs[k40 - 1].cumulative / k40;
  s.cum_rate_end = recs[M - 1].cumulative / M;
  int n_energy = 0;
  for (const auto& r : recs) {
    s.total_optouts += r.optouts;
    if (r.event > 100 || M <= 100) {
      s.mean_energy_after_100 += r.energy_kwh;
      ++n_energy;
    }
  }
  if (n_energy > 0) s.mean_energy_after_100 /= n_energy;
  return s;
}

std::string summary_json(const CampaignSummary& s) {
  std::ostringstream ss;
  ss << "{\"early_mean_regret\":" << fmt12(s.early_mean_regret)
     << ",\"late_mean_regret\":" << fmt12(s.late_mean_regret)
     << ",\"cum_rate_40\":" << fmt12(s.cum_rate_40)
     << ",\"cum_rate_end\":" << fmt12(s.cum_rate_end)
     << ",\"mean_energy_after_100\":" << fmt12(s.mean_energy_after_100)
     << ",\"total_optouts\":" << s.total_optouts << "}";
  return ss.str();
}

namespace {

void parse_solver_json(const json& j, SolverConfig& s) {
  for (const auto& [key, val] : j.items()) {
    if (key == "max_iters") s.max_iters = val.get<int>();
    else if (key == "armijo_c") s.armijo_c = val.get<double>();
    else if (key == "backtrack") s.backtrack = val.get<double>();
    else if (key == "step_init") s.step_init = val.get<double>();
    else if (key == "max_backtracks") s.max_backtracks = val.get<int>();
    else if (key == "stall_tol") s.stall_tol = val.get<double>();
    else if (key == "multi_start") s.multi_start = val.get<int>();
    else if (key == "proj_tol") s.proj_tol = val.get<double>();
    else throw ParseError("solver config: unknown key '" + key + "'");
  }
}

void parse_online_json(const json& j, OnlineConfig& o) {
  for (const auto& [key, val] : j.items()) {
    if (key == "solver") parse_solver_json(val, o.solver);
    else if (key == "gamma") {
      for (const auto& [gk, gv] : val.items()) {
        if (gk == "a") o.gamma.a = gv.get<double>();
        else if (gk == "floor") o.gamma.floor = gv.get<double>();
        else if (gk == "scale") o.gamma.scale = gv.get<double>();
        else throw ParseError("gamma config: unknown key '" + gk + "'");
      }
    } else if (key == "dual_eps") o.dual_eps = val.get<double>();
    else if (key == "dual_kmax") o.dual_kmax = val.get<int>();
    else if (key == "dual_res_tol") o.dual_res_tol = val.get<double>();
    else if (key == "resolve_multi_start") o.resolve_multi_start = val.get<int>();
    else if (key == "warm_start") o.warm_start = val.get<bool>();
    else if (key == "transcripts") o.transcripts = val.get<bool>();
    else throw ParseError("online config: unknown key '" + key + "'");
  }
}

}  // namespace

CampaignConfig campaign_config_from_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw ParseError("campaign config: malformed JSON object");
  CampaignConfig cc;
  for (const auto& [key, val] : j.items()) {
    if (key == "n") cc.n = val.get<int>();
    else if (key == "m_events") cc.m_events = val.get<int>();
    else if (key == "master_seed") cc.master_seed = val.get<std::uint64_t>();
    else if (key == "event") cc.event = event_config_from_json_text(val.dump());
    else if (key == "population") {
      for (const auto& [pk, pv] : val.items()) {
        if (pk == "kappa") {
          cc.population.kappa_lo = pv.at(0).get<double>();
          cc.population.kappa_hi = pv.at(1).get<double>();
        } else if (pk == "eta") {
          cc.population.eta_lo = pv.at(0).get<double>();
          cc.population.eta_hi = pv.at(1).get<double>();
        } else {
          throw ParseError("population config: unknown key '" + pk + "'");
        }
      }
    } else if (key == "exogenous") {
      for (const auto& [xk, xv] : val.items()) {
        if (xk == "peak") {
          cc.exogenous.peak_lo = xv.at(0).get<double>();
          cc.exogenous.peak_hi = xv.at(1).get<double>();
        } else if (xk == "drop") {
          cc.exogenous.drop_lo = xv.at(0).get<double>();
          cc.exogenous.drop_hi = xv.at(1).get<double>();
        } else if (xk == "noise") {
          cc.exogenous.noise = xv.get<double>();
        } else {
          throw ParseError("exogenous config: unknown key '" + xk + "'");
        }
      }
    } else if (key == "online") {
      parse_online_json(val, cc.online);
    } else if (key == "prior") {
      for (const auto& [bk, bv] : val.items()) {
        if (bk == "mu") {
          if (!bv.is_array() || bv.size() != 6)
            throw ParseError("prior.mu must have 6 entries");
          for (int i = 0; i < 6; ++i) cc.prior.mu[i] = bv[i].get<double>();
        } else if (bk == "sigma_diag") {
          if (!bv.is_array() || bv.size() != 6)
            throw ParseError("prior.sigma_diag must have 6 entries");
          cc.prior.Sigma = Mat6::Zero();
          for (int i = 0; i < 6; ++i) cc.prior.Sigma(i, i) = bv[i].get<double>();
        } else {
          throw ParseError("prior config: unknown key '" + bk + "'");
        }
      }
    } else if (key == "baseline_deltas") {
      cc.baseline_deltas = val.get<std::vector<double>>();
    } else if (key == "l_per_customer") {
      cc.l_per_customer_lo = val.at(0).get<double>();
      cc.l_per_customer_hi = val.at(1).get<double>();
    } else if (key == "oracle_multistart_factor") {
      cc.oracle_multistart_factor = val.get<int>();
    } else if (key == "write_transcripts") {
      cc.write_transcripts = val.get<bool>();
    } else {
      throw ParseError("campaign config: unknown key '" + key + "'");
    }
  }
  cc.validate();
  return cc;
}

CampaignConfig load_campaign_config(const std::string& path) {
  try {
    return campaign_config_from_json_text(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace drflex
