#include "drflex/online.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "drflex/behavior.hpp"

namespace drflex {

void Belief::validate() const {
  if (!mu.allFinite() || !Sigma.allFinite())
    throw std::invalid_argument("Belief: non-finite entries");
  const double scale = std::max(1.0, Sigma.cwiseAbs().maxCoeff());
  if ((Sigma - Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw std::invalid_argument("Belief: Sigma not symmetric");
  Eigen::SelfAdjointEigenSolver<Mat6> es(Sigma, Eigen::EigenvaluesOnly);
  if (es.eigenvalues().minCoeff() <= 1e-12)
    throw std::invalid_argument("Belief: Sigma not positive definite");
}

Vec6 sample_params(std::mt19937_64& eng, const Belief& belief) {
  // Draw the standard normal vector first so the consumed random numbers do
  // not depend on how much jitter the factorization needs.
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec6 z;
  for (int i = 0; i < 6; ++i) z[i] = nd(eng);
  const Mat6 S = 0.5 * (belief.Sigma + belief.Sigma.transpose());
  double jitter = 0.0;
  while (true) {
    Eigen::LLT<Mat6> llt(S + jitter * Mat6::Identity());
    if (llt.info() == Eigen::Success) return belief.mu + llt.matrixL() * z;
    jitter = jitter == 0.0 ? 1e-12 : jitter * 10.0;
    if (jitter > 1e-6)
      throw std::runtime_error("sample_params: covariance factorization failed");
  }
}

void Observation::validate() const {
  if (!w_hat.allFinite()) throw std::invalid_argument("Observation: non-finite w_hat");
  if (w_hat[0] != 1.0) throw std::invalid_argument("Observation: w_hat[0] must be 1");
}

double jj_l(double xi) {
  const double ax = std::abs(xi);  // l is even in xi
  if (ax < 1e-6) return -0.125 + ax * ax / 96.0;
  return (0.5 - sigmoid(ax)) / (2.0 * ax);
}

VariationalResult variational_update(const Belief& prior, const Observation& obs,
                                     int iters) {
  obs.validate();
  if (iters < 1) throw std::invalid_argument("variational_update: iters must be >= 1");
  const Vec6& w = obs.w_hat;
  const double z = obs.z ? 1.0 : 0.0;
  const Vec6 v = prior.Sigma * w;       // Sigma0 w
  const double swx = w.dot(v);          // w' Sigma0 w
  const double m0 = w.dot(prior.mu);
  double xi = std::sqrt(std::max(swx + m0 * m0, 0.0));

  Belief post = prior;
  for (int it = 0; it < iters; ++it) {
    // Rank-1 precision update, resolved against the prior by Sherman-Morrison
    // so no 6x6 inversion is needed.
    const double c = 2.0 * std::abs(jj_l(xi));
    const double denom = 1.0 + c * swx;
    post.Sigma = prior.Sigma - (c / denom) * (v * v.transpose());
    post.mu = prior.mu + (((z - 0.5) - c * m0) / denom) * v;
    const double swp = w.dot(post.Sigma * w);
    const double mp = w.dot(post.mu);
    xi = std::sqrt(std::max(swp + mp * mp, 0.0));
  }
  post.Sigma = (0.5 * (post.Sigma + post.Sigma.transpose())).eval();

  VariationalResult res;
  res.xi = xi;
  Eigen::SelfAdjointEigenSolver<Mat6> es(post.Sigma, Eigen::EigenvaluesOnly);
  const double min_eig = es.eigenvalues().minCoeff();
  if (min_eig <= 1e-12) {
    post.Sigma += (1e-10 + std::max(0.0, -min_eig)) * Mat6::Identity();
    res.repaired = true;
  }
  res.belief = post;
  return res;
}

namespace {

struct CustomerState {
  EnvFactors factors;     // realized state at the current step boundary
  double u_prev = 0.0;    // power applied at the previous step
  OptOutState opt;
  Eigen::VectorXd warm_u; // remaining-horizon tail of the last plan
  Eigen::VectorXd warm_l;
  std::mt19937_64 sample_eng;
  std::mt19937_64 optout_eng;
};

SolverConfig step_solver_cfg(const OnlineConfig& ocfg, StreamKey solver_key, int t,
                             bool warm_available) {
  SolverConfig cfg = ocfg.solver;
  cfg.seed = solver_key.child(static_cast<std::uint64_t>(t)).key;
  if (warm_available && ocfg.resolve_multi_start > 0)
    cfg.multi_start = ocfg.resolve_multi_start;
  return cfg;
}

}  // namespace

EnvFactors initial_factors(const EventConfig& cfg, const ExogenousSeries& exo) {
  EnvFactors f;
  f.s = cfg.s_set;
  f.d = 0.0;
  f.r = cfg.r0;
  f.s_out = exo.s_out[0];
  f.price = exo.price[0];
  return f;
}

std::vector<EventResult> run_dr_event(const std::vector<EventCustomer>& customers,
                                      const EventConfig& cfg, const ExogenousSeries& exo,
                                      const FactorScaling& scaling,
                                      std::vector<Belief>& beliefs, StreamKey event_key,
                                      const OnlineConfig& ocfg) {
  cfg.validate();
  exo.validate(cfg.T);
  scaling.validate();
  ocfg.solver.validate();
  if (customers.empty()) throw std::invalid_argument("run_dr_event: no customers");
  if (beliefs.size() != customers.size())
    throw std::invalid_argument("run_dr_event: beliefs size != customers size");
  for (const auto& b : beliefs) b.validate();
  for (std::size_t i = 0; i < customers.size(); ++i) {
    customers[i].theta_star.validate();
    if (std::isnan(customers[i].u_init))
      throw std::invalid_argument("run_dr_event: customer u_init must be resolved");
    for (std::size_t j = i + 1; j < customers.size(); ++j)
      if (customers[i].id == customers[j].id)
        throw std::invalid_argument("run_dr_event: duplicate customer ids");
  }
  const int N = static_cast<int>(customers.size());
  const int T = cfg.T;

  std::vector<CustomerState> st(N);
  std::vector<EventResult> out(N);
  for (int i = 0; i < N; ++i) {
    const StreamKey ck = event_key.child(static_cast<std::uint64_t>(customers[i].id));
    st[i].factors = initial_factors(cfg, exo);
    st[i].u_prev = customers[i].u_init;
    st[i].sample_eng = ck.child(stream::sample).engine();
    st[i].optout_eng = ck.child(stream::optout).engine();

    out[i].customer_id = customers[i].id;
    out[i].applied_u = Eigen::VectorXd::Zero(T);
    out[i].planned_u = Eigen::VectorXd::Zero(T);
    if (cfg.mode == Mode::soc2) {
      out[i].applied_l = Eigen::VectorXd::Zero(T);
      out[i].planned_l = Eigen::VectorXd::Zero(T);
    }
    out[i].factors.push_back(st[i].factors);
    out[i].p_true = Eigen::VectorXd::Zero(T);
  }

  Eigen::VectorXd lambda_warm;  // soc2 multiplier carried across steps

  for (int t = 1; t <= T; ++t) {
    const int h = T - t + 1;
    std::vector<double> u_step(N);   // power chosen for this step
    std::vector<double> l_step(N, 0.0);
    std::vector<Vec6> theta_draws(N, Vec6::Zero());

    // u_set at this step, needed for both opted-out customers and fallbacks
    std::vector<double> u_set_t(N);
    for (int i = 0; i < N; ++i)
      u_set_t[i] =
          baseline_power(customers[i].model, cfg.s_set, exo.s_out[t], cfg.u_max).u;

    std::vector<int> active;
    for (int i = 0; i < N; ++i)
      if (st[i].opt.in) active.push_back(i);

    if (cfg.mode == Mode::soc1) {
      for (int i : active) {
        theta_draws[i] = sample_params(st[i].sample_eng, beliefs[i]);
        BehaviorParams theta{theta_draws[i]};
        PlanContext ctx = make_plan_context(theta, customers[i].model, cfg, scaling, exo,
                                            t, st[i].factors, st[i].u_prev);
        const bool warm = ocfg.warm_start && st[i].warm_u.size() == h;
        std::vector<Eigen::VectorXd> extra;
        if (warm) extra.push_back(st[i].warm_u);
        const StreamKey sk =
            event_key.child(static_cast<std::uint64_t>(customers[i].id))
                .child(stream::solver);
        const LocalSolution sol =
            solve_local_soc1(ctx, step_solver_cfg(ocfg, sk, t, warm), extra);
        out[i].solver_warning = out[i].solver_warning || sol.line_search_failed;
        u_step[i] = sol.u[0];
        st[i].warm_u = sol.u.tail(h - 1 > 0 ? h - 1 : 0);
      }
    } else if (!active.empty()) {
      // Remaining tracking target minus what opted-out customers consume at
      // their setpoint over the remaining horizon.
      Eigen::VectorXd L_rem(h);
      for (int j = 0; j < h; ++j) {
        double l = cfg.L[t + j - 1];
        for (int i = 0; i < N; ++i)
          if (!st[i].opt.in)
            l -= baseline_power(customers[i].model, cfg.s_set, exo.s_out[t + j],
                                cfg.u_max)
                     .u;
        L_rem[j] = l;
      }
      std::vector<std::unique_ptr<LocalAgent>> agents;
      std::vector<AgentEndpoint*> eps;
      std::vector<PlanContext> actx;
      for (int i : active) {
        theta_draws[i] = sample_params(st[i].sample_eng, beliefs[i]);
        BehaviorParams theta{theta_draws[i]};
        PlanContext ctx = make_plan_context(theta, customers[i].model, cfg, scaling, exo,
                                            t, st[i].factors, st[i].u_prev);
        const bool warm = ocfg.warm_start && st[i].warm_u.size() == h &&
                          st[i].warm_l.size() == h;
        const StreamKey sk =
            event_key.child(static_cast<std::uint64_t>(customers[i].id))
                .child(stream::solver);
        actx.push_back(ctx);
        auto agent = std::make_unique<LocalAgent>(
            std::move(ctx), step_solver_cfg(ocfg, sk, t, warm), customers[i].id);
        if (warm) agent->prime({st[i].warm_u, st[i].warm_l});
        eps.push_back(agent.get());
        agents.push_back(std::move(agent));
      }
      Eigen::VectorXd l0;
      if (lambda_warm.size() == h) l0 = lambda_warm;

      // Primal recovery: the subgradient multiplier path oscillates on the
      // nonconvex locals and its final iterate is often poor. Track the
      // share-projected iterate that scores best on the sampled-model system
      // objective and act on that plan instead of the last one.
      const std::size_t na = agents.size();
      const std::vector<double> L_rem_v(L_rem.data(), L_rem.data() + h);
      const Eigen::VectorXd lam_zero = Eigen::VectorXd::Zero(h);
      std::vector<Trajectory> best;
      Eigen::VectorXd best_lambda;
      double best_v = std::numeric_limits<double>::infinity();
      const DualObserver recover = [&](int, const Eigen::VectorXd& lam, double) {
        std::vector<Trajectory> iter(na);
        for (std::size_t a = 0; a < na; ++a) {
          const LocalSolution& s = agents[a]->current();
          iter[a] = {s.u, s.l};
        }
        project_shares(iter, L_rem_v);
        double v = 0.0;
        for (std::size_t a = 0; a < na; ++a)
          v += plan_value(actx[a], iter[a].u, iter[a].l, lam_zero);
        if (v < best_v) {
          best_v = v;
          best = std::move(iter);
          best_lambda = lam;
        }
      };
      const DualResult dual = run_dual_gradient(eps, L_rem, ocfg.gamma, ocfg.dual_eps,
                                                ocfg.dual_kmax, ocfg.dual_res_tol, l0,
                                                recover);
      if (dual.aborted || best.empty()) {
        // Safe fallback: run this step at the setpoint baseline and let the
        // next step re-plan; flagged on every still-in customer.
        for (int i : active) {
          out[i].solver_warning = true;
          u_step[i] = std::clamp(u_set_t[i], std::max(0.0, st[i].u_prev - cfg.du_max),
                                 std::min(cfg.u_max, st[i].u_prev + cfg.du_max));
          l_step[i] = u_set_t[i];
          st[i].warm_u.resize(0);
          st[i].warm_l.resize(0);
        }
        lambda_warm.resize(0);
      } else {
        for (std::size_t a = 0; a < na; ++a) {
          const int i = active[a];
          out[i].solver_warning = out[i].solver_warning || agents[a]->any_warning();
          u_step[i] = best[a].u[0];
          l_step[i] = best[a].l[0];
          st[i].warm_u = best[a].u.tail(h - 1 > 0 ? h - 1 : 0);
          st[i].warm_l = best[a].l.tail(h - 1 > 0 ? h - 1 : 0);
        }
        lambda_warm = best_lambda.tail(h - 1 > 0 ? h - 1 : 0);
      }
    }

    // Apply the action, advance every customer's factors, observe and update.
    for (int i = 0; i < N; ++i) {
      const bool was_in = st[i].opt.in;
      const double u_apply = was_in ? u_step[i] : u_set_t[i];
      st[i].factors = step_factors(st[i].factors, u_apply, u_set_t[i], exo.s_out[t],
                                   exo.price[t - 1], cfg, customers[i].model);
      out[i].applied_u[t - 1] = u_apply;
      if (cfg.mode == Mode::soc2)
        out[i].applied_l[t - 1] = was_in ? l_step[i] : u_set_t[i];
      if (was_in) {
        out[i].planned_u[t - 1] = u_apply;
        if (cfg.mode == Mode::soc2) out[i].planned_l[t - 1] = l_step[i];
      }
      out[i].factors.push_back(st[i].factors);
      out[i].energy_kwh += cfg.dt * (u_set_t[i] - u_apply);
      st[i].u_prev = u_apply;

      const Vec6 w_hat = scaling.normalized(st[i].factors);
      const double p = stay_in_prob(customers[i].theta_star, w_hat);
      out[i].p_true[t - 1] = p;
      if (!was_in) continue;

      st[i].opt = transition(st[i].optout_eng, st[i].opt, p, t);
      const bool z = st[i].opt.in;
      const VariationalResult vr = variational_update(beliefs[i], {w_hat, z});
      beliefs[i] = vr.belief;
      out[i].belief_repaired = out[i].belief_repaired || vr.repaired;
      out[i].n_updates += 1;
      out[i].snapshots.push_back(beliefs[i]);
      if (ocfg.transcripts) {
        StepRecord rec;
        rec.customer = customers[i].id;
        rec.step = t;
        rec.theta_hat = theta_draws[i];
        rec.u = u_apply;
        rec.z = z;
        rec.mu = beliefs[i].mu;
        rec.tr_sigma = beliefs[i].Sigma.trace();
        out[i].transcript.push_back(rec);
      }
      if (!z) {
        out[i].opt_out_step = st[i].opt.opt_out_step;
        // Extend the intended plan past the opt-out with the tail of the
        // last MPC solve (or a feasible ramp toward u_set if unavailable).
        const int rem = T - t;
        if (rem > 0) {
          Eigen::VectorXd tail;
          if (st[i].warm_u.size() == rem) {
            tail = st[i].warm_u;
          } else {
            Eigen::VectorXd uset_tail(rem);
            for (int j = 0; j < rem; ++j)
              uset_tail[j] = baseline_power(customers[i].model, cfg.s_set,
                                            exo.s_out[t + 1 + j], cfg.u_max)
                                 .u;
            tail = project_feasible(uset_tail, u_apply, cfg.u_max, cfg.du_max);
          }
          out[i].planned_u.tail(rem) = tail;
          if (cfg.mode == Mode::soc2)
            out[i].planned_l.tail(rem) =
                st[i].warm_l.size() == rem ? st[i].warm_l : tail;
        }
        st[i].warm_u.resize(0);
        st[i].warm_l.resize(0);
      }
    }
  }
  return out;
}

}  // namespace drflex
