#include "drflex/solver.hpp"

#include <cmath>
#include <random>

namespace drflex {

void SolverConfig::validate() const {
  if (max_iters < 1 || multi_start < 1 || max_backtracks < 0)
    throw std::invalid_argument("SolverConfig: counts must be positive");
  if (!(armijo_c > 0) || !(backtrack > 0) || backtrack >= 1.0 || !(step_init > 0) ||
      !(stall_tol >= 0) || !(proj_tol > 0))
    throw std::invalid_argument("SolverConfig: invalid tolerances");
}

Eigen::VectorXd project_feasible(const Eigen::VectorXd& u, double u_prev, double u_max,
                                 double du_max, double tol) {
  const int h = static_cast<int>(u.size());
  if (h == 0) return u;
  // Per-coordinate box; the u_prev rate constraint folds into coordinate 0.
  Eigen::VectorXd lo = Eigen::VectorXd::Zero(h), hi = Eigen::VectorXd::Constant(h, u_max);
  lo[0] = std::max(0.0, u_prev - du_max);
  hi[0] = std::min(u_max, u_prev + du_max);

  Eigen::VectorXd x = u;
  Eigen::VectorXd box_corr = Eigen::VectorXd::Zero(h);
  Eigen::MatrixXd rate_corr = Eigen::MatrixXd::Zero(2, std::max(h - 1, 1));
  const double inner_tol = std::min(tol, 1e-10);
  for (int cycle = 0; cycle < 2000; ++cycle) {
    double moved = 0.0;
    // box set
    for (int t = 0; t < h; ++t) {
      const double y = x[t] + box_corr[t];
      const double px = std::clamp(y, lo[t], hi[t]);
      box_corr[t] = y - px;
      moved = std::max(moved, std::abs(px - x[t]));
      x[t] = px;
    }
    // pairwise rate sets
    for (int t = 1; t < h; ++t) {
      double y0 = x[t - 1] + rate_corr(0, t - 1);
      double y1 = x[t] + rate_corr(1, t - 1);
      double p0 = y0, p1 = y1;
      const double gap = y1 - y0;
      if (gap > du_max) {
        const double shift = 0.5 * (gap - du_max);
        p0 = y0 + shift;
        p1 = y1 - shift;
      } else if (gap < -du_max) {
        const double shift = 0.5 * (-gap - du_max);
        p0 = y0 - shift;
        p1 = y1 + shift;
      }
      rate_corr(0, t - 1) = y0 - p0;
      rate_corr(1, t - 1) = y1 - p1;
      moved = std::max({moved, std::abs(p0 - x[t - 1]), std::abs(p1 - x[t])});
      x[t - 1] = p0;
      x[t] = p1;
    }
    if (moved <= inner_tol) break;
  }
  // Exact snap: clamp into the box, then clamp each step into the rate
  // interval around its predecessor (non-empty because boxes overlap).
  double prev = u_prev;
  for (int t = 0; t < h; ++t) {
    double v = std::clamp(x[t], lo[t], hi[t]);
    v = std::clamp(v, std::max(0.0, prev - du_max), std::min(u_max, prev + du_max));
    x[t] = v;
    prev = v;
  }
  return x;
}

Eigen::VectorXd project_feasible(const Eigen::VectorXd& u, const EventConfig& cfg) {
  cfg.validate();
  if (cfg.auto_u_init())
    throw std::invalid_argument("project_feasible: u_init unresolved (NaN)");
  return project_feasible(u, cfg.u_init, cfg.u_max, cfg.du_max);
}

namespace {

// Generic projected-gradient descent with Armijo backtracking. Objective and
// gradient are supplied as callables over the stacked variable.
template <typename FnVal, typename FnGrad, typename FnProj>
LocalSolution pg_minimize(Eigen::VectorXd x0, const FnVal& fval, const FnGrad& fgrad,
                          const FnProj& proj, const SolverConfig& cfg) {
  LocalSolution sol;
  Eigen::VectorXd x = proj(x0);
  double fx = fval(x);
  double step = cfg.step_init;
  int stall = 0;
  int it = 0;
  Eigen::VectorXd g, xbar, d, cand;
  for (; it < cfg.max_iters && stall < 3; ++it) {
    g = fgrad(x);
    // One projection per iteration; backtrack along the feasible segment
    // x + beta (xbar - x) (the set is convex, so every point stays feasible).
    xbar = proj(x - step * g);
    d = xbar - x;
    if (d.lpNorm<Eigen::Infinity>() <= 1e-14) break;  // stationary
    const double gd = g.dot(d);  // < 0 for any nonzero projected step
    double beta = 1.0;
    bool accepted = false;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      cand = x + beta * d;
      const double fc = fval(cand);
      if (fc <= fx + cfg.armijo_c * beta * gd) {
        const double drop = fx - fc;
        x.swap(cand);
        fx = fc;
        stall = (drop <= cfg.stall_tol * (1.0 + std::abs(fx))) ? stall + 1 : 0;
        step = std::clamp(step * (beta >= 1.0 ? 2.0 : beta * 2.0), 1e-12, 1e3);
        accepted = true;
        break;
      }
      beta *= cfg.backtrack;
      if (beta < 1e-12) break;
    }
    if (!accepted) {
      sol.line_search_failed = true;
      break;
    }
  }
  sol.u = std::move(x);
  sol.value = fx;
  sol.iters = it;
  return sol;
}

}  // namespace

LocalSolution solve_local_soc1(const PlanContext& ctx, const SolverConfig& cfg,
                               const std::vector<Eigen::VectorXd>& extra_starts) {
  cfg.validate();
  ctx.validate();
  const int h = ctx.horizon();
  const auto proj = [&](const Eigen::VectorXd& v) {
    return project_feasible(v, ctx.u_prev, ctx.cfg.u_max, ctx.cfg.du_max, cfg.proj_tol);
  };
  const auto fval = [&](const Eigen::VectorXd& v) { return plan_value(ctx, v); };
  const auto fgrad = [&](const Eigen::VectorXd& v) { return objective_gradient(ctx, v).du; };

  std::vector<Eigen::VectorXd> starts;
  starts.push_back(ctx.u_set);
  if (cfg.multi_start >= 2) starts.push_back(Eigen::VectorXd::Zero(h));
  std::mt19937_64 eng(cfg.seed ^ 0xa2c5b9d17e3f8641ULL);
  std::uniform_real_distribution<double> unif(0.0, ctx.cfg.u_max);
  while (static_cast<int>(starts.size()) < cfg.multi_start) {
    Eigen::VectorXd r(h);
    for (int j = 0; j < h; ++j) r[j] = unif(eng);
    starts.push_back(std::move(r));
  }
  for (const auto& s : extra_starts) starts.push_back(s);

  LocalSolution best;
  bool have = false;
  bool any_ls_fail = false;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    LocalSolution s = pg_minimize(starts[i], fval, fgrad, proj, cfg);
    s.start_index = static_cast<int>(i);
    any_ls_fail = any_ls_fail || s.line_search_failed;
    if (!have || s.value < best.value) {
      best = std::move(s);
      have = true;
    }
  }
  best.line_search_failed = any_ls_fail;
  return best;
}

LocalSolution solve_local_soc2(const PlanContext& ctx, const Eigen::VectorXd& lambda,
                               const SolverConfig& cfg,
                               const std::vector<Trajectory>& extra_starts) {
  cfg.validate();
  ctx.validate();
  const int h = ctx.horizon();
  if (lambda.size() != h)
    throw std::invalid_argument("solve_local_soc2: lambda length != horizon");

  // Stacked variable x = [u; l].
  const auto proj = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd out(2 * h);
    out.head(h) = project_feasible(x.head(h), ctx.u_prev, ctx.cfg.u_max, ctx.cfg.du_max,
                                   cfg.proj_tol);
    out.tail(h) = x.tail(h).cwiseMax(0.0);
    return out;
  };
  const auto fval = [&](const Eigen::VectorXd& x) {
    return plan_value(ctx, x.head(h), x.tail(h), lambda);
  };
  const auto fgrad = [&](const Eigen::VectorXd& x) {
    const ObjGrad g = objective_gradient(ctx, x.head(h), x.tail(h), lambda);
    Eigen::VectorXd out(2 * h);
    out.head(h) = g.du;
    out.tail(h) = g.dl;
    return out;
  };

  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd s0(2 * h);
    s0.head(h) = ctx.u_set;
    s0.tail(h) = ctx.u_set;
    starts.push_back(std::move(s0));
  }
  if (cfg.multi_start >= 2) starts.push_back(Eigen::VectorXd::Zero(2 * h));
  std::mt19937_64 eng(cfg.seed ^ 0xa2c5b9d17e3f8641ULL);
  std::uniform_real_distribution<double> unif(0.0, ctx.cfg.u_max);
  while (static_cast<int>(starts.size()) < cfg.multi_start) {
    Eigen::VectorXd r(2 * h);
    for (int j = 0; j < 2 * h; ++j) r[j] = unif(eng);
    starts.push_back(std::move(r));
  }
  for (const auto& tr : extra_starts) {
    Eigen::VectorXd s(2 * h);
    s.head(h) = tr.u;
    s.tail(h) = tr.l.size() == h ? tr.l : Eigen::VectorXd(tr.u);
    starts.push_back(std::move(s));
  }

  LocalSolution best;
  bool have = false;
  bool any_ls_fail = false;
  for (std::size_t i = 0; i < starts.size(); ++i) {
    LocalSolution s = pg_minimize(starts[i], fval, fgrad, proj, cfg);
    s.start_index = static_cast<int>(i);
    any_ls_fail = any_ls_fail || s.line_search_failed;
    if (!have || s.value < best.value) {
      best = std::move(s);
      have = true;
    }
  }
  best.line_search_failed = any_ls_fail;
  best.l = best.u.tail(h);
  best.u = Eigen::VectorXd(best.u.head(h));
  return best;
}

LocalAgent::LocalAgent(PlanContext ctx, SolverConfig cfg, int id)
    : ctx_(std::move(ctx)), cfg_(cfg), id_(id) {
  ctx_.validate();
  if (ctx_.cfg.mode != Mode::soc2)
    throw std::invalid_argument("LocalAgent: context must be in soc2 mode");
}

LocalResult LocalAgent::solve_local(const Eigen::VectorXd& lambda) {
  std::vector<Trajectory> warm;
  SolverConfig cfg = cfg_;
  if (has_sol_) {
    warm.push_back({sol_.u, sol_.l});
    cfg.multi_start = 1;  // warm re-solve; full multi-start only on first call
  } else if (!primed_.empty()) {
    warm = primed_;
    cfg.multi_start = 1;
  }
  sol_ = solve_local_soc2(ctx_, lambda, cfg, warm);
  warned_ = warned_ || sol_.line_search_failed;
  has_sol_ = true;
  return {sol_.l, sol_.value};
}

void LocalAgent::prime(Trajectory warm) {
  primed_.clear();
  primed_.push_back(std::move(warm));
}

void LocalAgent::commit() {
  if (!has_sol_) throw std::logic_error("LocalAgent::commit before any solve");
  committed_ = true;
}

DualResult run_dual_gradient(const std::vector<AgentEndpoint*>& agents,
                             const Eigen::VectorXd& L, const GammaSchedule& gamma,
                             double eps, int k_max, double res_rel_tol,
                             const Eigen::VectorXd& lambda0,
                             const DualObserver& observer) {
  if (agents.empty()) throw std::invalid_argument("run_dual_gradient: no agents");
  const int h = static_cast<int>(L.size());
  if (lambda0.size() != 0 && lambda0.size() != h)
    throw std::invalid_argument("run_dual_gradient: lambda0 length mismatch");
  DualResult out;
  out.lambda = lambda0.size() == h ? lambda0 : Eigen::VectorXd::Zero(h);
  const double Lnorm = std::max(L.norm(), 1e-12);
  for (int k = 1; k <= k_max; ++k) {
    Eigen::VectorXd sum_l = Eigen::VectorXd::Zero(h);
    for (AgentEndpoint* a : agents) {
      LocalResult r;
      try {
        r = a->solve_local(out.lambda);
      } catch (const std::exception&) {
        out.aborted = true;
        return out;  // partial history, no commit
      }
      if (r.l.size() != h) {
        out.aborted = true;
        return out;
      }
      sum_l += r.l;
    }
    const Eigen::VectorXd res = sum_l - L;
    out.residual.push_back(res.norm());
    out.iters = k;
    if (observer) observer(k, out.lambda, res.norm());
    const Eigen::VectorXd dlambda = gamma(k) * res;
    out.lambda += dlambda;
    if (dlambda.norm() <= eps) {
      out.converged = true;
      break;
    }
    if (res_rel_tol > 0.0 && res.norm() <= res_rel_tol * Lnorm) {
      out.converged = true;
      break;
    }
  }
  for (AgentEndpoint* a : agents) a->commit();
  return out;
}

void project_shares(std::vector<Trajectory>& plans, const std::vector<double>& L) {
  if (plans.empty()) return;
  const int h = static_cast<int>(L.size());
  if (plans[0].l.size() == 0) {  // soc1 plan set
    for (const auto& p : plans)
      if (p.l.size() != 0) throw std::invalid_argument("project_shares: mixed plan set");
    return;
  }
  for (const auto& p : plans)
    if (p.l.size() != h) throw std::invalid_argument("project_shares: l length mismatch");
  const int n = static_cast<int>(plans.size());
  for (int t = 0; t < h; ++t) {
    if (!(L[t] >= 0.0)) throw std::invalid_argument("project_shares: negative target");
    std::vector<bool> active(n, true);
    for (int i = 0; i < n; ++i)
      if (plans[i].l[t] < 0.0) plans[i].l[t] = 0.0;
    // Spread the step residual equally over the active set; entries clipped
    // at zero leave the set. Terminates in at most n rounds.
    for (int round = 0; round < n; ++round) {
      double sum = 0.0;
      int n_active = 0;
      for (int i = 0; i < n; ++i) {
        sum += plans[i].l[t];
        if (active[i]) ++n_active;
      }
      const double gap = L[t] - sum;
      if (std::abs(gap) <= 1e-12 * std::max(1.0, L[t]) || n_active == 0) break;
      const double shift = gap / n_active;
      bool clipped = false;
      for (int i = 0; i < n; ++i) {
        if (!active[i]) continue;
        plans[i].l[t] += shift;
        if (plans[i].l[t] < 0.0) {
          plans[i].l[t] = 0.0;
          active[i] = false;
          clipped = true;
        }
      }
      if (!clipped) break;
    }
  }
}

}  // namespace drflex
