#include "drflex/objective.hpp"

#include <cmath>

namespace drflex {

void PlanContext::validate() const {
  cfg.validate();
  scaling.validate();
  theta.validate();
  if (start_step < 1 || start_step > cfg.T)
    throw std::invalid_argument("PlanContext: start_step outside [1, T]");
  const int h = horizon();
  if (u_set.size() != h || s_out.size() != h || price.size() != h)
    throw std::invalid_argument("PlanContext: series length != remaining horizon");
  if (!std::isfinite(start.s) || !std::isfinite(start.d) || !std::isfinite(start.r) ||
      !std::isfinite(start.s_out) || !std::isfinite(u_prev))
    throw std::invalid_argument("PlanContext: non-finite start state");
}

PlanContext make_plan_context(const BehaviorParams& theta, const ThermalModel& model,
                              const EventConfig& cfg, const FactorScaling& scaling,
                              const ExogenousSeries& exo, int start_step,
                              const EnvFactors& start, double u_prev) {
  cfg.validate();
  exo.validate(cfg.T);
  if (start_step < 1 || start_step > cfg.T)
    throw std::invalid_argument("make_plan_context: start_step outside [1, T]");
  PlanContext ctx;
  ctx.theta = theta;
  ctx.model = model;
  ctx.cfg = cfg;
  ctx.scaling = scaling;
  ctx.start_step = start_step;
  ctx.start = start;
  ctx.u_prev = u_prev;
  const int h = ctx.horizon();
  ctx.u_set.resize(h);
  ctx.s_out.resize(h);
  ctx.price.resize(h);
  for (int j = 0; j < h; ++j) {
    const int t = start_step + j;  // absolute step in [1, T]
    ctx.s_out[j] = exo.s_out[t];
    ctx.price[j] = exo.price[t - 1];
    ctx.u_set[j] = baseline_power(model, cfg.s_set, exo.s_out[t], cfg.u_max).u;
  }
  ctx.validate();
  return ctx;
}

Rollout rollout(const PlanContext& ctx, const Eigen::VectorXd& u, double feas_tol) {
  const int h = ctx.horizon();
  if (u.size() != h) throw std::invalid_argument("rollout: u length != remaining horizon");
  const Feasibility fb = check_feasible(u, ctx.u_prev, ctx.cfg.u_max, ctx.cfg.du_max, feas_tol);
  if (!fb.ok) throw std::invalid_argument("rollout: infeasible trajectory (" + fb.what + ")");

  Rollout ro;
  ro.s.resize(h);
  ro.d.resize(h);
  ro.r.resize(h);
  ro.logp.resize(h);
  ro.p.resize(h);
  ro.E.resize(h);
  EnvFactors f = ctx.start;
  double cum = 0.0;
  for (int j = 0; j < h; ++j) {
    f = step_factors(f, u[j], ctx.u_set[j], ctx.s_out[j], ctx.price[j], ctx.cfg, ctx.model);
    ro.s[j] = f.s;
    ro.d[j] = f.d;
    ro.r[j] = f.r;
    const double g = logit_of(ctx.theta, ctx.scaling.normalized(f));
    ro.logp[j] = log_sigmoid(g);
    ro.p[j] = sigmoid(g);
    cum += ro.logp[j];
    ro.E[j] = std::exp(cum);
  }
  return ro;
}

double soc1_value(const PlanContext& ctx, const Eigen::VectorXd& u) {
  const Rollout ro = rollout(ctx, u);
  const int h = ctx.horizon();
  double v = 0.0;
  for (int j = 0; j < h; ++j) {
    const double survive = (j == 0) ? 1.0 : ro.E[j - 1];
    v += ctx.cfg.dt * (u[j] - ctx.u_set[j]) * survive;
  }
  return v - ctx.cfg.rho * ro.E[h - 1];
}

double soc2_local_value(const PlanContext& ctx, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& l, const Eigen::VectorXd& lambda) {
  const int h = ctx.horizon();
  if (l.size() != h || lambda.size() != h)
    throw std::invalid_argument("soc2_local_value: l/lambda length != horizon");
  for (int j = 0; j < h; ++j)
    if (l[j] < 0.0) throw std::invalid_argument("soc2_local_value: negative l");
  const Rollout ro = rollout(ctx, u);
  double v = 0.0;
  for (int j = 0; j < h; ++j) {
    const double survive = (j == 0) ? 1.0 : ro.E[j - 1];
    const double a = ctx.u_set[j] - l[j];
    const double b = u[j] - ctx.u_set[j];
    v += ctx.cfg.dt * (a * a + (2.0 * a * b + b * b) * survive);
    v += lambda[j] * l[j];
  }
  return v - ctx.cfg.rho * ro.E[h - 1];
}

namespace {

// Logit as an affine function of the raw factors: offsets folded into the
// constant so per-step normalization reduces to a fused multiply-add.
struct LogitCoeffs {
  double t0, ts, td, tr, tso, tp;
  explicit LogitCoeffs(const BehaviorParams& theta, const FactorScaling& sc) {
    const Vec6& th = theta.theta;
    ts = th[1] / sc.s_scale;
    td = th[2] / sc.d_scale;
    tr = th[3] / sc.r_scale;
    tso = th[4] / sc.s_out_scale;
    tp = th[5] / sc.price_scale;
    t0 = th[0] - ts * sc.s_off - td * sc.d_off - tr * sc.r_off - tso * sc.s_out_off -
         tp * sc.price_off;
  }
  double operator()(double s, double d, double r, double s_out, double price) const {
    return t0 + ts * s + td * d + tr * r + tso * s_out + tp * price;
  }
};

}  // namespace

double plan_value(const PlanContext& ctx, const Eigen::Ref<const Eigen::VectorXd>& u,
                  const Eigen::Ref<const Eigen::VectorXd>& l,
                  const Eigen::Ref<const Eigen::VectorXd>& lambda) {
  const bool soc2 = ctx.cfg.mode == Mode::soc2;
  const int h = ctx.horizon();
  const double dt = ctx.cfg.dt;
  double cum = 0.0;      // cumulative log survival
  double survive = 1.0;  // E[j-1]
  double v = 0.0;
  if (const auto* lin = std::get_if<LinearThermal>(&ctx.model)) {
    // Fused scalar recursion (same math as step_factors + logit_of).
    const double kappa = lin->kappa, eta = lin->eta;
    const double r_inc = ctx.cfg.r1 * ctx.cfg.u_max, r2dt = ctx.cfg.r2 * ctx.cfg.dt;
    const double s_set = ctx.cfg.s_set;
    const bool heating = ctx.cfg.heating;
    const LogitCoeffs lc(ctx.theta, ctx.scaling);
    double s = ctx.start.s, d = ctx.start.d, r = ctx.start.r, s_out = ctx.start.s_out;
    for (int j = 0; j < h; ++j) {
      const double uj = u[j], us = ctx.u_set[j];
      s += kappa * (s_out - s) + eta * uj;
      const double dev = heating ? std::max(s_set - s, 0.0) : std::max(s - s_set, 0.0);
      d += dt * dev * dev;
      r += r_inc + r2dt * std::abs(us - uj);
      s_out = ctx.s_out[j];
      if (!soc2) {
        v += dt * (uj - us) * survive;
      } else {
        const double a = us - l[j];
        const double b = uj - us;
        v += dt * (a * a + (2.0 * a * b + b * b) * survive) + lambda[j] * l[j];
      }
      cum += log_sigmoid(lc(s, d, r, s_out, ctx.price[j]));
      survive = std::exp(cum);
    }
    return v - ctx.cfg.rho * survive;
  }
  EnvFactors f = ctx.start;
  for (int j = 0; j < h; ++j) {
    f = step_factors(f, u[j], ctx.u_set[j], ctx.s_out[j], ctx.price[j], ctx.cfg, ctx.model);
    if (!soc2) {
      v += dt * (u[j] - ctx.u_set[j]) * survive;
    } else {
      const double a = ctx.u_set[j] - l[j];
      const double b = u[j] - ctx.u_set[j];
      v += dt * (a * a + (2.0 * a * b + b * b) * survive) + lambda[j] * l[j];
    }
    cum += log_sigmoid(logit_of(ctx.theta, ctx.scaling.normalized(f)));
    survive = std::exp(cum);
  }
  return v - ctx.cfg.rho * survive;  // survive == E[h-1] after the loop
}

namespace {

// Linear-dynamics specialization of objective_gradient: identical math with the
// variant dispatch fused away and only the arrays the reverse sweep needs.
ObjGrad gradient_linear(const PlanContext& ctx, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& l, const Eigen::VectorXd& lambda,
                        const LinearThermal& lin) {
  const bool soc2 = ctx.cfg.mode == Mode::soc2;
  const int h = ctx.horizon();
  const double dt = ctx.cfg.dt;
  const double kappa = lin.kappa, eta = lin.eta;
  const double s_set = ctx.cfg.s_set;
  const bool heating = ctx.cfg.heating;
  const Feasibility fb = check_feasible(u, ctx.u_prev, ctx.cfg.u_max, ctx.cfg.du_max, 1e-7);
  if (!fb.ok) throw std::invalid_argument("rollout: infeasible trajectory (" + fb.what + ")");
  const LogitCoeffs lc(ctx.theta, ctx.scaling);

  ObjGrad out;
  out.du.setZero(h);
  if (soc2) out.dl.setZero(h);

  Eigen::VectorXd sv(h), pv(h), Ev(h), term(h);
  {
    const double r_inc = ctx.cfg.r1 * ctx.cfg.u_max, r2dt = ctx.cfg.r2 * dt;
    double s = ctx.start.s, d = ctx.start.d, r = ctx.start.r, s_out = ctx.start.s_out;
    double cum = 0.0, survive = 1.0, value = 0.0;
    for (int j = 0; j < h; ++j) {
      const double uj = u[j], us = ctx.u_set[j];
      s += kappa * (s_out - s) + eta * uj;
      const double dev = heating ? std::max(s_set - s, 0.0) : std::max(s - s_set, 0.0);
      d += dt * dev * dev;
      r += r_inc + r2dt * std::abs(us - uj);
      s_out = ctx.s_out[j];
      sv[j] = s;
      const double b = uj - us;
      if (!soc2) {
        term[j] = dt * b;
        value += term[j] * survive;
      } else {
        const double a = us - l[j];
        term[j] = dt * (2.0 * a * b + b * b);
        value += dt * a * a + term[j] * survive + lambda[j] * l[j];
        out.dl[j] = dt * (-2.0 * a - 2.0 * b * survive) + lambda[j];
      }
      const double g = lc(s, d, r, s_out, ctx.price[j]);
      pv[j] = sigmoid(g);
      cum += log_sigmoid(g);
      survive = std::exp(cum);
      Ev[j] = survive;
    }
    out.value = value - ctx.cfg.rho * survive;
  }

  Eigen::VectorXd c(h);
  double suffix = -ctx.cfg.rho * Ev[h - 1];
  for (int k = h - 1; k >= 0; --k) {
    c[k] = (1.0 - pv[k]) * suffix;
    if (k > 0) suffix += term[k] * Ev[k - 1];
  }

  double lam_s = 0.0, lam_d = 0.0, lam_r = 0.0;
  for (int j = h - 1; j >= 0; --j) {
    lam_d += c[j] * lc.td;
    lam_r += c[j] * lc.tr;
    const double dev = heating ? std::min(sv[j] - s_set, 0.0) : std::max(sv[j] - s_set, 0.0);
    const double s_adj = c[j] * lc.ts + lam_d * 2.0 * dt * dev + lam_s;
    const double survive = (j == 0) ? 1.0 : Ev[j - 1];
    double direct;
    if (!soc2) {
      direct = dt * survive;
    } else {
      const double a = ctx.u_set[j] - l[j];
      const double b = u[j] - ctx.u_set[j];
      direct = dt * (2.0 * a + 2.0 * b) * survive;
    }
    const double gap = ctx.u_set[j] - u[j];
    const double sgn = (gap > 0.0) ? 1.0 : (gap < 0.0 ? -1.0 : 0.0);
    out.du[j] = direct + s_adj * eta + lam_r * ctx.cfg.r2 * dt * (-sgn);
    lam_s = s_adj * (1.0 - kappa);
  }
  return out;
}

}  // namespace

ObjGrad objective_gradient(const PlanContext& ctx, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& l, const Eigen::VectorXd& lambda) {
  const bool soc2 = ctx.cfg.mode == Mode::soc2;
  const int h = ctx.horizon();
  if (soc2 && (l.size() != h || lambda.size() != h))
    throw std::invalid_argument("objective_gradient: soc2 needs l and lambda");
  if (u.size() != h) throw std::invalid_argument("objective_gradient: u length != horizon");
  if (const auto* lin = std::get_if<LinearThermal>(&ctx.model))
    return gradient_linear(ctx, u, l, lambda, *lin);
  const Rollout ro = rollout(ctx, u);
  const double dt = ctx.cfg.dt;

  ObjGrad out;
  out.du.setZero(h);
  if (soc2) out.dl.setZero(h);

  // Per-step direct terms and value.
  Eigen::VectorXd term(h);  // coefficient of the survival weight E[j-1]
  double value = 0.0;
  for (int j = 0; j < h; ++j) {
    const double survive = (j == 0) ? 1.0 : ro.E[j - 1];
    const double b = u[j] - ctx.u_set[j];
    if (!soc2) {
      term[j] = dt * b;
      value += term[j] * survive;
    } else {
      const double a = ctx.u_set[j] - l[j];
      term[j] = dt * (2.0 * a * b + b * b);
      value += dt * a * a + term[j] * survive + lambda[j] * l[j];
      out.dl[j] = dt * (-2.0 * a - 2.0 * b * survive) + lambda[j];
    }
  }
  value -= ctx.cfg.rho * ro.E[h - 1];
  out.value = value;

  // dV/d logit_k = sigma(-g_k) * S_k with
  // S_k = sum_{j>k} term[j] E[j-1] - rho E[h-1]  (suffix accumulated backward).
  Eigen::VectorXd c(h);
  double suffix = -ctx.cfg.rho * ro.E[h - 1];
  for (int k = h - 1; k >= 0; --k) {
    c[k] = (1.0 - ro.p[k]) * suffix;
    if (k > 0) suffix += term[k] * ro.E[k - 1];
  }

  // Adjoints through the factor recursions (reverse sweep).
  const double as = ctx.theta.theta[1] / ctx.scaling.s_scale;
  const double ad = ctx.theta.theta[2] / ctx.scaling.d_scale;
  const double ar = ctx.theta.theta[3] / ctx.scaling.r_scale;
  double lam_s = 0.0, lam_d = 0.0, lam_r = 0.0;
  for (int j = h - 1; j >= 0; --j) {
    lam_d += c[j] * ad;
    lam_r += c[j] * ar;
    const double dev = ctx.cfg.heating ? std::min(ro.s[j] - ctx.cfg.s_set, 0.0)
                                       : std::max(ro.s[j] - ctx.cfg.s_set, 0.0);
    // d d_j / d s_j = 2 dt dev (sign carried by dev for heating mode)
    const double s_adj = c[j] * as + lam_d * 2.0 * dt * dev + lam_s;
    const double s_prev = (j == 0) ? ctx.start.s : ro.s[j - 1];
    const double s_out_prev = (j == 0) ? ctx.start.s_out : ctx.s_out[j - 1];
    const PredGrad pg = predict_mean_grad(ctx.model, s_prev, s_out_prev, u[j]);
    const double survive = (j == 0) ? 1.0 : ro.E[j - 1];
    double direct;
    if (!soc2) {
      direct = dt * survive;
    } else {
      const double a = ctx.u_set[j] - l[j];
      const double b = u[j] - ctx.u_set[j];
      direct = dt * (2.0 * a + 2.0 * b) * survive;
    }
    const double gap = ctx.u_set[j] - u[j];
    const double sgn = (gap > 0.0) ? 1.0 : (gap < 0.0 ? -1.0 : 0.0);
    out.du[j] = direct + s_adj * pg.du + lam_r * ctx.cfg.r2 * dt * (-sgn);
    lam_s = s_adj * pg.ds;  // propagated to step j-1 through s_{j} = F(s_{j-1}, u_j)
  }
  return out;
}

McEstimate mc_oracle(std::mt19937_64& eng, const PlanContext& ctx, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& l, int n) {
  if (n < 1000) throw std::invalid_argument("mc_oracle: n must be >= 1000");
  const bool soc2 = ctx.cfg.mode == Mode::soc2;
  const int h = ctx.horizon();
  if (soc2 && l.size() != h) throw std::invalid_argument("mc_oracle: soc2 needs l");
  const Rollout ro = rollout(ctx, u);
  const double dt = ctx.cfg.dt;

  // Per-step contributions while in (planned u) and after opt-out (u_set).
  Eigen::VectorXd in_score(h), out_score(h);
  for (int j = 0; j < h; ++j) {
    if (!soc2) {
      in_score[j] = dt * u[j];
      out_score[j] = dt * ctx.u_set[j];
    } else {
      in_score[j] = dt * (u[j] - l[j]) * (u[j] - l[j]);
      out_score[j] = dt * (ctx.u_set[j] - l[j]) * (ctx.u_set[j] - l[j]);
    }
  }
  // Suffix sums of out_score: score after opting out at step k.
  Eigen::VectorXd out_suffix(h + 1);
  out_suffix[h] = 0.0;
  for (int j = h - 1; j >= 0; --j) out_suffix[j] = out_suffix[j + 1] + out_score[j];

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double sum = 0.0, sumsq = 0.0;
  for (int path = 0; path < n; ++path) {
    double score = 0.0;
    bool in = true;
    for (int j = 0; j < h && in; ++j) {
      score += in_score[j];
      if (unif(eng) >= ro.p[j]) {  // opt out at the end of step j
        in = false;
        score += out_suffix[j + 1];
      }
    }
    if (!in) score += ctx.cfg.rho;
    sum += score;
    sumsq += score * score;
  }
  const double mean = sum / n;
  const double var = std::max(sumsq / n - mean * mean, 0.0);
  return {mean, std::sqrt(var / n)};
}

}  // namespace drflex
