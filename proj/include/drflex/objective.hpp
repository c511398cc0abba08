#pragma once
#include <random>

#include "drflex/behavior.hpp"
#include "drflex/core.hpp"
#include "drflex/thermal.hpp"

namespace drflex {

// Planning context over the remaining horizon {start_step, ..., T}.
// `start` is the realized factor state at start_step - 1 (its s_out is the
// outdoor temperature at start_step - 1, used by the first thermal step);
// u_prev is the power applied at start_step - 1. u_set, s_out and price hold
// one entry per remaining step.
struct PlanContext {
  BehaviorParams theta;
  ThermalModel model;
  EventConfig cfg;
  FactorScaling scaling;
  int start_step = 1;
  EnvFactors start;
  double u_prev = 0.0;
  Eigen::VectorXd u_set;
  Eigen::VectorXd s_out;
  Eigen::VectorXd price;

  int horizon() const { return cfg.T - start_step + 1; }
  void validate() const;
};

// Builds a context from the event-level exogenous series; u_set is computed
// per remaining step from the baseline power at the forecast outdoor
// temperature.
PlanContext make_plan_context(const BehaviorParams& theta, const ThermalModel& model,
                              const EventConfig& cfg, const FactorScaling& scaling,
                              const ExogenousSeries& exo, int start_step,
                              const EnvFactors& start, double u_prev);

// Deterministic forward recursion. E[j] = prod_{i<=j} p[i]; the conditional
// survival weight for step j is E[j-1] (empty product = 1).
struct Rollout {
  Eigen::VectorXd s, d, r, logp, p, E;
};

Rollout rollout(const PlanContext& ctx, const Eigen::VectorXd& u, double feas_tol = 1e-7);

double soc1_value(const PlanContext& ctx, const Eigen::VectorXd& u);
double soc2_local_value(const PlanContext& ctx, const Eigen::VectorXd& u,
                        const Eigen::VectorXd& l, const Eigen::VectorXd& lambda);

// Same value as soc1_value / soc2_local_value (per ctx.cfg.mode) without
// intermediate storage or feasibility validation; line-search hot path, the
// caller guarantees u feasible and l >= 0. soc1 ignores l and lambda.
double plan_value(const PlanContext& ctx, const Eigen::Ref<const Eigen::VectorXd>& u,
                  const Eigen::Ref<const Eigen::VectorXd>& l = Eigen::VectorXd(),
                  const Eigen::Ref<const Eigen::VectorXd>& lambda = Eigen::VectorXd());

struct ObjGrad {
  double value = 0.0;
  Eigen::VectorXd du;
  Eigen::VectorXd dl;  // size 0 for soc1
};

// Exact reverse-mode gradient of the analytic objective selected by
// ctx.cfg.mode (soc2 needs l and lambda; soc1 ignores them).
ObjGrad objective_gradient(const PlanContext& ctx, const Eigen::VectorXd& u,
                           const Eigen::VectorXd& l = {},
                           const Eigen::VectorXd& lambda = {});

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
};

// Monte-Carlo estimate of the expected objective (energy / tracking form,
// including the stay-in constants and the rho penalty on ending opted out).
// Relates to the analytic values by
//   soc1: mc = soc1_value + dt * sum(u_set) + rho
//   soc2: mc = soc2_local_value - lambda . l + rho
McEstimate mc_oracle(std::mt19937_64& eng, const PlanContext& ctx, const Eigen::VectorXd& u,
                     const Eigen::VectorXd& l, int n);

}  // namespace drflex
