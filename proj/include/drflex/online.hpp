#pragma once
#include <vector>

#include "drflex/rng.hpp"
#include "drflex/solver.hpp"

namespace drflex {

struct Belief {
  Vec6 mu = Vec6::Zero();
  Mat6 Sigma = Mat6::Identity();
  void validate() const;  // symmetric PD with min eigenvalue > 1e-12
};

// Draw theta_hat ~ N(mu, Sigma) via Cholesky with jitter escalation.
Vec6 sample_params(std::mt19937_64& eng, const Belief& belief);

struct Observation {
  Vec6 w_hat = Vec6::Zero();
  bool z = true;
  void validate() const;  // w_hat[0] == 1
};

struct VariationalResult {
  Belief belief;
  double xi = 0.0;     // final variational parameter
  bool repaired = false;
};

// Jaakkola-Jordan update: xi from the prior, then `iters` alternations of the
// rank-1 posterior update (Sherman-Morrison, no re-inversion) and the xi
// refresh; each posterior is recomputed from the prior with the current xi.
// l(xi) = (1/2 - sigmoid(xi)) / (2 xi), with limit -1/8 at xi = 0.
VariationalResult variational_update(const Belief& prior, const Observation& obs,
                                     int iters = 3);
double jj_l(double xi);

struct StepRecord {
  int customer = 0;
  int step = 0;           // absolute step t
  Vec6 theta_hat = Vec6::Zero();
  double u = 0.0;         // applied power at t
  bool z = true;          // observed stay-in outcome
  Vec6 mu = Vec6::Zero(); // posterior mean after the update
  double tr_sigma = 0.0;  // posterior covariance trace after the update
};

struct EventResult {
  int customer_id = 0;
  Eigen::VectorXd applied_u;            // length T (u_set entries after opt-out)
  Eigen::VectorXd applied_l;            // length T for soc2, else empty
  // The controller's intended full-horizon plan: applied controls while the
  // customer was in, extended past the opt-out step by the tail of the last
  // MPC solve. Always rate/box feasible; this is what regret evaluates.
  Eigen::VectorXd planned_u;
  Eigen::VectorXd planned_l;
  std::vector<EnvFactors> factors;      // length T+1 including the start state
  Eigen::VectorXd p_true;               // stay-in probability per step under theta*
  int opt_out_step = -1;                // 1-based, -1 if the customer stayed in
  int n_updates = 0;
  double energy_kwh = 0.0;
  bool solver_warning = false;
  bool belief_repaired = false;
  std::vector<Belief> snapshots;        // one per belief update
  std::vector<StepRecord> transcript;
};

struct EventCustomer {
  int id = 0;
  BehaviorParams theta_star;
  ThermalModel model;
  double u_init = 0.0;  // resolved (never NaN)
};

// Factor state at the event start: indoor at setpoint, zero discomfort, base
// credit, initial exogenous readings.
EnvFactors initial_factors(const EventConfig& cfg, const ExogenousSeries& exo);

struct OnlineConfig {
  SolverConfig solver;
  GammaSchedule gamma;      // dual step schedule (soc2)
  double dual_eps = 0.0;    // ||d lambda|| stop; 0 disables
  int dual_kmax = 40;
  double dual_res_tol = 5e-3;  // relative residual stop; 0 disables
  // multi_start override for warm re-solves at t > 1 (0 keeps solver.multi_start)
  int resolve_multi_start = 1;
  bool warm_start = true;   // seed each re-solve with the previous plan's tail
  bool transcripts = true;
};

// Thompson-sampling event loop. Per step: sample theta_hat per still-in
// customer, re-solve the remaining horizon (independent solves for soc1, one
// dual-gradient coordination for soc2), apply the first action, observe the
// stay-in outcome, update the belief (including at the opt-out step). After
// opt-out the customer runs at u_set and is no longer controlled or observed.
//
// RNG streams per customer id: theta draws use
// event_key.child(id).child(stream::sample), opt-out draws
// event_key.child(id).child(stream::optout), and the solver seed at step t is
// event_key.child(id).child(stream::solver).child(t).key.
std::vector<EventResult> run_dr_event(const std::vector<EventCustomer>& customers,
                                      const EventConfig& cfg, const ExogenousSeries& exo,
                                      const FactorScaling& scaling,
                                      std::vector<Belief>& beliefs, StreamKey event_key,
                                      const OnlineConfig& ocfg);

}  // namespace drflex
