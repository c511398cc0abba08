#pragma once
#include <random>
#include <stdexcept>

#include "drflex/core.hpp"
#include "drflex/thermal.hpp"

namespace drflex {

struct GenerationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Overflow-safe logistic; valid for |x| up to ~700.
double sigmoid(double x);
double log_sigmoid(double x);

// theta = (alpha, beta) acting on normalized augmented factors.
struct BehaviorParams {
  Vec6 theta = Vec6::Zero();
  void validate() const;
};

double logit_of(const BehaviorParams& p, const Vec6& w_hat);
double stay_in_prob(const BehaviorParams& p, const Vec6& w_hat);

struct OptOutState {
  bool in = true;
  int opt_out_step = -1;  // 1-based step where z first became 0
};

// Absorbing stay-in/opt-out transition: once out, stays out.
OptOutState transition(std::mt19937_64& eng, const OptOutState& st, double p, int step);

// Ground-truth generation profile. The two anchors make the qualitative
// rules testable: near-certain stay-in at the default setpoint, near-certain
// opt-out after a sustained hot excursion. d_hot is the discomfort reached by
// a linear ramp from s_set to s_hot over a default event
// (dt * sum_t ((s_hot - s_set) * t/T)^2 with T=12, dt=0.25); r_hot is the
// credit after a full default event with a typical 1.2 kW adjustment.
struct CustomerProfile {
  FactorScaling scaling;
  double s_set = 72.0;
  double s_hot = 90.0;
  double s_out_anchor = 92.0;
  double price_anchor = 0.5;
  double d_hot = 365.625;
  double r_anchor = 1.0;
  double r_hot = 3.76;
  double p_high = 0.995;
  double p_low = 0.05;
  Vec6 lo = (Vec6() << 2.0, -6.0, -4.0, 0.0, -1.0, -1.0).finished();
  Vec6 hi = (Vec6() << 14.0, -0.5, -0.5, 1.0, 1.0, 1.0).finished();
  int budget = 100000;

  Vec6 anchor_default_w() const;  // normalized augmented factors, event start
  Vec6 anchor_hot_w() const;
};

// Rejection-samples theta* until both anchors and the sign constraints hold.
BehaviorParams gen_ground_truth(std::mt19937_64& eng, const CustomerProfile& profile);

// One step of the factor recursions: thermal state via the model, discomfort
// d += dt * max(s - s_set, 0)^2 (direction flipped when heating), credit
// r += r1 * u_max + r2 * dt * |u_set - u|.
EnvFactors step_factors(const EnvFactors& prev, double u, double u_set_t,
                        double s_out_next, double price_next,
                        const EventConfig& cfg, const ThermalModel& model);

}  // namespace drflex
