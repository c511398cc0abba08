#include "drflex/behavior.hpp"

#include <cmath>

namespace drflex {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0.0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

void BehaviorParams::validate() const {
  if (!theta.allFinite()) throw std::invalid_argument("BehaviorParams: non-finite theta");
}

double logit_of(const BehaviorParams& p, const Vec6& w_hat) { return p.theta.dot(w_hat); }

double stay_in_prob(const BehaviorParams& p, const Vec6& w_hat) {
  if (!w_hat.allFinite()) throw std::invalid_argument("stay_in_prob: non-finite factors");
  return sigmoid(logit_of(p, w_hat));
}

OptOutState transition(std::mt19937_64& eng, const OptOutState& st, double p, int step) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("transition: p outside [0,1]");
  if (!st.in) return st;  // absorbing
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  if (unif(eng) < p) return st;
  return {false, step};
}

Vec6 CustomerProfile::anchor_default_w() const {
  EnvFactors f{s_set, 0.0, r_anchor, s_out_anchor, price_anchor};
  return scaling.normalized(f);
}

Vec6 CustomerProfile::anchor_hot_w() const {
  EnvFactors f{s_hot, d_hot, r_hot, s_out_anchor, price_anchor};
  return scaling.normalized(f);
}

BehaviorParams gen_ground_truth(std::mt19937_64& eng, const CustomerProfile& profile) {
  profile.scaling.validate();
  const Vec6 w_a = profile.anchor_default_w();
  const Vec6 w_b = profile.anchor_hot_w();
  const double logit_hi = std::log(profile.p_high / (1.0 - profile.p_high));
  const double logit_lo = std::log(profile.p_low / (1.0 - profile.p_low));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int draw = 0; draw < profile.budget; ++draw) {
    Vec6 theta;
    for (int i = 0; i < 6; ++i)
      theta[i] = profile.lo[i] + (profile.hi[i] - profile.lo[i]) * unif(eng);
    if (theta[1] > 0.0 || theta[2] > 0.0 || theta[3] < 0.0) continue;  // sign rules
    if (theta.dot(w_a) < logit_hi) continue;
    if (theta.dot(w_b) > logit_lo) continue;
    return {theta};
  }
  throw GenerationError("gen_ground_truth: rejection budget exhausted");
}

EnvFactors step_factors(const EnvFactors& prev, double u, double u_set_t,
                        double s_out_next, double price_next,
                        const EventConfig& cfg, const ThermalModel& model) {
  EnvFactors next;
  next.s = predict_mean(model, prev.s, prev.s_out, u);
  const double dev = cfg.heating ? std::max(cfg.s_set - next.s, 0.0)
                                 : std::max(next.s - cfg.s_set, 0.0);
  next.d = prev.d + cfg.dt * dev * dev;
  next.r = prev.r + cfg.r1 * cfg.u_max + cfg.r2 * cfg.dt * std::abs(u_set_t - u);
  next.s_out = s_out_next;
  next.price = price_next;
  return next;
}

}  // namespace drflex
