#include "drflex/core.hpp"

namespace drflex {

void EventConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("EventConfig: " + msg); };
  if (T < 1) fail("T must be >= 1");
  if (!(dt > 0) || !std::isfinite(dt)) fail("dt must be positive");
  if (!(u_max > 0) || !std::isfinite(u_max)) fail("u_max must be positive");
  if (!(du_max > 0) || !std::isfinite(du_max)) fail("du_max must be positive");
  if (!std::isfinite(s_set)) fail("s_set must be finite");
  if (!std::isfinite(rho)) fail("rho must be finite");
  if (r0 < 0 || r1 < 0 || r2 < 0) fail("r0, r1, r2 must be non-negative");
  if (!auto_u_init() && (u_init < 0 || u_init > u_max)) fail("u_init outside [0, u_max]");
  if (mode == Mode::soc2 && static_cast<int>(L.size()) != T) fail("L must have length T in soc2 mode");
}

void ExogenousSeries::validate(int T) const {
  if (static_cast<int>(s_out.size()) != T + 1)
    throw std::invalid_argument("ExogenousSeries: s_out must have length T+1");
  if (static_cast<int>(price.size()) != T)
    throw std::invalid_argument("ExogenousSeries: price must have length T");
  for (double v : s_out)
    if (!std::isfinite(v)) throw std::invalid_argument("ExogenousSeries: non-finite s_out");
  for (double v : price)
    if (!std::isfinite(v) || v < 0.0 || v > 1.0)
      throw std::invalid_argument("ExogenousSeries: price outside [0,1]");
}

void FactorScaling::validate() const {
  const double scales[] = {s_scale, d_scale, r_scale, s_out_scale, price_scale};
  for (double c : scales)
    if (!(c > 0) || !std::isfinite(c))
      throw std::invalid_argument("FactorScaling: scales must be positive");
  const double offs[] = {s_off, d_off, r_off, s_out_off, price_off};
  for (double c : offs)
    if (!std::isfinite(c)) throw std::invalid_argument("FactorScaling: non-finite offset");
}

Vec6 FactorScaling::normalized(const EnvFactors& f) const {
  Vec6 w;
  w << 1.0, (f.s - s_off) / s_scale, (f.d - d_off) / d_scale, (f.r - r_off) / r_scale,
      (f.s_out - s_out_off) / s_out_scale, (f.price - price_off) / price_scale;
  return w;
}

std::pair<EnvFactors, Vec6> assemble_env_factors(double s, double d, double r,
                                                 double s_out, double price) {
  const double vals[] = {s, d, r, s_out, price};
  for (double v : vals)
    if (!std::isfinite(v)) throw std::invalid_argument("assemble_env_factors: non-finite input");
  EnvFactors f{s, d, r, s_out, price};
  Vec6 w;
  w << 1.0, s, d, r, s_out, price;
  return {f, w};
}

Feasibility check_feasible(const Eigen::VectorXd& u, double u_prev,
                           double u_max, double du_max, double tol) {
  double prev = u_prev;
  for (int t = 0; t < u.size(); ++t) {
    if (u[t] < -tol || u[t] > u_max + tol)
      return {false, t + 1, "box: u outside [0, u_max]"};
    if (std::abs(u[t] - prev) > du_max + tol)
      return {false, t + 1, "rate: |u_t - u_{t-1}| > du_max"};
    prev = u[t];
  }
  return {};
}

Feasibility check_feasible(const Trajectory& traj, const EventConfig& cfg, double tol) {
  cfg.validate();
  if (cfg.auto_u_init())
    throw std::invalid_argument("check_feasible: u_init unresolved (NaN)");
  if (traj.u.size() != cfg.T)
    throw std::invalid_argument("check_feasible: trajectory length != T");
  Feasibility fb = check_feasible(traj.u, cfg.u_init, cfg.u_max, cfg.du_max, tol);
  if (!fb.ok) return fb;
  if (traj.l.size() > 0) {
    if (traj.l.size() != cfg.T)
      throw std::invalid_argument("check_feasible: l length != T");
    for (int t = 0; t < traj.l.size(); ++t)
      if (traj.l[t] < -tol) return {false, t + 1, "l must be non-negative"};
  }
  return {};
}

}  // namespace drflex
