#pragma once
#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace drflex {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;

enum class Mode { soc1, soc2 };

// Configuration of one DR event. u_init = NaN means "resolve to the baseline
// power at step 0" (the pre-event operating point), done by the caller that
// knows the thermal model.
struct EventConfig {
  int T = 12;
  double dt = 0.25;    // hours per step
  double u_max = 2.0;  // kW
  double du_max = 1.0; // kW per step
  double s_set = 72.0; // °F
  double rho = 6.0;    // opt-out penalty
  double r0 = 1.0;     // base participation credit
  double r1 = 0.1;     // credit per kW capacity per step
  double r2 = 0.1;     // credit per kWh of load adjustment
  Mode mode = Mode::soc1;
  std::vector<double> L; // tracking target per step (soc2 only)
  double u_init = std::numeric_limits<double>::quiet_NaN();
  bool heating = false;  // flips the discomfort deviation direction

  bool auto_u_init() const { return std::isnan(u_init); }
  void validate() const;  // throws std::invalid_argument
};

// Factor state at one step: indoor temperature, accumulated discomfort,
// incentive credit, outdoor temperature, price.
struct EnvFactors {
  double s = 72.0;
  double d = 0.0;
  double r = 0.0;
  double s_out = 90.0;
  double price = 0.5;
};

// Per-event exogenous inputs. s_out has length T+1 (steps 0..T); price has
// length T (price[j] belongs to step j+1).
struct ExogenousSeries {
  std::vector<double> s_out;
  std::vector<double> price;
  void validate(int T) const;
};

struct Trajectory {
  Eigen::VectorXd u;
  Eigen::VectorXd l;  // size 0 unless soc2
};

struct Feasibility {
  bool ok = true;
  int step = -1;        // first violating step (1-based), -1 if ok
  std::string what;     // empty if ok
};

// Affine normalization applied to factors before the logistic model.
// Normalized value = (x - offset) / scale. Defaults: temperatures /100,
// discomfort /100, credit /5, price unchanged.
struct FactorScaling {
  double s_scale = 100.0, s_off = 0.0;
  double d_scale = 100.0, d_off = 0.0;
  double r_scale = 5.0, r_off = 0.0;
  double s_out_scale = 100.0, s_out_off = 0.0;
  double price_scale = 1.0, price_off = 0.0;

  void validate() const;
  // Augmented normalized factor vector (1, s~, d~, r~, s_out~, price~).
  Vec6 normalized(const EnvFactors& f) const;
};

// Raw augmentation (1, s, d, r, s_out, price); throws on non-finite input.
std::pair<EnvFactors, Vec6> assemble_env_factors(double s, double d, double r,
                                                 double s_out, double price);

Feasibility check_feasible(const Eigen::VectorXd& u, double u_prev,
                           double u_max, double du_max, double tol = 1e-9);
Feasibility check_feasible(const Trajectory& traj, const EventConfig& cfg,
                           double tol = 1e-9);

}  // namespace drflex
