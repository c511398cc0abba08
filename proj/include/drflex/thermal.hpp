#pragma once
#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "drflex/core.hpp"

namespace drflex {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One-step linear dynamics: s_next = s + kappa (s_out - s) + eta u.
// eta < 0 is cooling, eta > 0 heating.
struct LinearThermal {
  double kappa = 0.08;
  double eta = -1.2;

  void validate() const;
  double predict(double s_prev, double s_out_prev, double u) const {
    return s_prev + kappa * (s_out_prev - s_prev) + eta * u;
  }
};

// Uniformly spaced metering rows. Row k holds the state at the end of
// interval k; ac_kw[k] is the average AC power over the interval ending at
// time_h[k].
struct MeteringHistory {
  std::vector<double> time_h;
  std::vector<double> indoor_f;
  std::vector<double> outdoor_f;
  std::vector<double> ac_kw;

  std::size_t rows() const { return time_h.size(); }
  double dt() const;          // uniform spacing; validate() first
  void validate() const;      // throws on ragged columns or non-uniform spacing
};

LinearThermal fit_linear(const MeteringHistory& hist);

struct GpConfig {
  int n_starts = 5;
  int max_iters = 80;
  int max_rows = 2000;       // exact GP cap
  double jitter0 = 1e-10;
  double jitter_max = 1e-6;
  std::uint64_t seed = 0;
  // log-space hyperparameter box
  double log_len_lo = std::log(1e-2), log_len_hi = std::log(1e3);
  double log_sf_lo = std::log(1e-3), log_sf_hi = std::log(1e3);
  double log_sn_lo = std::log(1e-6), log_sn_hi = std::log(1e2);
};

// Exact GP on inputs x = (s_prev, s_out_prev, u) with an SE kernel with
// per-dimension length scales, additive noise, and a constant mean equal to
// the training-target average.
class GpThermal {
 public:
  static GpThermal fit(const MeteringHistory& hist, const GpConfig& cfg = {});
  static GpThermal from_params(Eigen::MatrixXd x, Eigen::VectorXd y, double mean,
                               Eigen::Vector3d log_len, double log_sf, double log_sn,
                               double jitter0 = 1e-10, double jitter_max = 1e-6);

  double mean(double s_prev, double s_out_prev, double u) const;
  double variance(double s_prev, double s_out_prev, double u) const;
  struct MeanGrad {
    double m, ds, du;
  };
  MeanGrad mean_grad(double s_prev, double s_out_prev, double u) const;

  double kernel(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const;
  double log_marginal() const { return lml_; }
  double jitter_used() const { return jitter_; }

  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXd& y() const { return y_; }
  double prior_mean() const { return mean_; }
  Eigen::Vector3d log_len() const { return log_len_; }
  double log_sf() const { return log_sf_; }
  double log_sn() const { return log_sn_; }

 private:
  GpThermal() = default;
  void factorize();  // cholesky of K + (sn^2 + jitter) I, with escalation
  Eigen::VectorXd kvec(const Eigen::Vector3d& q) const;

  Eigen::MatrixXd x_;   // n x 3
  Eigen::VectorXd y_;
  double mean_ = 0.0;
  Eigen::Vector3d log_len_ = Eigen::Vector3d::Zero();
  double log_sf_ = 0.0;
  double log_sn_ = std::log(0.1);
  double jitter0_ = 1e-10, jitter_max_ = 1e-6, jitter_ = 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  Eigen::VectorXd alpha_;
  double lml_ = 0.0;
};

using ThermalModel = std::variant<LinearThermal, std::shared_ptr<const GpThermal>>;

double predict_mean(const ThermalModel& m, double s_prev, double s_out_prev, double u);
std::optional<double> predict_variance(const ThermalModel& m, double s_prev,
                                       double s_out_prev, double u);
struct PredGrad {
  double m, ds, du;
};
PredGrad predict_mean_grad(const ThermalModel& m, double s_prev, double s_out_prev, double u);

struct BaselinePower {
  double u = 0.0;
  bool clamped = false;
};
// Power that holds s_set under ambient s_out, clamped to [0, u_max].
BaselinePower baseline_power(const ThermalModel& m, double s_set, double s_out, double u_max);

}  // namespace drflex
