#include "drflex/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace drflex {

void LinearThermal::validate() const {
  if (!(kappa > 0.0) || !(kappa < 1.0) || !std::isfinite(kappa))
    throw std::invalid_argument("LinearThermal: kappa must lie in (0, 1)");
  if (eta == 0.0 || !std::isfinite(eta))
    throw std::invalid_argument("LinearThermal: eta must be nonzero");
}

void MeteringHistory::validate() const {
  const std::size_t n = time_h.size();
  if (indoor_f.size() != n || outdoor_f.size() != n || ac_kw.size() != n)
    throw std::invalid_argument("MeteringHistory: ragged columns");
  if (n < 2) throw std::invalid_argument("MeteringHistory: needs >= 2 rows");
  const double step = time_h[1] - time_h[0];
  if (!(step > 0)) throw std::invalid_argument("MeteringHistory: non-increasing timestamps");
  for (std::size_t k = 1; k < n; ++k) {
    const double dk = time_h[k] - time_h[k - 1];
    if (std::abs(dk - step) > 1e-6 * std::max(1.0, std::abs(step)))
      throw std::invalid_argument("MeteringHistory: non-uniform timestamp spacing");
  }
  for (std::size_t k = 0; k < n; ++k)
    if (!std::isfinite(indoor_f[k]) || !std::isfinite(outdoor_f[k]) || !std::isfinite(ac_kw[k]))
      throw std::invalid_argument("MeteringHistory: non-finite entry");
}

double MeteringHistory::dt() const { return time_h[1] - time_h[0]; }

LinearThermal fit_linear(const MeteringHistory& hist) {
  hist.validate();
  const int n = static_cast<int>(hist.rows());
  if (n < 3) throw FitError("fit_linear: needs >= 3 rows");
  Eigen::MatrixXd X(n - 1, 2);
  Eigen::VectorXd y(n - 1);
  for (int k = 1; k < n; ++k) {
    X(k - 1, 0) = hist.outdoor_f[k - 1] - hist.indoor_f[k - 1];
    X(k - 1, 1) = hist.ac_kw[k];
    y[k - 1] = hist.indoor_f[k] - hist.indoor_f[k - 1];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  qr.setThreshold(1e-10);
  if (qr.rank() < 2) throw FitError("fit_linear: regressors are rank deficient");
  const Eigen::Vector2d coef = qr.solve(y);
  LinearThermal m{coef[0], coef[1]};
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw FitError(std::string("fit_linear: estimates violate model invariants: ") + e.what());
  }
  return m;
}

// ---- GP --------------------------------------------------------------------

namespace {

struct GpData {
  Eigen::MatrixXd x;  // n x 3
  Eigen::VectorXd yc; // y - mean
};

struct LmlEval {
  bool ok = false;
  double lml = -std::numeric_limits<double>::infinity();
  Eigen::Matrix<double, 5, 1> grad = Eigen::Matrix<double, 5, 1>::Zero();
  double jitter = 0.0;
};

Eigen::MatrixXd gram(const Eigen::MatrixXd& x, const Eigen::Vector3d& log_len, double log_sf) {
  const int n = static_cast<int>(x.rows());
  const double sf2 = std::exp(2.0 * log_sf);
  Eigen::Vector3d inv2;
  for (int d = 0; d < 3; ++d) inv2[d] = std::exp(-2.0 * log_len[d]);
  Eigen::MatrixXd K(n, n);
  for (int i = 0; i < n; ++i) {
    K(i, i) = sf2;
    for (int j = 0; j < i; ++j) {
      double q = 0;
      for (int d = 0; d < 3; ++d) {
        const double diff = x(i, d) - x(j, d);
        q += diff * diff * inv2[d];
      }
      K(i, j) = K(j, i) = sf2 * std::exp(-0.5 * q);
    }
  }
  return K;
}

// Log marginal likelihood and its gradient in (log_len[3], log_sf, log_sn).
LmlEval eval_lml(const GpData& data, const Eigen::Matrix<double, 5, 1>& h,
                 double jitter0, double jitter_max, bool want_grad) {
  const int n = static_cast<int>(data.x.rows());
  const Eigen::Vector3d log_len = h.head<3>();
  const double log_sf = h[3], log_sn = h[4];
  const double sn2 = std::exp(2.0 * log_sn);
  Eigen::MatrixXd K = gram(data.x, log_len, log_sf);

  LmlEval out;
  Eigen::LLT<Eigen::MatrixXd> llt;
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd W = K;
    W.diagonal().array() += sn2 + jitter;
    llt.compute(W);
    if (llt.info() == Eigen::Success) break;
    jitter = (jitter == 0.0) ? jitter0 : jitter * 10.0;
    if (jitter > jitter_max) return out;  // not factorizable
  }
  out.jitter = jitter;

  const Eigen::VectorXd alpha = llt.solve(data.yc);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt.matrixLLT()(i, i));
  out.lml = -0.5 * data.yc.dot(alpha) - logdet - 0.5 * n * std::log(2.0 * M_PI);
  out.ok = true;
  if (!want_grad) return out;

  const Eigen::MatrixXd Winv = llt.solve(Eigen::MatrixXd::Identity(n, n));
  const Eigen::MatrixXd A = alpha * alpha.transpose() - Winv;  // d lml = 0.5 tr(A dW)
  for (int d = 0; d < 3; ++d) {
    const double inv2 = std::exp(-2.0 * log_len[d]);
    double acc = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double diff = data.x(i, d) - data.x(j, d);
        acc += A(i, j) * K(i, j) * diff * diff * inv2;
      }
    out.grad[d] = 0.5 * acc;
  }
  out.grad[3] = (A.array() * K.array()).sum();       // 0.5 tr(A * 2K)
  out.grad[4] = sn2 * A.trace();                     // 0.5 tr(A * 2 sn2 I)
  return out;
}

Eigen::Matrix<double, 5, 1> clamp_hypers(Eigen::Matrix<double, 5, 1> h, const GpConfig& cfg) {
  for (int d = 0; d < 3; ++d) h[d] = std::clamp(h[d], cfg.log_len_lo, cfg.log_len_hi);
  h[3] = std::clamp(h[3], cfg.log_sf_lo, cfg.log_sf_hi);
  h[4] = std::clamp(h[4], cfg.log_sn_lo, cfg.log_sn_hi);
  return h;
}

}  // namespace

GpThermal GpThermal::from_params(Eigen::MatrixXd x, Eigen::VectorXd y, double mean,
                                 Eigen::Vector3d log_len, double log_sf, double log_sn,
                                 double jitter0, double jitter_max) {
  if (x.rows() != y.size() || x.rows() < 1 || x.cols() != 3)
    throw std::invalid_argument("GpThermal: inconsistent training arrays");
  GpThermal g;
  g.x_ = std::move(x);
  g.y_ = std::move(y);
  g.mean_ = mean;
  g.log_len_ = log_len;
  g.log_sf_ = log_sf;
  g.log_sn_ = log_sn;
  g.jitter0_ = jitter0;
  g.jitter_max_ = jitter_max;
  g.factorize();
  return g;
}

void GpThermal::factorize() {
  const int n = static_cast<int>(x_.rows());
  const GpData data{x_, y_.array() - mean_};
  Eigen::MatrixXd K = gram(x_, log_len_, log_sf_);
  const double sn2 = std::exp(2.0 * log_sn_);
  double jitter = 0.0;
  for (;;) {
    Eigen::MatrixXd W = K;
    W.diagonal().array() += sn2 + jitter;
    llt_.compute(W);
    if (llt_.info() == Eigen::Success) break;
    jitter = (jitter == 0.0) ? jitter0_ : jitter * 10.0;
    if (jitter > jitter_max_)
      throw FitError("GpThermal: Gram matrix not PD after jitter escalation");
  }
  jitter_ = jitter;
  alpha_ = llt_.solve(data.yc);
  double logdet = 0.0;
  for (int i = 0; i < n; ++i) logdet += std::log(llt_.matrixLLT()(i, i));
  lml_ = -0.5 * data.yc.dot(alpha_) - logdet - 0.5 * n * std::log(2.0 * M_PI);
}

GpThermal GpThermal::fit(const MeteringHistory& hist, const GpConfig& cfg) {
  hist.validate();
  const int rows = static_cast<int>(hist.rows());
  if (rows < 5) throw FitError("GpThermal::fit: needs >= 5 rows");
  int n = rows - 1;
  int first = 1;
  if (n > cfg.max_rows) {  // keep the most recent pairs
    first = rows - cfg.max_rows;
    n = cfg.max_rows;
  }
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXd y(n);
  for (int k = 0; k < n; ++k) {
    const int row = first + k;
    x(k, 0) = hist.indoor_f[row - 1];
    x(k, 1) = hist.outdoor_f[row - 1];
    x(k, 2) = hist.ac_kw[row];
    y[k] = hist.indoor_f[row];
  }
  const double mean = y.mean();
  const GpData data{x, y.array() - mean};

  // Start 0: length scales from input spreads, signal from target spread.
  Eigen::Matrix<double, 5, 1> h0;
  for (int d = 0; d < 3; ++d) {
    const double sd = std::sqrt((x.col(d).array() - x.col(d).mean()).square().mean());
    h0[d] = std::log(std::max(sd, 0.05));
  }
  const double ysd = std::sqrt(data.yc.array().square().mean());
  h0[3] = std::log(std::max(ysd, 1e-3));
  h0[4] = std::log(std::max(0.1 * std::max(ysd, 1e-3), 1e-4));
  h0 = clamp_hypers(h0, cfg);

  std::mt19937_64 eng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> jog(-1.5, 1.5);

  Eigen::Matrix<double, 5, 1> best_h = h0;
  double best_lml = -std::numeric_limits<double>::infinity();
  const int starts = std::max(cfg.n_starts, 1);
  for (int s = 0; s < starts; ++s) {
    Eigen::Matrix<double, 5, 1> h = h0;
    if (s > 0)
      for (int i = 0; i < 5; ++i) h[i] += jog(eng);
    h = clamp_hypers(h, cfg);

    LmlEval cur = eval_lml(data, h, cfg.jitter0, cfg.jitter_max, true);
    if (!cur.ok) continue;
    double step = 0.5;
    int stall = 0;
    for (int it = 0; it < cfg.max_iters && stall < 3; ++it) {
      bool accepted = false;
      double a = step;
      for (int bt = 0; bt < 30; ++bt) {
        Eigen::Matrix<double, 5, 1> cand = clamp_hypers(h + a * cur.grad, cfg);
        LmlEval ce = eval_lml(data, cand, cfg.jitter0, cfg.jitter_max, false);
        if (ce.ok && ce.lml >= cur.lml + 1e-4 * cur.grad.dot(cand - h)) {
          const double gain = ce.lml - cur.lml;
          h = cand;
          cur = eval_lml(data, h, cfg.jitter0, cfg.jitter_max, true);
          stall = (gain <= 1e-10 * (1.0 + std::abs(cur.lml))) ? stall + 1 : 0;
          step = std::min(a * 2.0, 10.0);
          accepted = true;
          break;
        }
        a *= 0.5;
      }
      if (!accepted) break;
    }
    if (cur.ok && cur.lml > best_lml) {
      best_lml = cur.lml;
      best_h = h;
    }
  }
  if (!std::isfinite(best_lml))
    throw FitError("GpThermal::fit: no hyperparameter start was factorizable");

  return from_params(std::move(x), std::move(y), mean, best_h.head<3>(), best_h[3], best_h[4],
                     cfg.jitter0, cfg.jitter_max);
}

double GpThermal::kernel(const Eigen::Vector3d& a, const Eigen::Vector3d& b) const {
  double q = 0;
  for (int d = 0; d < 3; ++d) {
    const double diff = (a[d] - b[d]) * std::exp(-log_len_[d]);
    q += diff * diff;
  }
  return std::exp(2.0 * log_sf_) * std::exp(-0.5 * q);
}

Eigen::VectorXd GpThermal::kvec(const Eigen::Vector3d& q) const {
  const int n = static_cast<int>(x_.rows());
  Eigen::VectorXd k(n);
  for (int i = 0; i < n; ++i) k[i] = kernel(x_.row(i).transpose(), q);
  return k;
}

double GpThermal::mean(double s_prev, double s_out_prev, double u) const {
  const Eigen::Vector3d q(s_prev, s_out_prev, u);
  return mean_ + kvec(q).dot(alpha_);
}

double GpThermal::variance(double s_prev, double s_out_prev, double u) const {
  const Eigen::Vector3d q(s_prev, s_out_prev, u);
  const Eigen::VectorXd k = kvec(q);
  const double v = std::exp(2.0 * log_sf_) - k.dot(llt_.solve(k));
  return std::max(v, 0.0);
}

GpThermal::MeanGrad GpThermal::mean_grad(double s_prev, double s_out_prev, double u) const {
  const Eigen::Vector3d q(s_prev, s_out_prev, u);
  const Eigen::VectorXd k = kvec(q);
  const int n = static_cast<int>(x_.rows());
  const double inv2_s = std::exp(-2.0 * log_len_[0]);
  const double inv2_u = std::exp(-2.0 * log_len_[2]);
  double m = mean_, ds = 0.0, du = 0.0;
  for (int i = 0; i < n; ++i) {
    m += alpha_[i] * k[i];
    ds += alpha_[i] * k[i] * (x_(i, 0) - q[0]) * inv2_s;
    du += alpha_[i] * k[i] * (x_(i, 2) - q[2]) * inv2_u;
  }
  return {m, ds, du};
}

// ---- variant helpers ---------------------------------------------------------

double predict_mean(const ThermalModel& m, double s_prev, double s_out_prev, double u) {
  if (!std::isfinite(s_prev) || !std::isfinite(s_out_prev) || !std::isfinite(u))
    throw std::invalid_argument("predict: non-finite input");
  if (const auto* lin = std::get_if<LinearThermal>(&m))
    return lin->predict(s_prev, s_out_prev, u);
  return std::get<std::shared_ptr<const GpThermal>>(m)->mean(s_prev, s_out_prev, u);
}

std::optional<double> predict_variance(const ThermalModel& m, double s_prev,
                                       double s_out_prev, double u) {
  if (std::holds_alternative<LinearThermal>(m)) return std::nullopt;
  return std::get<std::shared_ptr<const GpThermal>>(m)->variance(s_prev, s_out_prev, u);
}

PredGrad predict_mean_grad(const ThermalModel& m, double s_prev, double s_out_prev, double u) {
  if (const auto* lin = std::get_if<LinearThermal>(&m))
    return {lin->predict(s_prev, s_out_prev, u), 1.0 - lin->kappa, lin->eta};
  const auto g = std::get<std::shared_ptr<const GpThermal>>(m)->mean_grad(s_prev, s_out_prev, u);
  return {g.m, g.ds, g.du};
}

BaselinePower baseline_power(const ThermalModel& m, double s_set, double s_out, double u_max) {
  if (const auto* lin = std::get_if<LinearThermal>(&m)) {
    const double root = -lin->kappa * (s_out - s_set) / lin->eta;
    if (root < 0.0) return {0.0, true};
    if (root > u_max) return {u_max, true};
    return {root, false};
  }
  // Bracketing root search of predict(s_set, s_out, u) = s_set over [0, u_max].
  const auto g = [&](double u) { return predict_mean(m, s_set, s_out, u) - s_set; };
  double ga = g(0.0), gb = g(u_max);
  if (ga == 0.0) return {0.0, false};
  if (gb == 0.0) return {u_max, false};
  if (ga * gb > 0.0) return {std::abs(ga) <= std::abs(gb) ? 0.0 : u_max, true};
  double lo = 0.0, hi = u_max;
  double glo = ga;
  for (int it = 0; it < 200 && (hi - lo) > 1e-13 * std::max(1.0, u_max); ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if (gm == 0.0) return {mid, false};
    if (glo * gm < 0.0) {
      hi = mid;
    } else {
      lo = mid;
      glo = gm;
    }
  }
  return {0.5 * (lo + hi), false};
}

}  // namespace drflex
