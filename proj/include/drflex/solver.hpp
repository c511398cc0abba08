#pragma once
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "drflex/objective.hpp"

namespace drflex {

struct SolverConfig {
  int max_iters = 200;
  double armijo_c = 1e-4;
  double backtrack = 0.5;
  double step_init = 1.0;
  int max_backtracks = 60;
  double stall_tol = 1e-10;   // relative objective stall
  int multi_start = 5;
  double proj_tol = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

// Euclidean projection onto {0 <= u <= u_max} intersected with the rate
// constraints |u_t - u_{t-1}| <= du_max (u_0 = u_prev), via cyclic Dykstra
// iterations followed by an exact feasibility snap.
Eigen::VectorXd project_feasible(const Eigen::VectorXd& u, double u_prev, double u_max,
                                 double du_max, double tol = 1e-8);
Eigen::VectorXd project_feasible(const Eigen::VectorXd& u, const EventConfig& cfg);

struct LocalSolution {
  Eigen::VectorXd u;
  Eigen::VectorXd l;  // size 0 for soc1
  double value = 0.0;
  int start_index = -1;
  bool line_search_failed = false;
  int iters = 0;
};

LocalSolution solve_local_soc1(const PlanContext& ctx, const SolverConfig& cfg,
                               const std::vector<Eigen::VectorXd>& extra_starts = {});
LocalSolution solve_local_soc2(const PlanContext& ctx, const Eigen::VectorXd& lambda,
                               const SolverConfig& cfg,
                               const std::vector<Trajectory>& extra_starts = {});

// What an agent reports back to the coordinator each dual iteration.
struct LocalResult {
  Eigen::VectorXd l;
  double value = 0.0;
};

class AgentEndpoint {
 public:
  virtual ~AgentEndpoint() = default;
  virtual LocalResult solve_local(const Eigen::VectorXd& lambda) = 0;
  virtual void commit() = 0;
};

// In-process agent; re-solves warm-started from its previous solution after
// the first (multi-start) solve.
class LocalAgent : public AgentEndpoint {
 public:
  LocalAgent(PlanContext ctx, SolverConfig cfg, int id);
  LocalResult solve_local(const Eigen::VectorXd& lambda) override;
  void commit() override;

  // Warm start for the first solve (e.g. the shifted plan from the previous
  // MPC step); later solves warm-start from their own previous solution.
  void prime(Trajectory warm);

  int id() const { return id_; }
  bool committed() const { return committed_; }
  const LocalSolution& current() const { return sol_; }
  bool any_warning() const { return warned_; }

 private:
  PlanContext ctx_;
  SolverConfig cfg_;
  int id_;
  LocalSolution sol_;
  std::vector<Trajectory> primed_;
  bool has_sol_ = false;
  bool committed_ = false;
  bool warned_ = false;
};

struct GammaSchedule {
  double a = 5e-4;
  double floor = 1e-4;
  double scale = 1.0;
  double operator()(int k) const {
    return scale * std::max(a / std::sqrt(static_cast<double>(k)), floor);
  }
};

struct DualResult {
  Eigen::VectorXd lambda;
  std::vector<double> residual;  // ||sum_i l_i - L||_2 per iteration
  bool converged = false;
  bool aborted = false;
  int iters = 0;
};

// Called once per dual iteration, after the locals responded to `lambda` and
// before the multiplier update; lets the caller snapshot iterates for primal
// recovery (the final iterate of a subgradient scheme is not the best one).
using DualObserver =
    std::function<void(int k, const Eigen::VectorXd& lambda, double residual)>;

// Algorithm: broadcast lambda, collect local l, update
// lambda += gamma_k (sum l - L); stop when ||d lambda|| <= eps, when the
// relative residual falls below res_rel_tol (if positive), or at k_max.
// Commits all agents on normal termination. lambda0 (default zero) lets a
// receding-horizon caller warm-start the multiplier.
DualResult run_dual_gradient(const std::vector<AgentEndpoint*>& agents,
                             const Eigen::VectorXd& L, const GammaSchedule& gamma,
                             double eps, int k_max, double res_rel_tol = 0.0,
                             const Eigen::VectorXd& lambda0 = {},
                             const DualObserver& observer = {});

// Exact share feasibility for a set of soc2 plans: per step, clip l at zero
// and spread the residual to sum_i l_{i,t} = L_t equally over the customers
// still above zero (repeated until no clip triggers). soc1 plan sets (empty
// l) pass through unchanged.
void project_shares(std::vector<Trajectory>& plans, const std::vector<double>& L);

}  // namespace drflex
