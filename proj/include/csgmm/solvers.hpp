#ifndef CSGMM_SOLVERS_HPP
#define CSGMM_SOLVERS_HPP

#include <Eigen/Dense>
#include <vector>

#include "csgmm/patches.hpp"
#include "csgmm/sensing.hpp"

namespace csgmm::solvers {

// Per-run iterate bookkeeping shared by the reconstruction pipelines.
struct SolverState {
  Eigen::VectorXd x;          // image-length iterate
  Eigen::VectorXd w;          // ADMM auxiliary image
  Eigen::VectorXd v;          // scaled multiplier
  Eigen::VectorXd y_running;  // accelerated-GAP running measurement vector
  int iteration = 0;
  std::vector<double> objective_trace;
};

Eigen::VectorXd ist_step(const sensing::SensingOperator& op,
                         const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                         double zeta);

// Euclidean projection onto {x : Ax = y}; with orthonormal rows this equals
// ist_step with zeta = 1.
Eigen::VectorXd gap_step(const sensing::SensingOperator& op,
                         const Eigen::VectorXd& y, const Eigen::VectorXd& x);

// Accelerated GAP: y_running += (y - A x), then x += A^T (y_running - A x).
// y_running must be initialized to y before the first call.
void acc_gap_step(const sensing::SensingOperator& op, const Eigen::VectorXd& y,
                  Eigen::VectorXd& x, Eigen::VectorXd& y_running);

// Closed-form ADMM x-update, valid because A A^T = I:
// x = (w - v) + A^T(y - A(w - v)) / (beta + 1).
Eigen::VectorXd admm_x_step(const sensing::SensingOperator& op,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& v, double beta);

// Elementwise ADMM w-update:
// w_n = [beta (x + v) + eta * aggregate(targets)]_n / (eta r_n + beta).
Eigen::VectorXd admm_w_step(const patches::PatchGrid& grid,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                            const Eigen::MatrixXd& target_patches, double beta,
                            double eta);

Eigen::VectorXd admm_v_step(const Eigen::VectorXd& v, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& w);

}  // namespace csgmm::solvers

#endif
