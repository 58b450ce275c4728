#include "csgmm/solvers.hpp"

#include <stdexcept>

namespace csgmm::solvers {

namespace {

Eigen::VectorXd apply_vec(const sensing::SensingOperator& op,
                          const Eigen::VectorXd& x) {
  const std::vector<double> r =
      sensing::apply(op, std::span<const double>(x.data(), x.size()));
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}

Eigen::VectorXd adjoint_vec(const sensing::SensingOperator& op,
                            const Eigen::VectorXd& y) {
  const std::vector<double> r =
      sensing::adjoint(op, std::span<const double>(y.data(), y.size()));
  return Eigen::Map<const Eigen::VectorXd>(r.data(), r.size());
}

}  // namespace

Eigen::VectorXd ist_step(const sensing::SensingOperator& op,
                         const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                         double zeta) {
  if (zeta <= 0.0) throw std::invalid_argument("ist_step: zeta must be positive");
  return x + adjoint_vec(op, y - apply_vec(op, x)) / zeta;
}

Eigen::VectorXd gap_step(const sensing::SensingOperator& op,
                         const Eigen::VectorXd& y, const Eigen::VectorXd& x) {
  // (A A^T)^{-1} = I under the 1/sqrt(N) normalization.
  return x + adjoint_vec(op, y - apply_vec(op, x));
}

void acc_gap_step(const sensing::SensingOperator& op, const Eigen::VectorXd& y,
                  Eigen::VectorXd& x, Eigen::VectorXd& y_running) {
  const Eigen::VectorXd ax = apply_vec(op, x);
  y_running += y - ax;
  x += adjoint_vec(op, y_running - ax);
}

Eigen::VectorXd admm_x_step(const sensing::SensingOperator& op,
                            const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                            const Eigen::VectorXd& v, double beta) {
  if (beta <= 0.0) throw std::invalid_argument("admm_x_step: beta must be positive");
  const Eigen::VectorXd d = w - v;
  return d + adjoint_vec(op, y - apply_vec(op, d)) / (beta + 1.0);
}

Eigen::VectorXd admm_w_step(const patches::PatchGrid& grid,
                            const Eigen::VectorXd& x, const Eigen::VectorXd& v,
                            const Eigen::MatrixXd& target_patches, double beta,
                            double eta) {
  if (beta < 0.0 || eta < 0.0 || (beta == 0.0 && eta == 0.0))
    throw std::invalid_argument("admm_w_step: beta and eta must not both vanish");
  const Eigen::VectorXd accum = patches::aggregate(grid, target_patches);
  const Eigen::VectorXd numer = beta * (x + v) + eta * accum;
  const Eigen::VectorXd denom =
      (eta * grid.overlap_counts.array() + beta).matrix();
  return numer.cwiseQuotient(denom);
}

Eigen::VectorXd admm_v_step(const Eigen::VectorXd& v, const Eigen::VectorXd& x,
                            const Eigen::VectorXd& w) {
  return v + (x - w);
}

}  // namespace csgmm::solvers
