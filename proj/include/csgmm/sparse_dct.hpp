#ifndef CSGMM_SPARSE_DCT_HPP
#define CSGMM_SPARSE_DCT_HPP

#include <Eigen/Dense>

namespace csgmm::sparse_dct {

// Orthonormal separable 2-D DCT-II synthesis basis for row-major vectorized
// square patches: column j is one atom, patch = basis * coefficients.
Eigen::MatrixXd dct_basis(int patch_side);

Eigen::VectorXd analyze(const Eigen::MatrixXd& basis, const Eigen::VectorXd& patch);
Eigen::VectorXd synthesize(const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs);

// Elementwise sign(z) * max(|z| - threshold, 0).
Eigen::VectorXd soft_threshold(const Eigen::VectorXd& z, double threshold);
Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& z, double threshold);

// Per-patch minimizer of lambda*||z||_1 + eta*sum_i ||p_i - B z_i||^2,
// exact because B is orthonormal: z_i = soft_threshold(B^T p_i, lambda/(2 eta)).
Eigen::MatrixXd solve_z_step(const Eigen::MatrixXd& basis,
                             const Eigen::MatrixXd& patches, double lambda,
                             double eta);

}  // namespace csgmm::sparse_dct

#endif
