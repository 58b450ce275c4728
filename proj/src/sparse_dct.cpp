#include "csgmm/sparse_dct.hpp"

#include <cmath>
#include <stdexcept>

namespace csgmm::sparse_dct {

Eigen::MatrixXd dct_basis(int patch_side) {
  if (patch_side < 1) throw std::invalid_argument("dct_basis: bad patch side");
  const int s = patch_side;
  // 1-D orthonormal DCT-II analysis matrix D, D D^T = I.
  Eigen::MatrixXd d(s, s);
  const double pi = 3.14159265358979323846;
  for (int k = 0; k < s; ++k) {
    const double ck = (k == 0) ? std::sqrt(1.0 / s) : std::sqrt(2.0 / s);
    for (int n = 0; n < s; ++n)
      d(k, n) = ck * std::cos(pi * (n + 0.5) * k / s);
  }
  // Row-major vectorized 2-D analysis is kron(D, D); the synthesis basis is
  // its transpose.
  const int p = s * s;
  Eigen::MatrixXd basis(p, p);
  for (int k1 = 0; k1 < s; ++k1)
    for (int k2 = 0; k2 < s; ++k2)
      for (int r = 0; r < s; ++r)
        for (int c = 0; c < s; ++c)
          basis(r * s + c, k1 * s + k2) = d(k1, r) * d(k2, c);
  return basis;
}

Eigen::VectorXd analyze(const Eigen::MatrixXd& basis, const Eigen::VectorXd& patch) {
  if (patch.size() != basis.rows())
    throw std::invalid_argument("analyze: patch dimension mismatch");
  return basis.transpose() * patch;
}

Eigen::VectorXd synthesize(const Eigen::MatrixXd& basis, const Eigen::VectorXd& coeffs) {
  if (coeffs.size() != basis.cols())
    throw std::invalid_argument("synthesize: coefficient dimension mismatch");
  return basis * coeffs;
}

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& z, double threshold) {
  if (threshold < 0.0)
    throw std::invalid_argument("soft_threshold: negative threshold");
  return z.array().sign() * (z.array().abs() - threshold).max(0.0);
}

Eigen::MatrixXd soft_threshold(const Eigen::MatrixXd& z, double threshold) {
  if (threshold < 0.0)
    throw std::invalid_argument("soft_threshold: negative threshold");
  return z.array().sign() * (z.array().abs() - threshold).max(0.0);
}

Eigen::MatrixXd solve_z_step(const Eigen::MatrixXd& basis,
                             const Eigen::MatrixXd& patches, double lambda,
                             double eta) {
  if (eta <= 0.0) throw std::invalid_argument("solve_z_step: eta must be positive");
  if (lambda < 0.0) throw std::invalid_argument("solve_z_step: negative lambda");
  if (patches.rows() != basis.rows())
    throw std::invalid_argument("solve_z_step: patch dimension mismatch");
  return soft_threshold(Eigen::MatrixXd(basis.transpose() * patches),
                        lambda / (2.0 * eta));
}

}  // namespace csgmm::sparse_dct
