#ifndef CSGMM_GMM_HPP
#define CSGMM_GMM_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace csgmm::gmm {

struct GaussianComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // symmetric PSD, floored
  Eigen::MatrixXd eigvecs;     // columns, matching eigvals
  Eigen::VectorXd eigvals;     // sorted descending, nonnegative
};

struct GmmModel {
  std::vector<GaussianComponent> components;
  // Data log-likelihood recorded at each accepted E-step of the last fit;
  // non-decreasing by construction of EM.
  std::vector<double> log_likelihood_trace;
};

// EM on patch columns. Initialization is deterministic (farthest-point
// seeding plus one Lloyd step), so the result depends only on the data's
// sufficient statistics; `seed` is recorded for config hashing but does not
// perturb the fit.
GmmModel em_fit(const Eigen::MatrixXd& patches, int k, std::uint64_t seed,
                int max_em_iters, double tol);

// Continue EM from an existing model (warm start between outer iterations).
GmmModel em_refine(GmmModel model, const Eigen::MatrixXd& patches, int iters,
                   double tol);

struct LowRankComponent {
  double weight = 0.0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // U * diag(thresholded eigvals) * U^T
  Eigen::MatrixXd eigvecs;
  Eigen::VectorXd eigvals;  // thresholded, descending; trailing entries zero
  int rank = 0;             // number of strictly positive eigenvalues, <= gamma
};

struct LowRankGmm {
  std::vector<LowRankComponent> components;
  double noise_variance = 0.0;  // sigma^2 of E = sigma^2 I
};

// Eigenvalue thresholding: subtract the (gamma+1)-th eigenvalue from all,
// clamp at zero, rebuild the covariance. Means and weights are copied.
// Equivalent to the nuclear-norm prox with tau = lambda_{gamma+1}.
LowRankGmm evt_lowrank(const GmmModel& model, int gamma, double noise_variance);

// Posterior-mean update of one patch estimate under the low-rank mixture.
// Component weights (normalized, computed in log space) are written to
// `weights_out` when non-null.
Eigen::VectorXd posterior_update(const LowRankGmm& lr, const Eigen::VectorXd& x,
                                 Eigen::VectorXd* weights_out = nullptr);

struct PosteriorTerms {
  Eigen::VectorXd nu;     // per-component posterior mean
  Eigen::MatrixXd omega;  // per-component posterior covariance
};
PosteriorTerms posterior_terms(const LowRankGmm& lr, int k,
                               const Eigen::VectorXd& x);

// posterior_update applied independently per column.
Eigen::MatrixXd update_all_patches(const LowRankGmm& lr,
                                   const Eigen::MatrixXd& estimates);

// Snapshot: {K:u64, P:u64, sigma2:f64, per component pi:f64, mean (P f64),
// eigvals (P f64), eigvecs (P*P f64 row-major)}, little-endian.
void save_model(const std::string& path, const GmmModel& model, double sigma2);
std::pair<GmmModel, double> load_model(const std::string& path);

}  // namespace csgmm::gmm

#endif
