#ifndef CSGMM_PLE_HPP
#define CSGMM_PLE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <vector>

#include "csgmm/gmm.hpp"

namespace csgmm::ple {

// Piecewise linear estimator state: per class, full-rank ML statistics plus
// the EVT low-rank covariance used by the E-step.
struct PleModel {
  struct Component {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;  // full-rank ML estimate, floored
    Eigen::MatrixXd eigvecs;     // of the full-rank covariance, descending
    Eigen::VectorXd eigvals;
    Eigen::VectorXd lr_eigvals;  // EVT-thresholded; shares eigvecs
    int rank = 0;
  };
  std::vector<Component> components;
  double noise_variance = 0.0;
  int gamma = 0;
};

// Hard-assignment initialization from one pass of gmm::em_fit.
PleModel ple_init(const Eigen::MatrixXd& patches, int k, std::uint64_t seed,
                  double sigma2, int gamma);

// E-step: per patch, Wiener estimates under every class's low-rank Gaussian,
// then model selection by the MAP criterion (evidence-covariance form).
// Returns the selected estimates and the per-patch class indices.
std::pair<Eigen::MatrixXd, std::vector<int>> ple_estep(
    const PleModel& model, const Eigen::MatrixXd& patches);

// Value of the selection criterion for patch x under class k (exposed so the
// argmin property is directly assertable).
double selection_criterion(const PleModel& model, int k,
                           const Eigen::VectorXd& x);

// M-step: per-class ML mean and (biased) scatter with covariance floor.
// Empty classes retain their previous parameters.
void ple_mstep(PleModel& model, const Eigen::MatrixXd& estimates,
               const std::vector<int>& assignments);

// EVT low-ranking of every class covariance (delegates to gmm::evt_lowrank).
void ple_lowrank(PleModel& model);

}  // namespace csgmm::ple

#endif
