#include "csgmm/ple.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace csgmm::ple {

namespace {

double floor_epsilon(const Eigen::MatrixXd& cov) {
  const double rel = 1e-6 * cov.trace() / static_cast<double>(cov.rows());
  return std::max(rel, 1e-12);
}

void finalize_component(PleModel::Component& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.covariance);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("ple: eigendecomposition failed");
  const int p = static_cast<int>(c.covariance.rows());
  c.eigvals.resize(p);
  c.eigvecs.resize(p, p);
  for (int i = 0; i < p; ++i) {
    c.eigvals[i] = std::max(es.eigenvalues()[p - 1 - i], 0.0);
    c.eigvecs.col(i) = es.eigenvectors().col(p - 1 - i);
  }
}

void check_model(const PleModel& model) {
  if (model.components.empty())
    throw std::invalid_argument("ple: model has no components");
  if (model.noise_variance <= 0.0)
    throw std::invalid_argument("ple: noise variance must be positive");
}

}  // namespace

PleModel ple_init(const Eigen::MatrixXd& patches, int k, std::uint64_t seed,
                  double sigma2, int gamma) {
  if (sigma2 <= 0.0) throw std::invalid_argument("ple_init: sigma2 must be positive");
  gmm::GmmModel g = gmm::em_fit(patches, k, seed, 5, 1e-6);
  PleModel model;
  model.noise_variance = sigma2;
  model.gamma = gamma;
  model.components.resize(k);
  for (int j = 0; j < k; ++j) {
    model.components[j].mean = g.components[j].mean;
    model.components[j].covariance = g.components[j].covariance;
    model.components[j].eigvecs = g.components[j].eigvecs;
    model.components[j].eigvals = g.components[j].eigvals;
  }
  ple_lowrank(model);
  // Hard assignments from the mixture posteriors, then one M-step so the
  // class statistics match the assignment partition.
  const int np = static_cast<int>(patches.cols());
  const int p = static_cast<int>(patches.rows());
  std::vector<int> assign(np, 0);
  if (k > 1) {
    Eigen::MatrixXd score(k, np);
    for (int j = 0; j < k; ++j) {
      const auto& c = g.components[j];
      const Eigen::MatrixXd t =
          c.eigvecs.transpose() * (patches.colwise() - c.mean);
      const Eigen::ArrayXd inv = c.eigvals.array().inverse();
      score.row(j) =
          (-0.5 * ((t.array().square().colwise() * inv).colwise().sum() +
                   c.eigvals.array().log().sum()) +
           std::log(c.weight))
              .matrix();
    }
    for (int i = 0; i < np; ++i) {
      score.col(i).maxCoeff(&assign[i]);
    }
  }
  (void)p;
  ple_mstep(model, patches, assign);
  ple_lowrank(model);
  return model;
}

double selection_criterion(const PleModel& model, int k,
                           const Eigen::VectorXd& x) {
  check_model(model);
  const PleModel::Component& c = model.components.at(k);
  const double s2 = model.noise_variance;
  const Eigen::VectorXd t = c.eigvecs.transpose() * (x - c.mean);
  const Eigen::ArrayXd evid = c.lr_eigvals.array() + s2;
  const Eigen::ArrayXd gain = c.lr_eigvals.array() / evid;
  const Eigen::ArrayXd t2 = t.array().square();
  const double fidelity = ((1.0 - gain).square() * t2).sum() / s2;
  const double prior = (gain.square() * t2 / evid).sum();
  return fidelity + 0.5 * evid.log().sum() + prior;
}

std::pair<Eigen::MatrixXd, std::vector<int>> ple_estep(
    const PleModel& model, const Eigen::MatrixXd& patches) {
  check_model(model);
  const int k = static_cast<int>(model.components.size());
  const int p = static_cast<int>(patches.rows());
  const int np = static_cast<int>(patches.cols());
  if (model.components.front().mean.size() != p)
    throw std::invalid_argument("ple_estep: patch dimension mismatch");
  const double s2 = model.noise_variance;

  Eigen::MatrixXd crit(k, np);
  for (int j = 0; j < k; ++j) {
    const PleModel::Component& c = model.components[j];
    const Eigen::MatrixXd t =
        c.eigvecs.transpose() * (patches.colwise() - c.mean);
    const Eigen::ArrayXd evid = c.lr_eigvals.array() + s2;
    const Eigen::ArrayXd gain = c.lr_eigvals.array() / evid;
    const Eigen::ArrayXd fid_w = (1.0 - gain).square() / s2;
    const Eigen::ArrayXd prior_w = gain.square() / evid;
    crit.row(j) =
        ((t.array().square().colwise() * (fid_w + prior_w)).colwise().sum() +
         0.5 * evid.log().sum())
            .matrix();
  }
  std::vector<int> assign(np);
  for (int i = 0; i < np; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j)
      if (crit(j, i) < best) {  // ties broken by lowest k
        best = crit(j, i);
        assign[i] = j;
      }
  }
  Eigen::MatrixXd estimates(p, np);
  for (int j = 0; j < k; ++j) {
    const PleModel::Component& c = model.components[j];
    const Eigen::ArrayXd gain =
        c.lr_eigvals.array() / (c.lr_eigvals.array() + s2);
    for (int i = 0; i < np; ++i) {
      if (assign[i] != j) continue;
      const Eigen::VectorXd t = c.eigvecs.transpose() * (patches.col(i) - c.mean);
      estimates.col(i) = c.eigvecs * (gain * t.array()).matrix() + c.mean;
    }
  }
  return {std::move(estimates), std::move(assign)};
}

void ple_mstep(PleModel& model, const Eigen::MatrixXd& estimates,
               const std::vector<int>& assignments) {
  check_model(model);
  const int k = static_cast<int>(model.components.size());
  const int p = static_cast<int>(estimates.rows());
  const int np = static_cast<int>(estimates.cols());
  if (static_cast<int>(assignments.size()) != np)
    throw std::invalid_argument("ple_mstep: assignment count mismatch");
  for (int a : assignments)
    if (a < 0 || a >= k)
      throw std::invalid_argument("ple_mstep: assignment out of range");
  for (int j = 0; j < k; ++j) {
    int count = 0;
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < np; ++i)
      if (assignments[i] == j) {
        mean += estimates.col(i);
        ++count;
      }
    if (count == 0) continue;  // empty class keeps previous parameters
    mean /= count;
    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
    for (int i = 0; i < np; ++i)
      if (assignments[i] == j) {
        const Eigen::VectorXd d = estimates.col(i) - mean;
        scatter += d * d.transpose();
      }
    PleModel::Component& c = model.components[j];
    c.mean = std::move(mean);
    c.covariance = scatter / count;
    c.covariance.diagonal().array() += floor_epsilon(c.covariance);
    finalize_component(c);
  }
}

void ple_lowrank(PleModel& model) {
  check_model(model);
  // Shared EVT code path with the mixture model.
  gmm::GmmModel g;
  g.components.resize(model.components.size());
  for (std::size_t j = 0; j < model.components.size(); ++j) {
    g.components[j].weight = 1.0 / static_cast<double>(model.components.size());
    g.components[j].mean = model.components[j].mean;
    g.components[j].covariance = model.components[j].covariance;
    g.components[j].eigvecs = model.components[j].eigvecs;
    g.components[j].eigvals = model.components[j].eigvals;
  }
  const gmm::LowRankGmm lr =
      gmm::evt_lowrank(g, model.gamma, model.noise_variance);
  for (std::size_t j = 0; j < model.components.size(); ++j) {
    model.components[j].lr_eigvals = lr.components[j].eigvals;
    model.components[j].rank = lr.components[j].rank;
  }
}

}  // namespace csgmm::ple
