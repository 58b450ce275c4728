#include "csgmm/gmm.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <stdexcept>

namespace csgmm::gmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

// Relative covariance floor; keeps components positive definite on flat
// image regions.
double floor_epsilon(const Eigen::MatrixXd& cov) {
  const double rel = 1e-6 * cov.trace() / static_cast<double>(cov.rows());
  return std::max(rel, 1e-12);
}

// Eigendecompose the (already floored) covariance, eigenvalues descending,
// clamped at zero.
void finalize_component(GaussianComponent& c) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.covariance);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("gmm: eigendecomposition failed");
  const int p = static_cast<int>(c.covariance.rows());
  c.eigvals.resize(p);
  c.eigvecs.resize(p, p);
  for (int i = 0; i < p; ++i) {  // ascending -> descending
    c.eigvals[i] = std::max(es.eigenvalues()[p - 1 - i], 0.0);
    c.eigvecs.col(i) = es.eigenvectors().col(p - 1 - i);
  }
}

// Per-component log-densities of every column, K x Np.
Eigen::MatrixXd log_densities(const GmmModel& model, const Eigen::MatrixXd& x) {
  const int k = static_cast<int>(model.components.size());
  const int p = static_cast<int>(x.rows());
  const int np = static_cast<int>(x.cols());
  Eigen::MatrixXd out(k, np);
  for (int j = 0; j < k; ++j) {
    const GaussianComponent& c = model.components[j];
    double log_det = 0.0;
    for (int i = 0; i < p; ++i) log_det += std::log(c.eigvals[i]);
    const Eigen::MatrixXd t = c.eigvecs.transpose() * (x.colwise() - c.mean);
    const Eigen::VectorXd inv = c.eigvals.cwiseInverse();
    out.row(j) = (-0.5 * ((t.array().square().colwise() * inv.array())
                              .colwise()
                              .sum() +
                          log_det + p * kLog2Pi))
                     .matrix();
  }
  return out;
}

// E-step: responsibilities (K x Np) and the data log-likelihood.
double responsibilities(const GmmModel& model, const Eigen::MatrixXd& x,
                        Eigen::MatrixXd& resp) {
  const int k = static_cast<int>(model.components.size());
  const int np = static_cast<int>(x.cols());
  resp = log_densities(model, x);
  for (int j = 0; j < k; ++j)
    resp.row(j).array() += std::log(model.components[j].weight);
  double ll = 0.0;
  for (int i = 0; i < np; ++i) {
    const double mx = resp.col(i).maxCoeff();
    const double lse = mx + std::log((resp.col(i).array() - mx).exp().sum());
    ll += lse;
    resp.col(i) = (resp.col(i).array() - lse).exp();
  }
  return ll;
}

void m_step(GmmModel& model, const Eigen::MatrixXd& x,
            const Eigen::MatrixXd& resp) {
  const int k = static_cast<int>(model.components.size());
  const int np = static_cast<int>(x.cols());
  for (int j = 0; j < k; ++j) {
    const Eigen::VectorXd r = resp.row(j).transpose();
    const double nk = r.sum();
    if (nk < 1e-12 * np) continue;  // starved component keeps its parameters
    GaussianComponent& c = model.components[j];
    c.weight = nk / np;
    c.mean = (x * r) / nk;
    const Eigen::MatrixXd centered = x.colwise() - c.mean;
    c.covariance =
        (centered.array().rowwise() * r.transpose().array()).matrix() *
        centered.transpose() / nk;
    c.covariance.diagonal().array() += floor_epsilon(c.covariance);
    finalize_component(c);
  }
  // Starved components may leave the weights slightly off unity.
  double total = 0.0;
  for (const auto& c : model.components) total += c.weight;
  for (auto& c : model.components) c.weight /= total;
}

void run_em(GmmModel& model, const Eigen::MatrixXd& x, int iters, double tol) {
  Eigen::MatrixXd resp;
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < iters; ++it) {
    const double ll = responsibilities(model, x, resp);
    model.log_likelihood_trace.push_back(ll);
    if (it > 0 && ll - prev < tol * (1.0 + std::abs(ll))) break;
    prev = ll;
    m_step(model, x, resp);
  }
}

// Deterministic farthest-point seeding: depends only on the multiset of
// patch values, so duplicating the dataset leaves the fit unchanged.
std::vector<int> seed_centers(const Eigen::MatrixXd& x, int k) {
  const int np = static_cast<int>(x.cols());
  const Eigen::VectorXd mean = x.rowwise().mean();
  std::vector<int> centers;
  int first = 0;
  double best = -1.0;
  for (int i = 0; i < np; ++i) {
    const double d = (x.col(i) - mean).squaredNorm();
    if (d > best) {
      best = d;
      first = i;
    }
  }
  centers.push_back(first);
  Eigen::VectorXd min_dist =
      (x.colwise() - x.col(first)).colwise().squaredNorm().transpose();
  while (static_cast<int>(centers.size()) < k) {
    int next = 0;
    best = -1.0;
    for (int i = 0; i < np; ++i)
      if (min_dist[i] > best) {
        best = min_dist[i];
        next = i;
      }
    centers.push_back(next);
    min_dist = min_dist.cwiseMin(
        (x.colwise() - x.col(next)).colwise().squaredNorm().transpose());
  }
  return centers;
}

}  // namespace

GmmModel em_fit(const Eigen::MatrixXd& patches, int k, std::uint64_t /*seed*/,
                int max_em_iters, double tol) {
  const int np = static_cast<int>(patches.cols());
  const int p = static_cast<int>(patches.rows());
  if (k < 1) throw std::invalid_argument("em_fit: k must be >= 1");
  if (np < k) throw std::invalid_argument("em_fit: fewer patches than components");
  if (!patches.allFinite()) throw std::invalid_argument("em_fit: non-finite input");

  const std::vector<int> centers = seed_centers(patches, k);
  // One Lloyd step: hard-assign to the nearest seed, then moment-match.
  std::vector<int> assign(np);
  for (int i = 0; i < np; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int j = 0; j < k; ++j) {
      const double d = (patches.col(i) - patches.col(centers[j])).squaredNorm();
      if (d < best) {
        best = d;
        assign[i] = j;
      }
    }
  }
  const Eigen::VectorXd global_mean = patches.rowwise().mean();
  Eigen::MatrixXd global_centered = patches.colwise() - global_mean;
  Eigen::MatrixXd global_cov =
      global_centered * global_centered.transpose() / np;
  global_cov.diagonal().array() += floor_epsilon(global_cov);

  GmmModel model;
  model.components.resize(k);
  for (int j = 0; j < k; ++j) {
    GaussianComponent& c = model.components[j];
    int count = 0;
    c.mean = Eigen::VectorXd::Zero(p);
    for (int i = 0; i < np; ++i)
      if (assign[i] == j) {
        c.mean += patches.col(i);
        ++count;
      }
    if (count == 0) {
      c.mean = patches.col(centers[j]);
      c.covariance = global_cov;
      c.weight = 1.0 / np;
    } else {
      c.mean /= count;
      Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
      for (int i = 0; i < np; ++i)
        if (assign[i] == j) {
          const Eigen::VectorXd d = patches.col(i) - c.mean;
          scatter += d * d.transpose();
        }
      c.covariance = scatter / count;
      c.covariance.diagonal().array() += floor_epsilon(c.covariance);
      c.weight = static_cast<double>(count) / np;
    }
    finalize_component(c);
  }
  double total = 0.0;
  for (const auto& c : model.components) total += c.weight;
  for (auto& c : model.components) c.weight /= total;

  run_em(model, patches, max_em_iters, tol);
  return model;
}

GmmModel em_refine(GmmModel model, const Eigen::MatrixXd& patches, int iters,
                   double tol) {
  if (model.components.empty())
    throw std::invalid_argument("em_refine: empty model");
  if (!patches.allFinite())
    throw std::invalid_argument("em_refine: non-finite input");
  model.log_likelihood_trace.clear();
  run_em(model, patches, iters, tol);
  return model;
}

LowRankGmm evt_lowrank(const GmmModel& model, int gamma, double noise_variance) {
  if (model.components.empty())
    throw std::invalid_argument("evt_lowrank: empty model");
  const int p = static_cast<int>(model.components.front().mean.size());
  if (gamma < 1 || gamma >= p)
    throw std::invalid_argument("evt_lowrank: gamma must lie in [1, P)");
  if (noise_variance <= 0.0)
    throw std::invalid_argument("evt_lowrank: noise variance must be positive");
  LowRankGmm lr;
  lr.noise_variance = noise_variance;
  lr.components.reserve(model.components.size());
  for (const GaussianComponent& c : model.components) {
    LowRankComponent o;
    o.weight = c.weight;
    o.mean = c.mean;
    o.eigvecs = c.eigvecs;
    const double tau = c.eigvals[gamma];  // lambda_{gamma+1}, 1-based
    o.eigvals = (c.eigvals.array() - tau).max(0.0);
    o.covariance = o.eigvecs * o.eigvals.asDiagonal() * o.eigvecs.transpose();
    o.rank = static_cast<int>((o.eigvals.array() > 0.0).count());
    lr.components.push_back(std::move(o));
  }
  return lr;
}

Eigen::VectorXd posterior_update(const LowRankGmm& lr, const Eigen::VectorXd& x,
                                 Eigen::VectorXd* weights_out) {
  const int k = static_cast<int>(lr.components.size());
  const int p = static_cast<int>(x.size());
  const double s2 = lr.noise_variance;
  if (s2 <= 0.0)
    throw std::invalid_argument("posterior_update: noise variance must be positive");
  Eigen::VectorXd log_phi(k);
  Eigen::MatrixXd nus(p, k);
  for (int j = 0; j < k; ++j) {
    const LowRankComponent& c = lr.components[j];
    const Eigen::VectorXd t = c.eigvecs.transpose() * (x - c.mean);
    const Eigen::ArrayXd evid = c.eigvals.array() + s2;  // eigvals of E+Sigma
    log_phi[j] = std::log(c.weight) -
                 0.5 * ((t.array().square() / evid).sum() +
                        evid.log().sum() + p * kLog2Pi);
    nus.col(j) =
        c.eigvecs * (c.eigvals.array() / evid * t.array()).matrix() + c.mean;
  }
  const double mx = log_phi.maxCoeff();
  Eigen::VectorXd phi = (log_phi.array() - mx).exp();
  phi /= phi.sum();
  if (weights_out) *weights_out = phi;
  return nus * phi;
}

PosteriorTerms posterior_terms(const LowRankGmm& lr, int k,
                               const Eigen::VectorXd& x) {
  const LowRankComponent& c = lr.components.at(k);
  const double s2 = lr.noise_variance;
  const Eigen::ArrayXd evid = c.eigvals.array() + s2;
  const Eigen::VectorXd t = c.eigvecs.transpose() * (x - c.mean);
  PosteriorTerms out;
  out.nu = c.eigvecs * (c.eigvals.array() / evid * t.array()).matrix() + c.mean;
  out.omega = c.eigvecs *
              (c.eigvals.array() * s2 / evid).matrix().asDiagonal() *
              c.eigvecs.transpose();
  return out;
}

Eigen::MatrixXd update_all_patches(const LowRankGmm& lr,
                                   const Eigen::MatrixXd& estimates) {
  const int k = static_cast<int>(lr.components.size());
  const int p = static_cast<int>(estimates.rows());
  const int np = static_cast<int>(estimates.cols());
  const double s2 = lr.noise_variance;
  if (s2 <= 0.0)
    throw std::invalid_argument("update_all_patches: noise variance must be positive");
  if (!lr.components.empty() && lr.components.front().mean.size() != p)
    throw std::invalid_argument("update_all_patches: patch dimension mismatch");

  // Batched form of posterior_update: per component, whiten once, then
  // combine the per-component posterior means with log-space weights.
  Eigen::MatrixXd log_phi(k, np);
  std::vector<Eigen::MatrixXd> nus(k);
  for (int j = 0; j < k; ++j) {
    const LowRankComponent& c = lr.components[j];
    const Eigen::ArrayXd evid = c.eigvals.array() + s2;
    const Eigen::MatrixXd t =
        c.eigvecs.transpose() * (estimates.colwise() - c.mean);
    log_phi.row(j) =
        (-0.5 * ((t.array().square().colwise() / evid).colwise().sum() +
                 evid.log().sum() + p * kLog2Pi) +
         std::log(c.weight))
            .matrix();
    nus[j] = (c.eigvecs * (t.array().colwise() * (c.eigvals.array() / evid))
                              .matrix())
                 .colwise() +
             c.mean;
  }
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(p, np);
  for (int i = 0; i < np; ++i) {
    const double mx = log_phi.col(i).maxCoeff();
    Eigen::VectorXd phi = (log_phi.col(i).array() - mx).exp();
    phi /= phi.sum();
    for (int j = 0; j < k; ++j) out.col(i) += phi[j] * nus[j].col(i);
  }
  return out;
}

namespace {

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& os, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(os, bits);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) throw std::runtime_error("model snapshot truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& is) {
  const std::uint64_t bits = read_u64(is);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

}  // namespace

void save_model(const std::string& path, const GmmModel& model, double sigma2) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  const std::uint64_t k = model.components.size();
  const std::uint64_t p = k ? model.components.front().mean.size() : 0;
  write_u64(os, k);
  write_u64(os, p);
  write_f64(os, sigma2);
  for (const auto& c : model.components) {
    write_f64(os, c.weight);
    for (std::uint64_t i = 0; i < p; ++i) write_f64(os, c.mean[i]);
    for (std::uint64_t i = 0; i < p; ++i) write_f64(os, c.eigvals[i]);
    for (std::uint64_t r = 0; r < p; ++r)
      for (std::uint64_t cc = 0; cc < p; ++cc) write_f64(os, c.eigvecs(r, cc));
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::pair<GmmModel, double> load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  const std::uint64_t k = read_u64(is);
  const std::uint64_t p = read_u64(is);
  const double sigma2 = read_f64(is);
  GmmModel model;
  model.components.resize(k);
  for (auto& c : model.components) {
    c.weight = read_f64(is);
    c.mean.resize(p);
    for (std::uint64_t i = 0; i < p; ++i) c.mean[i] = read_f64(is);
    c.eigvals.resize(p);
    for (std::uint64_t i = 0; i < p; ++i) c.eigvals[i] = read_f64(is);
    c.eigvecs.resize(p, p);
    for (std::uint64_t r = 0; r < p; ++r)
      for (std::uint64_t cc = 0; cc < p; ++cc) c.eigvecs(r, cc) = read_f64(is);
    c.covariance = c.eigvecs * c.eigvals.asDiagonal() * c.eigvecs.transpose();
  }
  return {std::move(model), sigma2};
}

}  // namespace csgmm::gmm
