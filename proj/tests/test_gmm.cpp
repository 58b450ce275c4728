#include <doctest.h>

#include <cmath>
#include <vector>

#include "csgmm/gmm.hpp"
#include "csgmm/rng.hpp"

using namespace csgmm;
using namespace csgmm::gmm;

namespace {

Eigen::MatrixXd random_matrix(int r, int c, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(r, c);
  for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.next_normal();
  return m;
}

Eigen::MatrixXd random_orthogonal(int p, std::uint64_t seed) {
  const Eigen::MatrixXd g = random_matrix(p, p, seed);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  return q;
}

// Component with a prescribed spectrum, eigenvalues descending.
GaussianComponent make_component(const Eigen::VectorXd& eigvals,
                                 const Eigen::VectorXd& mean,
                                 std::uint64_t seed, double weight = 1.0) {
  GaussianComponent c;
  c.weight = weight;
  c.mean = mean;
  c.eigvecs = random_orthogonal(static_cast<int>(eigvals.size()), seed);
  c.eigvals = eigvals;
  c.covariance = c.eigvecs * eigvals.asDiagonal() * c.eigvecs.transpose();
  return c;
}

// Cyclic Jacobi eigensolver, independent of Eigen's decompositions.
void jacobi_eigen(Eigen::MatrixXd a, Eigen::VectorXd& vals,
                  Eigen::MatrixXd& vecs) {
  const int n = static_cast<int>(a.rows());
  vecs = Eigen::MatrixXd::Identity(n, n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (off < 1e-24) break;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-18) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        Eigen::MatrixXd rot = Eigen::MatrixXd::Identity(n, n);
        rot(p, p) = c;
        rot(q, q) = c;
        rot(p, q) = s;
        rot(q, p) = -s;
        a = rot.transpose() * a * rot;
        vecs = vecs * rot;
      }
  }
  vals = a.diagonal();
  // Sort descending.
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(),
            [&](int i, int j) { return vals[i] > vals[j]; });
  Eigen::VectorXd sv(n);
  Eigen::MatrixXd svec(n, n);
  for (int i = 0; i < n; ++i) {
    sv[i] = vals[idx[i]];
    svec.col(i) = vecs.col(idx[i]);
  }
  vals = sv;
  vecs = svec;
}

// Two interleaved Gaussian clusters in R^4 at means +-5 e1.
Eigen::MatrixXd two_cluster_data(std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(4, 1000);
  for (int i = 0; i < 1000; ++i) {
    const double center = (i % 2 == 0) ? 5.0 : -5.0;
    x(0, i) = center + rng.next_normal();
    for (int d = 1; d < 4; ++d) x(d, i) = rng.next_normal();
  }
  return x;
}

}  // namespace

TEST_CASE("em_fit k=1 closed form: sample mean and floored covariance") {
  const Eigen::MatrixXd x = random_matrix(3, 40, 1);
  const GmmModel m = em_fit(x, 1, 0, 10, 1e-9);
  REQUIRE(m.components.size() == 1);
  const GaussianComponent& c = m.components[0];
  CHECK(c.weight == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::VectorXd mean = x.rowwise().mean();
  CHECK((c.mean - mean).cwiseAbs().maxCoeff() < 1e-10);
  const Eigen::MatrixXd centered = x.colwise() - mean;
  Eigen::MatrixXd cov = centered * centered.transpose() / 40.0;
  const double eps = std::max(1e-6 * cov.trace() / 3.0, 1e-12);
  cov.diagonal().array() += eps;
  CHECK((c.covariance - cov).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("em_fit recovers two well-separated synthetic clusters") {
  const Eigen::MatrixXd x = two_cluster_data(7);
  const GmmModel m = em_fit(x, 2, 0, 50, 1e-10);
  REQUIRE(m.components.size() == 2);
  double w_sum = 0.0;
  for (const auto& c : m.components) w_sum += c.weight;
  CHECK(w_sum == doctest::Approx(1.0).epsilon(1e-10));
  // Match each recovered mean to the nearer truth.
  const Eigen::VectorXd m0 = m.components[0].mean;
  const Eigen::VectorXd m1 = m.components[1].mean;
  const Eigen::VectorXd plus = m0[0] > m1[0] ? m0 : m1;
  const Eigen::VectorXd minus = m0[0] > m1[0] ? m1 : m0;
  Eigen::VectorXd truth_plus = Eigen::VectorXd::Zero(4);
  truth_plus[0] = 5.0;
  CHECK((plus - truth_plus).norm() < 0.2);
  CHECK((minus + truth_plus).norm() < 0.2);
  for (const auto& c : m.components) CHECK(std::abs(c.weight - 0.5) < 0.05);
}

TEST_CASE("em_fit is invariant to duplicating the dataset") {
  const Eigen::MatrixXd x = two_cluster_data(9);
  Eigen::MatrixXd xx(4, 2000);
  xx << x, x;
  const GmmModel a = em_fit(x, 2, 3, 20, 1e-10);
  const GmmModel b = em_fit(xx, 2, 3, 20, 1e-10);
  REQUIRE(a.components.size() == b.components.size());
  for (std::size_t j = 0; j < a.components.size(); ++j) {
    CHECK((a.components[j].mean - b.components[j].mean).cwiseAbs().maxCoeff() <
          1e-8);
    CHECK((a.components[j].covariance - b.components[j].covariance)
              .cwiseAbs()
              .maxCoeff() < 1e-8);
    CHECK(a.components[j].weight ==
          doctest::Approx(b.components[j].weight).epsilon(1e-10));
  }
}

TEST_CASE("EM log-likelihood is non-decreasing on 10 seeded datasets") {
  for (int t = 0; t < 10; ++t) {
    const Eigen::MatrixXd x = random_matrix(5, 120, 500 + t);
    const GmmModel m = em_fit(x, 3, t, 25, 0.0);
    REQUIRE(m.log_likelihood_trace.size() >= 2);
    for (std::size_t i = 1; i < m.log_likelihood_trace.size(); ++i) {
      const double prev = m.log_likelihood_trace[i - 1];
      const double cur = m.log_likelihood_trace[i];
      CHECK(cur >= prev - 1e-9 * (1.0 + std::abs(prev)));
    }
  }
}

TEST_CASE("em_fit rejects degenerate inputs") {
  const Eigen::MatrixXd x = random_matrix(3, 2, 1);
  CHECK_THROWS_AS(em_fit(x, 3, 0, 5, 1e-8), std::invalid_argument);
  CHECK_THROWS_AS(em_fit(x, 0, 0, 5, 1e-8), std::invalid_argument);
  Eigen::MatrixXd bad = x;
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(em_fit(bad, 1, 0, 5, 1e-8), std::invalid_argument);
}

TEST_CASE("evt_lowrank on spectrum diag(5,3,1) with gamma=1 gives (2,0,0)") {
  GmmModel m;
  Eigen::VectorXd ev(3);
  ev << 5, 3, 1;
  m.components.push_back(make_component(ev, Eigen::VectorXd::Zero(3), 11));
  const LowRankGmm lr = evt_lowrank(m, 1, 1e-5);
  REQUIRE(lr.components.size() == 1);
  const Eigen::VectorXd& out = lr.components[0].eigvals;
  CHECK(out[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);
  CHECK(lr.components[0].rank == 1);
  // Means and weights copied unchanged.
  CHECK((lr.components[0].mean - m.components[0].mean).norm() == 0.0);
  CHECK(lr.components[0].weight == m.components[0].weight);
}

TEST_CASE("evt_lowrank is a fixed point on an already rank-gamma covariance") {
  GmmModel m;
  Eigen::VectorXd ev(4);
  ev << 4, 2, 0, 0;
  m.components.push_back(make_component(ev, Eigen::VectorXd::Zero(4), 12));
  const LowRankGmm lr = evt_lowrank(m, 2, 1e-5);
  CHECK((lr.components[0].covariance - m.components[0].covariance)
            .cwiseAbs()
            .maxCoeff() < 1e-10);
}

TEST_CASE("evt_lowrank gamma and sigma2 validation") {
  GmmModel m;
  Eigen::VectorXd ev(3);
  ev << 3, 2, 1;
  m.components.push_back(make_component(ev, Eigen::VectorXd::Zero(3), 13));
  CHECK_THROWS_AS(evt_lowrank(m, 0, 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(evt_lowrank(m, 3, 1e-5), std::invalid_argument);
  CHECK_THROWS_AS(evt_lowrank(m, 1, 0.0), std::invalid_argument);
}

TEST_CASE("evt_lowrank matches an independent Jacobi SVT oracle") {
  for (int t = 0; t < 5; ++t) {
    const int p = 8, gamma = 4;
    const Eigen::MatrixXd g = random_matrix(p, p + 2, 70 + t);
    const Eigen::MatrixXd sigma = g * g.transpose() / (p + 2);
    GmmModel m;
    GaussianComponent c;
    c.weight = 1.0;
    c.mean = Eigen::VectorXd::Zero(p);
    c.covariance = sigma;
    jacobi_eigen(sigma, c.eigvals, c.eigvecs);
    m.components.push_back(c);

    const LowRankGmm lr = evt_lowrank(m, gamma, 1e-5);

    // Oracle: SVT of sigma with tau = lambda_{gamma+1}, via Jacobi.
    Eigen::VectorXd vals;
    Eigen::MatrixXd vecs;
    jacobi_eigen(sigma, vals, vecs);
    const double tau = vals[gamma];
    Eigen::VectorXd shrunk =
        (vals.array() - tau).max(0.0).matrix();
    const Eigen::MatrixXd oracle =
        vecs * shrunk.asDiagonal() * vecs.transpose();
    CHECK((lr.components[0].covariance - oracle).cwiseAbs().maxCoeff() < 1e-8);

    // Rank = eigenvalues strictly above lambda_{gamma+1}.
    int above = 0;
    for (int i = 0; i < p; ++i)
      if (vals[i] > tau + 1e-12) ++above;
    CHECK(lr.components[0].rank == above);
    CHECK(lr.components[0].rank <= gamma);

    // Loewner order: sigma - sigma_tilde is PSD.
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(
        sigma - lr.components[0].covariance);
    CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  }
}

TEST_CASE("posterior_update with K=1 is the Wiener estimate with phi=1") {
  Eigen::VectorXd ev(3);
  ev << 2.0, 0.5, 0.0;
  GmmModel m;
  Eigen::VectorXd mu(3);
  mu << 0.1, -0.2, 0.3;
  m.components.push_back(make_component(ev, mu, 21));
  const LowRankGmm lr = evt_lowrank(m, 2, 1e-2);
  const Eigen::VectorXd x = random_matrix(3, 1, 22).col(0);

  Eigen::VectorXd phi;
  const Eigen::VectorXd out = posterior_update(lr, x, &phi);
  REQUIRE(phi.size() == 1);
  CHECK(phi[0] == doctest::Approx(1.0).epsilon(1e-12));

  const Eigen::MatrixXd st = lr.components[0].covariance;
  const Eigen::MatrixXd e =
      1e-2 * Eigen::MatrixXd::Identity(3, 3);
  const Eigen::VectorXd wiener =
      st * (e + st).inverse() * (x - lr.components[0].mean) +
      lr.components[0].mean;
  CHECK((out - wiener).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("posterior_update with zero covariances pulls to the prior means") {
  GmmModel m;
  Eigen::VectorXd ev = Eigen::VectorXd::Zero(3);
  Eigen::VectorXd mu1(3), mu2(3);
  mu1 << 1, 0, 0;
  mu2 << 0, 1, 0;
  m.components.push_back(make_component(ev, mu1, 31, 0.5));
  m.components.push_back(make_component(ev, mu2, 32, 0.5));
  const LowRankGmm lr = evt_lowrank(m, 1, 1e-3);
  const Eigen::VectorXd x = Eigen::VectorXd::Constant(3, 0.5);
  Eigen::VectorXd phi;
  const Eigen::VectorXd out = posterior_update(lr, x, &phi);
  CHECK(phi.sum() == doctest::Approx(1.0).epsilon(1e-12));
  const Eigen::VectorXd expect = phi[0] * mu1 + phi[1] * mu2;
  CHECK((out - expect).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("posterior terms match the information-form oracle, 50 instances") {
  Rng pick(404);
  for (int t = 0; t < 50; ++t) {
    const int p = 2 + static_cast<int>(pick.next_below(7));  // P <= 8
    const int k = 1 + static_cast<int>(pick.next_below(3));  // K <= 3
    const double s2 = 1e-3 + 0.1 * pick.next_double();
    LowRankGmm lr;
    lr.noise_variance = s2;
    for (int j = 0; j < k; ++j) {
      // Full-rank SPD covariance so the information form is well defined.
      const Eigen::MatrixXd g = random_matrix(p, p + 3, 1000 + 10 * t + j);
      const Eigen::MatrixXd sigma =
          g * g.transpose() / (p + 3) +
          0.05 * Eigen::MatrixXd::Identity(p, p);
      LowRankComponent c;
      c.weight = 1.0 / k;
      c.mean = random_matrix(p, 1, 2000 + 10 * t + j).col(0);
      c.covariance = sigma;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sigma);
      c.eigvals = es.eigenvalues().reverse();
      c.eigvecs = es.eigenvectors().rowwise().reverse();
      c.rank = p;
      lr.components.push_back(std::move(c));
    }
    const Eigen::VectorXd x = random_matrix(p, 1, 3000 + t).col(0);
    const Eigen::MatrixXd e_inv =
        Eigen::MatrixXd::Identity(p, p) / s2;
    for (int j = 0; j < k; ++j) {
      const PosteriorTerms terms = posterior_terms(lr, j, x);
      const Eigen::MatrixXd omega_oracle =
          (e_inv + lr.components[j].covariance.inverse()).inverse();
      const Eigen::VectorXd nu_oracle =
          lr.components[j].mean +
          omega_oracle * e_inv * (x - lr.components[j].mean);
      CHECK((terms.omega - omega_oracle).cwiseAbs().maxCoeff() < 1e-8);
      CHECK((terms.nu - nu_oracle).cwiseAbs().maxCoeff() < 1e-8);
    }
    // Weights normalize; posterior mean is the phi-mix of the nus.
    Eigen::VectorXd phi;
    const Eigen::VectorXd out = posterior_update(lr, x, &phi);
    CHECK(phi.sum() == doctest::Approx(1.0).epsilon(1e-12));
    Eigen::VectorXd mix = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < k; ++j) mix += phi[j] * posterior_terms(lr, j, x).nu;
    CHECK((out - mix).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("per-component posterior mean is affine in the input") {
  Eigen::VectorXd ev(4);
  ev << 3, 1, 0.2, 0;
  GmmModel m;
  m.components.push_back(make_component(ev, random_matrix(4, 1, 51).col(0), 52));
  const LowRankGmm lr = evt_lowrank(m, 3, 1e-3);
  const Eigen::VectorXd a = random_matrix(4, 1, 53).col(0);
  const Eigen::VectorXd b = random_matrix(4, 1, 54).col(0);
  const Eigen::VectorXd na = posterior_terms(lr, 0, a).nu;
  const Eigen::VectorXd nb = posterior_terms(lr, 0, b).nu;
  const Eigen::VectorXd mid = posterior_terms(lr, 0, 0.5 * (a + b)).nu;
  CHECK((mid - 0.5 * (na + nb)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("update_all_patches equals per-column posterior_update") {
  const Eigen::MatrixXd data = two_cluster_data(61);
  const GmmModel m = em_fit(data, 2, 0, 15, 1e-9);
  const LowRankGmm lr = evt_lowrank(m, 2, 1e-3);
  const Eigen::MatrixXd est = random_matrix(4, 9, 62);
  const Eigen::MatrixXd out = update_all_patches(lr, est);
  REQUIRE(out.cols() == 9);
  for (int i = 0; i < 9; ++i)
    CHECK((out.col(i) - posterior_update(lr, est.col(i))).cwiseAbs().maxCoeff() <
          1e-10);
}

TEST_CASE("update_all_patches: column permutation equivariance") {
  const Eigen::MatrixXd data = two_cluster_data(63);
  const GmmModel m = em_fit(data, 2, 0, 15, 1e-9);
  const LowRankGmm lr = evt_lowrank(m, 2, 1e-3);
  const Eigen::MatrixXd est = random_matrix(4, 6, 64);
  Eigen::MatrixXd reversed(4, 6);
  for (int i = 0; i < 6; ++i) reversed.col(i) = est.col(5 - i);
  const Eigen::MatrixXd out = update_all_patches(lr, est);
  const Eigen::MatrixXd out_rev = update_all_patches(lr, reversed);
  for (int i = 0; i < 6; ++i)
    CHECK((out.col(i) - out_rev.col(5 - i)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("repeated posterior application contracts toward the prior") {
  const Eigen::MatrixXd data = two_cluster_data(65);
  const GmmModel m = em_fit(data, 2, 0, 15, 1e-9);
  const LowRankGmm lr = evt_lowrank(m, 2, 1e-3);
  const Eigen::MatrixXd est = random_matrix(4, 8, 66);
  const Eigen::MatrixXd once = update_all_patches(lr, est);
  const Eigen::MatrixXd twice = update_all_patches(lr, once);
  for (int i = 0; i < 8; ++i)
    CHECK((twice.col(i) - once.col(i)).norm() <=
          (once.col(i) - est.col(i)).norm() + 1e-10);
}

TEST_CASE("zero patches under a zero-mean model stay near zero") {
  GmmModel m;
  Eigen::VectorXd ev(3);
  ev << 1.0, 0.5, 0.0;
  m.components.push_back(make_component(ev, Eigen::VectorXd::Zero(3), 71));
  const LowRankGmm lr = evt_lowrank(m, 2, 1e-5);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(3, 4);
  CHECK(update_all_patches(lr, zero).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("model snapshot round trip") {
  const Eigen::MatrixXd data = two_cluster_data(81);
  const GmmModel m = em_fit(data, 2, 0, 10, 1e-9);
  save_model("/tmp/csgmm_model.bin", m, 1e-5);
  const auto [back, sigma2] = load_model("/tmp/csgmm_model.bin");
  CHECK(sigma2 == 1e-5);
  REQUIRE(back.components.size() == m.components.size());
  for (std::size_t j = 0; j < m.components.size(); ++j) {
    CHECK(back.components[j].weight == m.components[j].weight);
    CHECK((back.components[j].mean - m.components[j].mean).norm() == 0.0);
    CHECK((back.components[j].eigvals - m.components[j].eigvals).norm() == 0.0);
    CHECK((back.components[j].eigvecs - m.components[j].eigvecs)
              .cwiseAbs()
              .maxCoeff() == 0.0);
    // Covariance is rebuilt from the stored spectrum.
    CHECK((back.components[j].covariance - m.components[j].covariance)
              .cwiseAbs()
              .maxCoeff() < 1e-10);
  }
  CHECK_THROWS(load_model("/tmp/csgmm_model_missing.bin"));
}
