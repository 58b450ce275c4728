#include "csgmm/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "csgmm/patches.hpp"
#include "csgmm/ple.hpp"
#include "csgmm/solvers.hpp"
#include "csgmm/sparse_dct.hpp"

namespace csgmm::pipeline {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::AdmmSlope: return "admm-slope";
    case Algorithm::LrGmmSlope: return "lr-gmm-slope";
    case Algorithm::LrPleSlope: return "lr-ple-slope";
  }
  return "?";
}

std::string to_string(Projection p) {
  switch (p) {
    case Projection::Ist: return "ist";
    case Projection::Gap: return "gap";
    case Projection::AccGap: return "acc-gap";
    case Projection::Admm: return "admm";
  }
  return "?";
}

std::string to_string(WarmStart w) {
  return w == WarmStart::Zero ? "zero" : "adjoint";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "admm-slope") return Algorithm::AdmmSlope;
  if (s == "lr-gmm-slope") return Algorithm::LrGmmSlope;
  if (s == "lr-ple-slope") return Algorithm::LrPleSlope;
  throw std::invalid_argument(
      "unknown algorithm '" + s +
      "' (valid: admm-slope, lr-gmm-slope, lr-ple-slope)");
}

Projection projection_from_string(const std::string& s) {
  if (s == "ist") return Projection::Ist;
  if (s == "gap") return Projection::Gap;
  if (s == "acc-gap") return Projection::AccGap;
  if (s == "admm") return Projection::Admm;
  throw std::invalid_argument("unknown projection '" + s +
                              "' (valid: ist, gap, acc-gap, admm)");
}

WarmStart warm_start_from_string(const std::string& s) {
  if (s == "zero") return WarmStart::Zero;
  if (s == "adjoint") return WarmStart::Adjoint;
  throw std::invalid_argument("unknown warm_start '" + s +
                              "' (valid: zero, adjoint)");
}

void ReconstructionConfig::validate() const {
  if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (patch_side < 1) throw std::invalid_argument("patch_side must be >= 1");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  const int p = patch_side * patch_side;
  if (gamma < 1 || gamma >= p)
    throw std::invalid_argument("gamma must lie in [1, patch_side^2)");
  if (sigma2 <= 0.0) throw std::invalid_argument("sigma2 must be positive");
  if (beta <= 0.0) throw std::invalid_argument("beta must be positive");
  if (eta <= 0.0) throw std::invalid_argument("eta must be positive");
  if (lambda < 0.0) throw std::invalid_argument("lambda must be nonnegative");
  if (em_iters_per_outer < 1)
    throw std::invalid_argument("em_iters_per_outer must be >= 1");
  if (algorithm == Algorithm::AdmmSlope && projection != Projection::Admm)
    throw std::invalid_argument("admm-slope requires projection=admm");
}

namespace {

const char* kValidKeys =
    "algorithm, projection, max_iters, K, gamma, sigma2, beta, eta, lambda, "
    "patch_side, stride, em_iters_per_outer, seed, warm_start";

}  // namespace

void apply_config_entry(ReconstructionConfig& cfg, const std::string& key,
                        const std::string& value) {
  try {
    if (key == "algorithm") cfg.algorithm = algorithm_from_string(value);
    else if (key == "projection") cfg.projection = projection_from_string(value);
    else if (key == "max_iters") cfg.max_iters = std::stoi(value);
    else if (key == "K") cfg.K = std::stoi(value);
    else if (key == "gamma") cfg.gamma = std::stoi(value);
    else if (key == "sigma2") cfg.sigma2 = std::stod(value);
    else if (key == "beta") cfg.beta = std::stod(value);
    else if (key == "eta") cfg.eta = std::stod(value);
    else if (key == "lambda") cfg.lambda = std::stod(value);
    else if (key == "patch_side") cfg.patch_side = std::stoi(value);
    else if (key == "stride") cfg.stride = std::stoi(value);
    else if (key == "em_iters_per_outer") cfg.em_iters_per_outer = std::stoi(value);
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "warm_start") cfg.warm_start = warm_start_from_string(value);
    else
      throw std::invalid_argument("unknown config key '" + key +
                                  "' (valid keys: " + kValidKeys + ")");
  } catch (const std::invalid_argument&) {
    throw;
  } catch (const std::exception&) {
    throw std::invalid_argument("bad value for config key '" + key + "': " + value);
  }
}

ReconstructionConfig load_config(const std::string& path,
                                 ReconstructionConfig base) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) +
                                  ": expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    apply_config_entry(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

std::string config_to_string(const ReconstructionConfig& cfg) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "algorithm=%s\nprojection=%s\nmax_iters=%d\nK=%d\ngamma=%d\n"
                "sigma2=%.17g\nbeta=%.17g\neta=%.17g\nlambda=%.17g\n"
                "patch_side=%d\nstride=%d\nem_iters_per_outer=%d\nseed=%llu\n"
                "warm_start=%s\n",
                to_string(cfg.algorithm).c_str(),
                to_string(cfg.projection).c_str(), cfg.max_iters, cfg.K,
                cfg.gamma, cfg.sigma2, cfg.beta, cfg.eta, cfg.lambda,
                cfg.patch_side, cfg.stride, cfg.em_iters_per_outer,
                static_cast<unsigned long long>(cfg.seed),
                to_string(cfg.warm_start).c_str());
  return buf;
}

std::string config_hash(const ReconstructionConfig& cfg) {
  const std::string s = config_to_string(cfg);
  std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

VectorXd embed(const VectorXd& img, std::size_t n) {
  VectorXd out = VectorXd::Zero(static_cast<Eigen::Index>(n));
  out.head(img.size()) = img;
  return out;
}

double data_residual(const sensing::SensingOperator& op, const VectorXd& y,
                     const VectorXd& x) {
  const std::vector<double> ax =
      sensing::apply(op, std::span<const double>(x.data(), x.size()));
  return (y - Eigen::Map<const VectorXd>(ax.data(), ax.size())).norm();
}

double psnr_vs(const VectorXd& reference, const VectorXd& estimate) {
  const VectorXd clamped = estimate.cwiseMax(0.0).cwiseMin(1.0);
  const double mse = (reference - clamped).squaredNorm() / reference.size();
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

// w-update on the padded vector: pixels outside the image have no patch
// coverage, so their overlap count is zero and w_n = (x + v)_n there.
VectorXd w_step_padded(const patches::PatchGrid& grid, std::size_t n,
                       const VectorXd& x, const VectorXd& v,
                       const MatrixXd& targets, double beta, double eta) {
  const VectorXd accum = embed(patches::aggregate(grid, targets), n);
  const VectorXd overlap = embed(grid.overlap_counts, n);
  return (beta * (x + v) + eta * accum).array() /
         (eta * overlap.array() + beta);
}

}  // namespace

VectorXd warm_start(const sensing::Measurement& m,
                    const sensing::SensingOperator& op, WarmStart mode) {
  if (mode == WarmStart::Zero)
    return VectorXd::Zero(static_cast<Eigen::Index>(op.order));
  const std::vector<double> aty = sensing::adjoint(
      op, std::span<const double>(m.values.data(), m.values.size()));
  return Eigen::Map<const VectorXd>(aty.data(), aty.size());
}

ReconstructionResult reconstruct(const sensing::Measurement& measurement,
                                 int height, int width,
                                 const ReconstructionConfig& config,
                                 const VectorXd* reference,
                                 bool record_timing) {
  config.validate();
  const std::size_t hw = static_cast<std::size_t>(height) * width;
  if (hw > measurement.order)
    throw std::invalid_argument("reconstruct: image larger than operator order");
  const sensing::SensingOperator op = sensing::build_operator(
      measurement.order, measurement.csr, measurement.operator_seed);
  if (op.num_rows != measurement.values.size())
    throw std::runtime_error("reconstruct: measurement length inconsistent with csr");
  if (reference && reference->size() != static_cast<Eigen::Index>(hw))
    throw std::invalid_argument("reconstruct: reference size mismatch");

  const VectorXd y = Eigen::Map<const VectorXd>(measurement.values.data(),
                                                measurement.values.size());
  const patches::PatchGrid grid =
      patches::build_grid(height, width, config.patch_side, config.stride);
  const std::size_t n = measurement.order;

  ReconstructionResult result;
  result.height = height;
  result.width = width;

  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    if (!record_timing) return 0.0;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
        .count();
  };
  auto push_stats = [&](const VectorXd& estimate_padded) {
    IterationStats s;
    s.data_residual = data_residual(op, y, estimate_padded);
    s.psnr_db = reference
                    ? psnr_vs(*reference, estimate_padded.head(hw))
                    : std::numeric_limits<double>::quiet_NaN();
    s.seconds = elapsed();
    result.trace.push_back(s);
  };
  auto finish = [&](const VectorXd& estimate_padded) {
    result.image = estimate_padded.head(hw).cwiseMax(0.0).cwiseMin(1.0);
    result.iterations_run = static_cast<int>(result.trace.size());
    return result;
  };

  if (config.algorithm == Algorithm::AdmmSlope) {
    // x, w, v all start at zero; warm_start does not apply here.
    VectorXd x = VectorXd::Zero(n), w = VectorXd::Zero(n), v = VectorXd::Zero(n);
    const MatrixXd basis = sparse_dct::dct_basis(config.patch_side);
    MatrixXd z = MatrixXd::Zero(grid.patch_dim(), grid.patch_count());
    for (int t = 0; t < config.max_iters; ++t) {
      x = solvers::admm_x_step(op, y, w, v, config.beta);
      const MatrixXd targets = basis * z;
      w = w_step_padded(grid, n, x, v, targets, config.beta, config.eta);
      const MatrixXd wp = patches::extract(grid, w.head(hw));
      z = sparse_dct::solve_z_step(basis, wp, config.lambda, config.eta);
      v = solvers::admm_v_step(v, x, w);
      const double objective =
          0.5 * std::pow(data_residual(op, y, x), 2) +
          config.lambda * z.array().abs().sum() +
          0.5 * config.eta * (wp - basis * z).squaredNorm() +
          0.5 * config.beta * (x - w + v).squaredNorm();
      result.objective_trace.push_back(objective);
      push_stats(w);
    }
    return finish(config.max_iters == 0 ? x : w);
  }

  // Mixture pipelines: project, refresh the patch model, denoise, recompose.
  VectorXd est = warm_start(measurement, op, config.warm_start);
  VectorXd y_running = y;  // accelerated-GAP running measurement vector
  VectorXd w, v;
  if (config.projection == Projection::Admm) {
    w = est;
    v = VectorXd::Zero(n);
  }
  gmm::GmmModel model;
  ple::PleModel ple_model;
  std::vector<int> assignments;
  const bool use_gmm = config.algorithm == Algorithm::LrGmmSlope;

  for (int t = 0; t < config.max_iters; ++t) {
    VectorXd x;
    switch (config.projection) {
      case Projection::Ist:
        x = solvers::ist_step(op, y, est, 1.0);
        break;
      case Projection::Gap:
        x = solvers::gap_step(op, y, est);
        break;
      case Projection::AccGap:
        x = est;
        solvers::acc_gap_step(op, y, x, y_running);
        break;
      case Projection::Admm:
        x = solvers::admm_x_step(op, y, w, v, config.beta);
        break;
    }
    const MatrixXd current = patches::extract(grid, x.head(hw));
    MatrixXd denoised;
    if (use_gmm) {
      model = (t == 0) ? gmm::em_fit(current, config.K, config.seed,
                                     config.em_iters_per_outer, 1e-8)
                       : gmm::em_refine(std::move(model), current,
                                        config.em_iters_per_outer, 1e-8);
      const gmm::LowRankGmm lr =
          gmm::evt_lowrank(model, config.gamma, config.sigma2);
      denoised = gmm::update_all_patches(lr, current);
    } else {
      if (t == 0) {
        ple_model = ple::ple_init(current, config.K, config.seed,
                                  config.sigma2, config.gamma);
      } else {
        ple::ple_mstep(ple_model, current, assignments);
        ple::ple_lowrank(ple_model);
      }
      auto [estimates, assign] = ple::ple_estep(ple_model, current);
      denoised = std::move(estimates);
      assignments = std::move(assign);
    }
    if (config.projection == Projection::Admm) {
      w = w_step_padded(grid, n, x, v, denoised, config.beta, config.eta);
      v = solvers::admm_v_step(v, x, w);
      est = w;
    } else {
      const VectorXd img = patches::aggregate(grid, denoised)
                               .cwiseQuotient(grid.overlap_counts);
      est = embed(img, n);
    }
    push_stats(est);
  }
  if (use_gmm && config.max_iters > 0) result.final_model = std::move(model);
  return finish(est);
}

void write_trace_csv(const std::string& path,
                     const std::vector<IterationStats>& trace) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "iteration,data_residual,psnr_db,seconds\n";
  char buf[160];
  for (std::size_t i = 0; i < trace.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g,%.4f,%.3f", i + 1,
                  trace[i].data_residual, trace[i].psnr_db, trace[i].seconds);
    os << buf << "\n";
  }
}

}  // namespace csgmm::pipeline
