#ifndef CSGMM_PIPELINE_HPP
#define CSGMM_PIPELINE_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csgmm/gmm.hpp"
#include "csgmm/sensing.hpp"

namespace csgmm::pipeline {

enum class Algorithm { AdmmSlope, LrGmmSlope, LrPleSlope };
enum class Projection { Ist, Gap, AccGap, Admm };
enum class WarmStart { Zero, Adjoint };

std::string to_string(Algorithm a);
std::string to_string(Projection p);
std::string to_string(WarmStart w);
Algorithm algorithm_from_string(const std::string& s);
Projection projection_from_string(const std::string& s);
WarmStart warm_start_from_string(const std::string& s);

struct ReconstructionConfig {
  Algorithm algorithm = Algorithm::LrGmmSlope;
  Projection projection = Projection::AccGap;
  int max_iters = 20;
  int K = 6;
  int gamma = 32;
  double sigma2 = 1e-5;
  double beta = 0.5;
  double eta = 1.0;
  double lambda = 0.05;
  int patch_side = 8;
  int stride = 4;
  int em_iters_per_outer = 5;
  std::uint64_t seed = 0;
  WarmStart warm_start = WarmStart::Adjoint;

  void validate() const;  // throws std::invalid_argument
};

// Flat key=value text config; keys match the field names above, all optional,
// '#' starts a comment. Unknown keys are rejected with the valid-key list.
ReconstructionConfig load_config(const std::string& path,
                                 ReconstructionConfig base = {});
void apply_config_entry(ReconstructionConfig& cfg, const std::string& key,
                        const std::string& value);
std::string config_to_string(const ReconstructionConfig& cfg);
std::string config_hash(const ReconstructionConfig& cfg);  // FNV-1a 64, hex

struct IterationStats {
  double data_residual = 0.0;
  double psnr_db = 0.0;  // NaN when no reference was supplied
  double seconds = 0.0;  // cumulative wall time at the end of the iteration
};

struct ReconstructionResult {
  Eigen::VectorXd image;  // H*W, row-major, clamped to [0,1]
  int height = 0;
  int width = 0;
  int iterations_run = 0;
  std::vector<IterationStats> trace;
  std::vector<double> objective_trace;     // ADMM-SLOPE full objective
  std::optional<gmm::GmmModel> final_model;  // mixture pipelines only
};

// Minimum-norm initializer: zeros, or A^T y (measurement-consistent under
// orthonormal rows).
Eigen::VectorXd warm_start(const sensing::Measurement& m,
                           const sensing::SensingOperator& op, WarmStart mode);

// Reconstruct an H x W image from a measurement of its zero-padded,
// vectorized pixels. `reference` (H*W, [0,1]) enables the per-iteration PSNR
// trace. Deterministic: a pure function of (measurement, config).
ReconstructionResult reconstruct(const sensing::Measurement& measurement,
                                 int height, int width,
                                 const ReconstructionConfig& config,
                                 const Eigen::VectorXd* reference = nullptr,
                                 bool record_timing = true);

void write_trace_csv(const std::string& path,
                     const std::vector<IterationStats>& trace);

}  // namespace csgmm::pipeline

#endif
