#ifndef CSGMM_BENCHMARK_HPP
#define CSGMM_BENCHMARK_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "csgmm/metrics_io.hpp"
#include "csgmm/pipeline.hpp"

namespace csgmm::metrics_io {

struct BenchmarkSpec {
  std::vector<std::string> image_paths;
  std::vector<double> csrs;
  std::vector<pipeline::Algorithm> algorithms;
  pipeline::ReconstructionConfig config;  // per-run algorithm field overridden
  int resize_to = 256;                    // 0 keeps the native size
  std::uint64_t operator_seed = 0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
  std::string trace_dir;  // when set, per-iteration trace CSV per run
  bool record_timing = true;  // false pins wall_seconds to 0 (reproducible CSV)
  int workers = 0;            // 0 = auto; CS_GMM_THREADS caps the pool
};

struct ChannelReconstruction {
  ImageBuffer image;
  std::vector<pipeline::IterationStats> trace;  // channel 0
};

// Simulate permuted-Hadamard measurements of `truth` (per channel, shared
// operator seed) and reconstruct. The operator order is the next power of
// two >= pixel count; images are zero-padded into it.
ChannelReconstruction simulate_and_reconstruct(
    const ImageBuffer& truth, double csr,
    const pipeline::ReconstructionConfig& config, std::uint64_t operator_seed,
    double noise_sigma = 0.0, std::uint64_t noise_seed = 0,
    bool record_timing = true);

// Full cross-product (image x csr x algorithm). Per-run failures are
// recorded (psnr_db = NaN) and the sweep continues.
std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec);

// One path per line, '#' comments.
std::vector<std::string> load_manifest(const std::string& path);

std::uint64_t next_power_of_two(std::uint64_t n);

}  // namespace csgmm::metrics_io

#endif
