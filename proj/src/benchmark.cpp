#include "csgmm/benchmark.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <thread>

#include "csgmm/sensing.hpp"

namespace csgmm::metrics_io {

std::uint64_t next_power_of_two(std::uint64_t n) {
  std::uint64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

std::vector<std::string> load_manifest(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open manifest: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(is, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    const auto e = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(b, e - b + 1));
  }
  return out;
}

ChannelReconstruction simulate_and_reconstruct(
    const ImageBuffer& truth, double csr,
    const pipeline::ReconstructionConfig& config, std::uint64_t operator_seed,
    double noise_sigma, std::uint64_t noise_seed, bool record_timing) {
  const std::size_t hw = truth.plane_size();
  const std::uint64_t n = next_power_of_two(hw);
  const auto op = sensing::build_operator(
      n, static_cast<double>(std::max<std::uint64_t>(
             1, std::llround(csr * static_cast<double>(n)))) /
             static_cast<double>(n),
      operator_seed);
  // Rebuild csr so round(csr*N) reproduces M exactly on reload.
  ChannelReconstruction out;
  out.image.height = truth.height;
  out.image.width = truth.width;
  out.image.channels = truth.channels;
  out.image.pixels.resize(truth.pixels.size());
  for (int ch = 0; ch < truth.channels; ++ch) {
    std::vector<double> padded(n, 0.0);
    std::copy(truth.pixels.begin() + ch * hw,
              truth.pixels.begin() + (ch + 1) * hw, padded.begin());
    const sensing::Measurement m =
        sensing::measure(op, padded, noise_sigma, noise_seed + ch);
    Eigen::VectorXd reference =
        Eigen::Map<const Eigen::VectorXd>(truth.pixels.data() + ch * hw, hw);
    const pipeline::ReconstructionResult r = pipeline::reconstruct(
        m, truth.height, truth.width, config, &reference, record_timing);
    std::copy(r.image.data(), r.image.data() + hw,
              out.image.pixels.begin() + ch * hw);
    if (ch == 0) out.trace = r.trace;
  }
  return out;
}

namespace {

std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

int worker_count(const BenchmarkSpec& spec, std::size_t jobs) {
  int w = spec.workers > 0
              ? spec.workers
              : static_cast<int>(std::thread::hardware_concurrency());
  if (const char* cap = std::getenv("CS_GMM_THREADS")) {
    const int c = std::atoi(cap);
    if (c > 0) w = std::min(w, c);
  }
  return std::max(1, std::min<int>(w, static_cast<int>(jobs)));
}

}  // namespace

std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec) {
  struct Job {
    std::string path;
    double csr;
    pipeline::Algorithm algorithm;
  };
  std::vector<Job> jobs;
  for (const auto& path : spec.image_paths)
    for (double csr : spec.csrs)
      for (auto algo : spec.algorithms) jobs.push_back({path, csr, algo});

  std::vector<BenchmarkRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto run_one = [&](std::size_t idx) {
    const Job& job = jobs[idx];
    BenchmarkRow& row = rows[idx];
    pipeline::ReconstructionConfig cfg = spec.config;
    cfg.algorithm = job.algorithm;
    if (cfg.algorithm == pipeline::Algorithm::AdmmSlope)
      cfg.projection = pipeline::Projection::Admm;
    row.image = stem_of(job.path);
    row.csr = job.csr;
    row.algorithm = pipeline::to_string(job.algorithm);
    row.projection = pipeline::to_string(cfg.projection);
    row.config_hash = pipeline::config_hash(cfg);
    try {
      ImageBuffer truth = load_image(job.path);
      if (spec.resize_to > 0 &&
          (truth.height != spec.resize_to || truth.width != spec.resize_to))
        truth = resize_area(truth, spec.resize_to, spec.resize_to);
      const auto t0 = std::chrono::steady_clock::now();
      const ChannelReconstruction rec = simulate_and_reconstruct(
          truth, job.csr, cfg, spec.operator_seed, spec.noise_sigma,
          spec.noise_seed, spec.record_timing);
      row.wall_seconds =
          spec.record_timing
              ? std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                              t0)
                    .count()
              : 0.0;
      row.psnr_db = psnr(truth, rec.image);
      if (!spec.trace_dir.empty()) {
        char name[256];
        std::snprintf(name, sizeof(name), "%s/%s_csr%.4f_%s.csv",
                      spec.trace_dir.c_str(), row.image.c_str(), job.csr,
                      row.algorithm.c_str());
        pipeline::write_trace_csv(name, rec.trace);
      }
    } catch (const std::exception& e) {
      row.psnr_db = std::numeric_limits<double>::quiet_NaN();
      row.error = e.what();
    }
  };

  const int workers = worker_count(spec, jobs.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < jobs.size(); ++i) run_one(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t)
      pool.emplace_back([&] {
        for (std::size_t i = next.fetch_add(1); i < jobs.size();
             i = next.fetch_add(1))
          run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  for (const auto& row : rows)
    if (!row.error.empty())
      std::cerr << "benchmark: " << row.image << " csr=" << row.csr << " "
                << row.algorithm << " failed: " << row.error << "\n";
  return rows;
}

}  // namespace csgmm::metrics_io
