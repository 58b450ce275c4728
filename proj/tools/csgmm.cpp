// Command-line front end: simulate measurements, reconstruct images, and run
// benchmark sweeps. Exit codes: 0 success, 1 I/O or runtime failure, 2 usage
// or argument errors.

#include <CLI11.hpp>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <vector>

#include "csgmm/benchmark.hpp"
#include "csgmm/metrics_io.hpp"
#include "csgmm/pipeline.hpp"
#include "csgmm/sensing.hpp"

namespace {

using namespace csgmm;

struct ConfigFlags {
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::map<std::string, std::string> values;
  std::string config_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path,
                    "key=value config file (flags override it)");
    const std::vector<std::pair<std::string, std::string>> keys = {
        {"algorithm", "--algorithm"},
        {"projection", "--projection"},
        {"max_iters", "--max_iters,--max-iters"},
        {"K", "--K"},
        {"gamma", "--gamma"},
        {"sigma2", "--sigma2"},
        {"beta", "--beta"},
        {"eta", "--eta"},
        {"lambda", "--lambda"},
        {"patch_side", "--patch_side,--patch-side"},
        {"stride", "--stride"},
        {"em_iters_per_outer", "--em_iters_per_outer,--em-iters-per-outer"},
        {"seed", "--seed"},
        {"warm_start", "--warm_start,--warm-start"},
    };
    for (const auto& [key, flag] : keys)
      options.emplace_back(key, cmd->add_option(flag, values[key]));
  }

  pipeline::ReconstructionConfig resolve() const {
    pipeline::ReconstructionConfig cfg;
    if (!config_path.empty()) cfg = pipeline::load_config(config_path, cfg);
    bool projection_given = !config_path.empty();
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) {
        pipeline::apply_config_entry(cfg, key, values.at(key));
        if (key == "projection") projection_given = true;
      }
    // admm-slope runs its own ADMM loop; default the projection accordingly
    // unless the user pinned one explicitly.
    if (cfg.algorithm == pipeline::Algorithm::AdmmSlope && !projection_given)
      cfg.projection = pipeline::Projection::Admm;
    cfg.validate();
    return cfg;
  }
};

void echo_run_header(const pipeline::ReconstructionConfig& cfg) {
  std::cerr << "--- run config (hash " << pipeline::config_hash(cfg) << ")\n"
            << pipeline::config_to_string(cfg) << "---\n";
}

std::vector<double> parse_csr_list(const std::string& list) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    const std::size_t comma = std::min(list.find(',', pos), list.size());
    const std::string tok = list.substr(pos, comma - pos);
    try {
      std::size_t used = 0;
      const double v = std::stod(tok, &used);
      if (used != tok.size() || !(v > 0.0 && v <= 1.0))
        throw std::invalid_argument(tok);
      out.push_back(v);
    } catch (const std::exception&) {
      throw std::invalid_argument("invalid csr token '" + tok +
                                  "' (want reals in (0,1], comma separated)");
    }
    pos = comma + 1;
  }
  return out;
}

int cmd_simulate(const std::string& image_path, double csr,
                 std::uint64_t seed, double noise_sigma,
                 std::uint64_t noise_seed, int resize, bool gray, bool text,
                 const std::string& out_path) {
  if (!(csr > 0.0 && csr <= 1.0))
    throw std::invalid_argument("csr must lie in (0, 1]");
  metrics_io::ImageBuffer img = metrics_io::load_image(image_path, gray);
  if (resize > 0 && (img.height != resize || img.width != resize))
    img = metrics_io::resize_area(img, resize, resize);
  const std::size_t hw = img.plane_size();
  const std::uint64_t n = metrics_io::next_power_of_two(hw);
  const auto op = sensing::build_operator(n, csr, seed);
  auto save = [&](const sensing::Measurement& m, const std::string& path) {
    if (text)
      sensing::save_measurement_text(path, m);
    else
      sensing::save_measurement(path, m);
  };
  std::vector<std::string> written;
  for (int ch = 0; ch < img.channels; ++ch) {
    std::vector<double> padded(n, 0.0);
    std::copy(img.pixels.begin() + ch * hw, img.pixels.begin() + (ch + 1) * hw,
              padded.begin());
    const auto m = sensing::measure(op, padded, noise_sigma, noise_seed + ch);
    const std::string path =
        img.channels == 1 ? out_path
                          : out_path + "." + std::string(1, "rgb"[ch]);
    save(m, path);
    written.push_back(path);
  }
  std::cerr << "simulate: N=" << n << " M=" << op.num_rows
            << " operator_seed=" << seed << " image=" << img.height << "x"
            << img.width << "x" << img.channels << "\n";
  for (const auto& p : written) std::cerr << "  wrote " << p << "\n";
  return 0;
}

int cmd_reconstruct(const std::vector<std::string>& measurement_paths,
                    const std::string& out_path,
                    const std::string& reference_path,
                    const std::string& trace_path, int height, int width,
                    bool text, const ConfigFlags& flags) {
  const pipeline::ReconstructionConfig cfg = flags.resolve();
  echo_run_header(cfg);
  std::vector<sensing::Measurement> meas;
  for (const auto& p : measurement_paths)
    meas.push_back(text ? sensing::load_measurement_text(p)
                        : sensing::load_measurement(p));
  if (height == 0 || width == 0) {
    const auto s =
        static_cast<int>(std::llround(std::sqrt(static_cast<double>(meas[0].order))));
    if (static_cast<std::uint64_t>(s) * s != meas[0].order)
      throw std::invalid_argument(
          "operator order is not a square; pass --height and --width");
    height = width = s;
  }
  metrics_io::ImageBuffer reference;
  const bool have_ref = !reference_path.empty();
  if (have_ref) {
    reference = metrics_io::load_image(reference_path,
                                       measurement_paths.size() == 1);
    if (reference.height != height || reference.width != width)
      reference = metrics_io::resize_area(reference, height, width);
  }
  metrics_io::ImageBuffer out;
  out.height = height;
  out.width = width;
  out.channels = static_cast<int>(meas.size());
  out.pixels.resize(out.plane_size() * out.channels);
  std::vector<pipeline::IterationStats> trace0;
  for (std::size_t ch = 0; ch < meas.size(); ++ch) {
    Eigen::VectorXd ref_vec;
    const Eigen::VectorXd* ref_ptr = nullptr;
    if (have_ref) {
      ref_vec = Eigen::Map<const Eigen::VectorXd>(
          reference.pixels.data() + ch * reference.plane_size(),
          reference.plane_size());
      ref_ptr = &ref_vec;
    }
    const auto r =
        pipeline::reconstruct(meas[ch], height, width, cfg, ref_ptr);
    std::copy(r.image.data(), r.image.data() + r.image.size(),
              out.pixels.begin() + ch * out.plane_size());
    if (ch == 0) trace0 = r.trace;
  }
  metrics_io::save_image(out_path, out);
  if (!trace_path.empty()) pipeline::write_trace_csv(trace_path, trace0);
  if (have_ref) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", metrics_io::psnr(reference, out));
    std::cerr << "reconstruct: final PSNR " << buf << " dB\n";
  }
  std::cerr << "reconstruct: wrote " << out_path << "\n";
  return 0;
}

int cmd_benchmark(const std::string& manifest_path, const std::string& csr_list,
                  const std::string& algorithms, const std::string& out_csv,
                  const std::string& trace_dir, int size,
                  std::uint64_t operator_seed, double noise_sigma, int workers,
                  bool no_timing, const ConfigFlags& flags) {
  metrics_io::BenchmarkSpec spec;
  spec.config = flags.resolve();
  spec.image_paths = metrics_io::load_manifest(manifest_path);
  spec.csrs = parse_csr_list(csr_list);
  std::size_t pos = 0;
  while (pos <= algorithms.size()) {
    const std::size_t comma = std::min(algorithms.find(',', pos), algorithms.size());
    spec.algorithms.push_back(
        pipeline::algorithm_from_string(algorithms.substr(pos, comma - pos)));
    pos = comma + 1;
  }
  spec.resize_to = size;
  spec.operator_seed = operator_seed;
  spec.noise_sigma = noise_sigma;
  spec.workers = workers;
  spec.record_timing = !no_timing;
  spec.trace_dir = trace_dir;
  if (!trace_dir.empty()) std::filesystem::create_directories(trace_dir);
  echo_run_header(spec.config);
  const auto rows = metrics_io::run_benchmark(spec);
  metrics_io::write_benchmark_csv(out_csv, rows);
  std::cerr << "benchmark: wrote " << rows.size() << " rows to " << out_csv
            << "\n";
  std::size_t failed = 0;
  for (const auto& r : rows)
    if (!r.error.empty()) ++failed;
  if (!rows.empty() && failed == rows.size()) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"compressive-sensing simulation and reconstruction toolkit"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate",
                                 "measure an image with a permuted-Hadamard operator");
  std::string sim_image, sim_out;
  double sim_csr = 0.1, sim_noise = 0.0;
  std::uint64_t sim_seed = 0, sim_noise_seed = 0;
  int sim_resize = 0;
  bool sim_gray = false, sim_text = false;
  sim->add_option("--image", sim_image, "input PGM/PPM")->required();
  sim->add_option("--csr", sim_csr, "compression ratio in (0,1]")->required();
  sim->add_option("--out", sim_out, "output measurement file")->required();
  sim->add_option("--seed", sim_seed, "operator (permutation) seed");
  sim->add_option("--noise-sigma", sim_noise, "measurement noise std dev");
  sim->add_option("--noise-seed", sim_noise_seed, "noise generator seed");
  sim->add_option("--resize", sim_resize, "area-resize to SxS first");
  sim->add_flag("--gray", sim_gray, "convert PPM input to grayscale");
  sim->add_flag("--text", sim_text, "write the plain-text format");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "invert measurements");
  std::vector<std::string> rec_meas;
  std::string rec_out, rec_ref, rec_trace;
  int rec_h = 0, rec_w = 0;
  bool rec_text = false;
  rec->add_option("measurements", rec_meas,
                  "1 (grayscale) or 3 (RGB) measurement files")
      ->required()
      ->expected(1, 3);
  rec->add_option("--out", rec_out, "output PGM/PPM")->required();
  rec->add_option("--reference", rec_ref, "ground truth for PSNR reporting");
  rec->add_option("--trace", rec_trace, "per-iteration trace CSV");
  rec->add_option("--height", rec_h, "image height (default: square root of N)");
  rec->add_option("--width", rec_w, "image width");
  rec->add_flag("--text", rec_text, "measurements are in the text format");
  ConfigFlags rec_flags;
  rec_flags.attach(rec);

  // benchmark
  auto* bench = app.add_subcommand("benchmark", "PSNR sweep over images x CSr");
  std::string bench_manifest, bench_csr, bench_out, bench_trace_dir;
  std::string bench_algos = "lr-gmm-slope";
  int bench_size = 256, bench_workers = 0;
  std::uint64_t bench_seed = 0;
  double bench_noise = 0.0;
  bool bench_no_timing = false;
  bench->add_option("--manifest", bench_manifest, "file listing image paths")
      ->required();
  bench->add_option("--csr", bench_csr, "comma-separated CSr list")->required();
  bench->add_option("--out", bench_out, "output CSV")->required();
  bench->add_option("--algorithms", bench_algos, "comma-separated algorithms");
  bench->add_option("--trace-dir", bench_trace_dir, "directory for trace CSVs");
  bench->add_option("--size", bench_size, "resize images to SxS (0 = native)");
  bench->add_option("--operator-seed", bench_seed, "sensing permutation seed");
  bench->add_option("--noise-sigma", bench_noise, "measurement noise std dev");
  bench->add_option("--workers", bench_workers, "worker pool size (0 = auto)");
  bench->add_flag("--no-timing", bench_no_timing,
                  "write wall_seconds as 0 for byte-reproducible CSVs");
  ConfigFlags bench_flags;
  bench_flags.attach(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed())
      return cmd_simulate(sim_image, sim_csr, sim_seed, sim_noise,
                          sim_noise_seed, sim_resize, sim_gray, sim_text,
                          sim_out);
    if (rec->parsed())
      return cmd_reconstruct(rec_meas, rec_out, rec_ref, rec_trace, rec_h,
                             rec_w, rec_text, rec_flags);
    if (bench->parsed())
      return cmd_benchmark(bench_manifest, bench_csr, bench_algos, bench_out,
                           bench_trace_dir, bench_size, bench_seed, bench_noise,
                           bench_workers, bench_no_timing, bench_flags);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
