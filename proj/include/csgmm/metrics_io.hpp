#ifndef CSGMM_METRICS_IO_HPP
#define CSGMM_METRICS_IO_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace csgmm::metrics_io {

struct ImageFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct TruncatedFileError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Channel-planar image with pixels in [0, 1].
struct ImageBuffer {
  int height = 0;
  int width = 0;
  int channels = 1;  // 1 or 3
  std::vector<double> pixels;  // size height*width*channels

  double& at(int ch, int r, int c) {
    return pixels[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }
  double at(int ch, int r, int c) const {
    return pixels[(static_cast<std::size_t>(ch) * height + r) * width + c];
  }
  std::size_t plane_size() const {
    return static_cast<std::size_t>(height) * width;
  }
};

// Binary PGM (P5) / PPM (P6), 8-bit, samples mapped to [0,1] by /255.
ImageBuffer load_image(const std::string& path, bool force_gray = false);
void save_image(const std::string& path, const ImageBuffer& img);

// Luma conversion with weights 0.299 / 0.587 / 0.114.
ImageBuffer to_gray(const ImageBuffer& img);

// Area-averaging resample (exact box overlap), any ratio.
ImageBuffer resize_area(const ImageBuffer& img, int out_h, int out_w);

ImageBuffer crop(const ImageBuffer& img, int row0, int col0, int h, int w);

// 10 log10(1 / MSE) on the [0,1] scale; +infinity for identical images.
double psnr(const ImageBuffer& reference, const ImageBuffer& test);

struct BenchmarkRow {
  std::string image;
  double csr = 0.0;
  std::string algorithm;
  std::string projection;
  double psnr_db = 0.0;  // NaN marks a failed run
  double wall_seconds = 0.0;
  std::string config_hash;
  std::string error;  // empty on success; reported on stderr, not in the CSV
};

std::string benchmark_csv_header();
std::string benchmark_csv_line(const BenchmarkRow& row);
void write_benchmark_csv(const std::string& path,
                         std::vector<BenchmarkRow> rows);

}  // namespace csgmm::metrics_io

#endif
