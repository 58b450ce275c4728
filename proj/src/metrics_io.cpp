#include "csgmm/metrics_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace csgmm::metrics_io {

namespace {

// Next whitespace-delimited header token, skipping '#' comments.
std::string next_token(std::istream& is) {
  std::string tok;
  for (;;) {
    const int c = is.get();
    if (c == EOF) {
      if (tok.empty()) throw TruncatedFileError("unexpected end of header");
      return tok;
    }
    if (c == '#') {
      std::string line;
      std::getline(is, line);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) return tok;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
}

int parse_positive_int(const std::string& tok, const char* what) {
  try {
    std::size_t pos = 0;
    const int v = std::stoi(tok, &pos);
    if (pos != tok.size() || v <= 0) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ImageFormatError(std::string("bad ") + what + " field: " + tok);
  }
}

}  // namespace

ImageBuffer load_image(const std::string& path, bool force_gray) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  const std::string magic = next_token(is);
  int channels;
  if (magic == "P5")
    channels = 1;
  else if (magic == "P6")
    channels = 3;
  else
    throw ImageFormatError("unsupported format (want P5/P6): " + path);
  ImageBuffer img;
  img.width = parse_positive_int(next_token(is), "width");
  img.height = parse_positive_int(next_token(is), "height");
  img.channels = channels;
  const int maxval = parse_positive_int(next_token(is), "maxval");
  if (maxval != 255)
    throw ImageFormatError("only 8-bit samples supported: " + path);
  // Single whitespace byte separates header from raster.
  const std::size_t count = img.plane_size() * channels;
  std::vector<unsigned char> raw(count);
  is.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(is.gcount()) != count)
    throw TruncatedFileError("raster truncated: " + path);
  img.pixels.resize(count);
  if (channels == 1) {
    for (std::size_t i = 0; i < count; ++i) img.pixels[i] = raw[i] / 255.0;
  } else {
    // interleaved on disk -> planar in memory
    const std::size_t plane = img.plane_size();
    for (std::size_t i = 0; i < plane; ++i)
      for (int ch = 0; ch < 3; ++ch)
        img.pixels[ch * plane + i] = raw[3 * i + ch] / 255.0;
  }
  if (force_gray && channels == 3) return to_gray(img);
  return img;
}

void save_image(const std::string& path, const ImageBuffer& img) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << (img.channels == 1 ? "P5" : "P6") << "\n"
     << img.width << " " << img.height << "\n255\n";
  const std::size_t plane = img.plane_size();
  std::vector<unsigned char> raw(plane * img.channels);
  auto quantize = [](double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
  };
  if (img.channels == 1) {
    for (std::size_t i = 0; i < plane; ++i) raw[i] = quantize(img.pixels[i]);
  } else {
    for (std::size_t i = 0; i < plane; ++i)
      for (int ch = 0; ch < 3; ++ch)
        raw[3 * i + ch] = quantize(img.pixels[ch * plane + i]);
  }
  os.write(reinterpret_cast<const char*>(raw.data()),
           static_cast<std::streamsize>(raw.size()));
  if (!os) throw std::runtime_error("write failed: " + path);
}

ImageBuffer to_gray(const ImageBuffer& img) {
  if (img.channels == 1) return img;
  ImageBuffer out;
  out.height = img.height;
  out.width = img.width;
  out.channels = 1;
  const std::size_t plane = img.plane_size();
  out.pixels.resize(plane);
  for (std::size_t i = 0; i < plane; ++i)
    out.pixels[i] = 0.299 * img.pixels[i] + 0.587 * img.pixels[plane + i] +
                    0.114 * img.pixels[2 * plane + i];
  return out;
}

ImageBuffer resize_area(const ImageBuffer& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("resize_area: bad target size");
  ImageBuffer out;
  out.height = out_h;
  out.width = out_w;
  out.channels = img.channels;
  out.pixels.assign(static_cast<std::size_t>(out_h) * out_w * img.channels, 0.0);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int ch = 0; ch < img.channels; ++ch)
    for (int r = 0; r < out_h; ++r) {
      const double y0 = r * sy, y1 = (r + 1) * sy;
      for (int c = 0; c < out_w; ++c) {
        const double x0 = c * sx, x1 = (c + 1) * sx;
        double acc = 0.0;
        for (int ir = static_cast<int>(y0); ir < img.height && ir < y1; ++ir) {
          const double hy = std::min<double>(ir + 1, y1) - std::max<double>(ir, y0);
          for (int ic = static_cast<int>(x0); ic < img.width && ic < x1; ++ic) {
            const double hx =
                std::min<double>(ic + 1, x1) - std::max<double>(ic, x0);
            acc += hy * hx * img.at(ch, ir, ic);
          }
        }
        out.at(ch, r, c) = acc / (sy * sx);
      }
    }
  return out;
}

ImageBuffer crop(const ImageBuffer& img, int row0, int col0, int h, int w) {
  if (row0 < 0 || col0 < 0 || row0 + h > img.height || col0 + w > img.width)
    throw std::invalid_argument("crop: window out of bounds");
  ImageBuffer out;
  out.height = h;
  out.width = w;
  out.channels = img.channels;
  out.pixels.resize(static_cast<std::size_t>(h) * w * img.channels);
  for (int ch = 0; ch < img.channels; ++ch)
    for (int r = 0; r < h; ++r)
      for (int c = 0; c < w; ++c)
        out.at(ch, r, c) = img.at(ch, row0 + r, col0 + c);
  return out;
}

double psnr(const ImageBuffer& reference, const ImageBuffer& test) {
  if (reference.height != test.height || reference.width != test.width ||
      reference.channels != test.channels)
    throw std::invalid_argument("psnr: shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < reference.pixels.size(); ++i) {
    const double d = reference.pixels[i] - test.pixels[i];
    mse += d * d;
  }
  mse /= static_cast<double>(reference.pixels.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(mse);
}

std::string benchmark_csv_header() {
  return "image,csr,algorithm,projection,psnr_db,wall_seconds,config_hash";
}

std::string benchmark_csv_line(const BenchmarkRow& row) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), "%s,%.6g,%s,%s,%.4f,%.3f,%s",
                row.image.c_str(), row.csr, row.algorithm.c_str(),
                row.projection.c_str(), row.psnr_db, row.wall_seconds,
                row.config_hash.c_str());
  return buf;
}

void write_benchmark_csv(const std::string& path,
                         std::vector<BenchmarkRow> rows) {
  std::sort(rows.begin(), rows.end(),
            [](const BenchmarkRow& a, const BenchmarkRow& b) {
              if (a.image != b.image) return a.image < b.image;
              if (a.csr != b.csr) return a.csr < b.csr;
              return a.algorithm < b.algorithm;
            });
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << benchmark_csv_header() << "\n";
  for (const auto& row : rows) os << benchmark_csv_line(row) << "\n";
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace csgmm::metrics_io
