#include "csgmm/sensing.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "csgmm/rng.hpp"

namespace csgmm::sensing {

namespace {

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

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
  if (!is) throw std::runtime_error("measurement file truncated");
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

constexpr char kMagic[] = "CSMEAS1";  // 7 bytes on disk, no terminator

}  // namespace

void fwht(std::span<double> v) {
  const std::size_t n = v.size();
  if (!is_power_of_two(n))
    throw std::invalid_argument("fwht: length must be a power of two");
  for (std::size_t half = 1; half < n; half <<= 1) {
    for (std::size_t block = 0; block < n; block += 2 * half) {
      for (std::size_t i = block; i < block + half; ++i) {
        const double a = v[i];
        const double b = v[i + half];
        v[i] = a + b;
        v[i + half] = a - b;
      }
    }
  }
}

std::vector<double> fwht(std::vector<double> v) {
  fwht(std::span<double>(v));
  return v;
}

SensingOperator build_operator_with_permutation(std::size_t n, double csr,
                                                std::vector<std::uint32_t> permutation,
                                                std::uint64_t seed) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("build_operator: n must be a power of two");
  if (!(csr > 0.0 && csr <= 1.0))
    throw std::invalid_argument("build_operator: csr must lie in (0, 1]");
  if (permutation.size() != n)
    throw std::invalid_argument("build_operator: permutation size mismatch");
  SensingOperator op;
  op.order = n;
  op.num_rows = static_cast<std::size_t>(
      std::max<long long>(1, std::llround(csr * static_cast<double>(n))));
  op.permutation = std::move(permutation);
  op.row_selection.resize(op.num_rows);
  std::iota(op.row_selection.begin(), op.row_selection.end(), 0u);
  op.scale = 1.0 / std::sqrt(static_cast<double>(n));
  op.seed = seed;
  return op;
}

SensingOperator build_operator(std::size_t n, double csr, std::uint64_t seed) {
  if (!is_power_of_two(n))
    throw std::invalid_argument("build_operator: n must be a power of two");
  std::vector<std::uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(seed);
  for (std::size_t i = n - 1; i > 0; --i) {  // Fisher-Yates
    const std::size_t j = rng.next_below(i + 1);
    std::swap(perm[i], perm[j]);
  }
  return build_operator_with_permutation(n, csr, std::move(perm), seed);
}

std::vector<double> apply(const SensingOperator& op, std::span<const double> x) {
  if (x.size() != op.order)
    throw std::invalid_argument("apply: input length != operator order");
  std::vector<double> buf(op.order);
  for (std::size_t j = 0; j < op.order; ++j) buf[op.permutation[j]] = x[j];
  fwht(std::span<double>(buf));
  std::vector<double> out(op.num_rows);
  for (std::size_t i = 0; i < op.num_rows; ++i)
    out[i] = buf[op.row_selection[i]] * op.scale;
  return out;
}

std::vector<double> adjoint(const SensingOperator& op, std::span<const double> y) {
  if (y.size() != op.num_rows)
    throw std::invalid_argument("adjoint: input length != operator row count");
  std::vector<double> buf(op.order, 0.0);
  for (std::size_t i = 0; i < op.num_rows; ++i)
    buf[op.row_selection[i]] = y[i];
  fwht(std::span<double>(buf));
  std::vector<double> out(op.order);
  for (std::size_t j = 0; j < op.order; ++j)
    out[j] = buf[op.permutation[j]] * op.scale;
  return out;
}

Measurement measure(const SensingOperator& op, std::span<const double> image,
                    double noise_sigma, std::uint64_t noise_seed) {
  if (noise_sigma < 0.0)
    throw std::invalid_argument("measure: noise_sigma must be nonnegative");
  Measurement m;
  m.values = apply(op, image);
  if (noise_sigma > 0.0) {
    Rng rng(noise_seed);
    for (double& v : m.values) v += noise_sigma * rng.next_normal();
  }
  m.csr = static_cast<double>(op.num_rows) / static_cast<double>(op.order);
  m.noise_sigma = noise_sigma;
  m.operator_seed = op.seed;
  m.order = op.order;
  return m;
}

void save_measurement(const std::string& path, const Measurement& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os.write(kMagic, 7);
  write_u64(os, m.order);
  write_u64(os, m.values.size());
  write_u64(os, m.operator_seed);
  write_f64(os, m.noise_sigma);
  write_f64(os, m.csr);
  for (double v : m.values) write_f64(os, v);
  if (!os) throw std::runtime_error("write failed: " + path);
}

Measurement load_measurement(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open: " + path);
  char magic[7];
  is.read(magic, 7);
  if (!is || std::memcmp(magic, kMagic, 7) != 0)
    throw std::runtime_error("not a CSMEAS1 file: " + path);
  Measurement m;
  m.order = read_u64(is);
  const std::uint64_t num_values = read_u64(is);
  m.operator_seed = read_u64(is);
  m.noise_sigma = read_f64(is);
  m.csr = read_f64(is);
  if (num_values > m.order)
    throw std::runtime_error("corrupt measurement header: M > N");
  m.values.resize(num_values);
  for (auto& v : m.values) v = read_f64(is);
  return m;
}

void save_measurement_text(const std::string& path, const Measurement& m) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "# CSMEAS1 N=" << m.order << " M=" << m.values.size()
     << " operator_seed=" << m.operator_seed;
  os.precision(17);
  os << " noise_sigma=" << m.noise_sigma << " csr=" << m.csr << "\n";
  for (double v : m.values) os << v << "\n";
}

Measurement load_measurement_text(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::string header;
  std::getline(is, header);
  Measurement m;
  std::uint64_t num_values = 0;
  if (header.rfind("# CSMEAS1", 0) != 0 ||
      std::sscanf(header.c_str(),
                  "# CSMEAS1 N=%zu M=%lu operator_seed=%lu noise_sigma=%lf csr=%lf",
                  &m.order, &num_values, &m.operator_seed, &m.noise_sigma,
                  &m.csr) != 5)
    throw std::runtime_error("bad text measurement header: " + path);
  m.values.reserve(num_values);
  double v;
  while (is >> v) m.values.push_back(v);
  if (m.values.size() != num_values)
    throw std::runtime_error("text measurement truncated: " + path);
  return m;
}

}  // namespace csgmm::sensing
