#ifndef CSGMM_SENSING_HPP
#define CSGMM_SENSING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace csgmm::sensing {

// Implicit M x N sensing map: row-selected, column-permuted, orthonormalized
// Hadamard matrix. Immutable after construction; apply/adjoint are reentrant.
struct SensingOperator {
  std::size_t order = 0;     // N, power of two
  std::size_t num_rows = 0;  // M
  std::vector<std::uint32_t> permutation;    // column permutation on {0..N-1}
  std::vector<std::uint32_t> row_selection;  // strictly increasing, size M
  double scale = 1.0;                        // 1/sqrt(N)
  std::uint64_t seed = 0;
};

struct Measurement {
  std::vector<double> values;  // length M
  double csr = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t operator_seed = 0;
  std::size_t order = 0;  // N of the operator that produced the values
};

// In-place fast Walsh-Hadamard transform, natural (Sylvester) order,
// unnormalized: v <- H v with H in {+-1}^{N x N}, O(N log N).
void fwht(std::span<double> v);
std::vector<double> fwht(std::vector<double> v);

SensingOperator build_operator(std::size_t n, double csr, std::uint64_t seed);

// Same construction with an explicit column permutation (test hook).
SensingOperator build_operator_with_permutation(std::size_t n, double csr,
                                                std::vector<std::uint32_t> permutation,
                                                std::uint64_t seed);

std::vector<double> apply(const SensingOperator& op, std::span<const double> x);
std::vector<double> adjoint(const SensingOperator& op, std::span<const double> y);

Measurement measure(const SensingOperator& op, std::span<const double> image,
                    double noise_sigma, std::uint64_t noise_seed);

// Binary container: little-endian header {"CSMEAS1", N:u64, M:u64,
// operator_seed:u64, noise_sigma:f64, csr:f64} followed by M f64 values.
void save_measurement(const std::string& path, const Measurement& m);
Measurement load_measurement(const std::string& path);

// Plain-text debug twin: '#'-prefixed header, then one value per line.
void save_measurement_text(const std::string& path, const Measurement& m);
Measurement load_measurement_text(const std::string& path);

}  // namespace csgmm::sensing

#endif
