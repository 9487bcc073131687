#pragma once

// Dense double-precision inner-loop kernels with a scalar reference
// implementation and ISA-specific variants selected once at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace whmc::simd {

enum class Isa { kScalar, kAvx2, kNeon };

std::string_view isa_name(Isa isa);

// Function table for one instruction set. All entries accept spans of equal
// length (checked by the public wrappers below, not by the table entries).
struct KernelTable {
  Isa isa;
  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*squared_distance)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // out = a - b
  void (*subtract)(const double* a, const double* b, double* out, std::size_t n);
  // out = M x for a row-major rows x cols matrix.
  void (*matvec)(const double* m, std::size_t rows, std::size_t cols,
                 const double* x, double* out);
};

const KernelTable& scalar_kernels();
// nullptr when the variant was not compiled in or the CPU lacks the ISA.
const KernelTable* avx2_kernels();
const KernelTable* neon_kernels();

// The table used by the library. Chosen on first use: the best supported ISA,
// unless the WHMC_KERNELS environment variable names one ("scalar", "avx2",
// "neon").
const KernelTable& active();

// Overrides the active table (tests and benchmarks). Returns the previous one.
const KernelTable& set_active(const KernelTable& table);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);
void axpy(double alpha, std::span<const double> x, std::span<double> y);
void subtract(std::span<const double> a, std::span<const double> b,
              std::span<double> out);
void matvec(std::span<const double> m, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out);

}  // namespace whmc::simd
