#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "whmc/simd/kernels.hpp"

namespace whmc::simd {
namespace {

const KernelTable& choose() {
  if (const char* env = std::getenv("WHMC_KERNELS")) {
    const std::string want(env);
    if (want == "scalar") return scalar_kernels();
    if (want == "avx2" && avx2_kernels() != nullptr) return *avx2_kernels();
    if (want == "neon" && neon_kernels() != nullptr) return *neon_kernels();
  }
  if (const KernelTable* t = avx2_kernels()) return *t;
  if (const KernelTable* t = neon_kernels()) return *t;
  return scalar_kernels();
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> current{&choose()};
  return current;
}

void require_same(std::size_t a, std::size_t b) {
  if (a != b) throw std::invalid_argument("simd kernel: length mismatch");
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
    case Isa::kNeon:
      return "neon";
  }
  return "unknown";
}

const KernelTable& active() { return *slot().load(std::memory_order_relaxed); }

const KernelTable& set_active(const KernelTable& table) {
  return *slot().exchange(&table);
}

double dot(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  return active().dot(a.data(), b.data(), a.size());
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  require_same(a.size(), b.size());
  return active().squared_distance(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  require_same(x.size(), y.size());
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void subtract(std::span<const double> a, std::span<const double> b, std::span<double> out) {
  require_same(a.size(), b.size());
  require_same(a.size(), out.size());
  active().subtract(a.data(), b.data(), out.data(), a.size());
}

void matvec(std::span<const double> m, std::size_t rows, std::size_t cols,
            std::span<const double> x, std::span<double> out) {
  require_same(m.size(), rows * cols);
  require_same(x.size(), cols);
  require_same(out.size(), rows);
  active().matvec(m.data(), rows, cols, x.data(), out.data());
}

}  // namespace whmc::simd
