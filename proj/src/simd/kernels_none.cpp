// Targets with no vector variant: only the scalar table exists.
#include "whmc/simd/kernels.hpp"

namespace whmc::simd {

const KernelTable* avx2_kernels() { return nullptr; }
const KernelTable* neon_kernels() { return nullptr; }

}  // namespace whmc::simd
