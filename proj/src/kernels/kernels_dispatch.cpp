#include "dxi/kernels.hpp"

#include <cstdlib>
#include <string>

namespace dxi::kernels {

namespace {

constexpr KernelTable kScalarTable{
    Isa::Scalar,        scalar::gather_sum_f64,   scalar::gather_sum_i32,
    scalar::count_equal_u8, scalar::count_nonzero_u8, scalar::sum_f64,
};

#if defined(DXI_HAVE_AVX2)
constexpr KernelTable kAvx2Table{
    Isa::Avx2,        avx2::gather_sum_f64,   avx2::gather_sum_i32,
    avx2::count_equal_u8, avx2::count_nonzero_u8, avx2::sum_f64,
};
#endif

const KernelTable& select_active() noexcept {
    if (const char* env = std::getenv("DXI_SIMD"); env != nullptr && std::string(env) == "scalar")
        return kScalarTable;
    return available(Isa::Avx2) ? table(Isa::Avx2) : kScalarTable;
}

}  // namespace

bool available(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar:
            return true;
        case Isa::Avx2:
#if defined(DXI_HAVE_AVX2)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("popcnt");
#else
            return false;
#endif
    }
    return false;
}

const KernelTable& table(Isa isa) noexcept {
#if defined(DXI_HAVE_AVX2)
    if (isa == Isa::Avx2 && available(Isa::Avx2)) return kAvx2Table;
#endif
    (void)isa;
    return kScalarTable;
}

const KernelTable& active() noexcept {
    static const KernelTable& chosen = select_active();
    return chosen;
}

std::string_view name(Isa isa) noexcept {
    return isa == Isa::Avx2 ? "avx2" : "scalar";
}

}  // namespace dxi::kernels
