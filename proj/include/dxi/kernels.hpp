#pragma once

// Inner loops of the resampling and agreement code, in a portable scalar
// reference and an AVX2 variant chosen at runtime.
//
// The floating-point reductions use four interleaved accumulators (element i
// goes to lane i % 4) combined as (l0 + l1) + (l2 + l3). The scalar reference
// follows the same order, so both variants return bit-identical results and
// the dispatch choice never changes a report.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>

namespace dxi::kernels {

enum class Isa { Scalar, Avx2 };

struct KernelTable {
    Isa isa;
    // sum_k values[indices[k]]
    double (*gather_sum_f64)(std::span<const double> values, std::span<const std::uint32_t> indices);
    // sum_k values[indices[k]], exact
    std::int64_t (*gather_sum_i32)(std::span<const std::int32_t> values,
                                   std::span<const std::uint32_t> indices);
    // #{k : a[k] == b[k]}
    std::size_t (*count_equal_u8)(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
    // #{k : a[k] != 0}
    std::size_t (*count_nonzero_u8)(std::span<const std::uint8_t> a);
    // sum_k values[k] in lane order
    double (*sum_f64)(std::span<const double> values);
};

namespace scalar {
double gather_sum_f64(std::span<const double> values, std::span<const std::uint32_t> indices);
std::int64_t gather_sum_i32(std::span<const std::int32_t> values, std::span<const std::uint32_t> indices);
std::size_t count_equal_u8(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
std::size_t count_nonzero_u8(std::span<const std::uint8_t> a);
double sum_f64(std::span<const double> values);
}  // namespace scalar

#if defined(DXI_HAVE_AVX2)
namespace avx2 {
double gather_sum_f64(std::span<const double> values, std::span<const std::uint32_t> indices);
std::int64_t gather_sum_i32(std::span<const std::int32_t> values, std::span<const std::uint32_t> indices);
std::size_t count_equal_u8(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);
std::size_t count_nonzero_u8(std::span<const std::uint8_t> a);
double sum_f64(std::span<const double> values);
}  // namespace avx2
#endif

// True when the variant is compiled in and the CPU supports it.
bool available(Isa isa) noexcept;

// Table for a specific variant; falls back to scalar when unavailable.
const KernelTable& table(Isa isa) noexcept;

// Table chosen on first use: the best available variant, unless the
// DXI_SIMD environment variable is set to "scalar".
const KernelTable& active() noexcept;

std::string_view name(Isa isa) noexcept;

}  // namespace dxi::kernels
