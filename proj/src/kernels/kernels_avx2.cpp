#include "dxi/kernels.hpp"

#include <immintrin.h>

#include <array>

namespace dxi::kernels::avx2 {

namespace {

std::array<double, 4> store_lanes(__m256d acc) {
    alignas(32) std::array<double, 4> lane{};
    _mm256_store_pd(lane.data(), acc);
    return lane;
}

}  // namespace

double gather_sum_f64(std::span<const double> values, std::span<const std::uint32_t> indices) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n = indices.size();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) {
        const __m128i idx = _mm_loadu_si128(reinterpret_cast<const __m128i*>(indices.data() + k));
        acc = _mm256_add_pd(acc, _mm256_i32gather_pd(values.data(), idx, 8));
    }
    auto lane = store_lanes(acc);
    for (; k < n; ++k) lane[k & 3] += values[indices[k]];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

std::int64_t gather_sum_i32(std::span<const std::int32_t> values, std::span<const std::uint32_t> indices) {
    __m256i acc = _mm256_setzero_si256();
    const std::size_t n = indices.size();
    std::size_t k = 0;
    for (; k + 8 <= n; k += 8) {
        const __m256i idx = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(indices.data() + k));
        const __m256i v = _mm256_i32gather_epi32(values.data(), idx, 4);
        acc = _mm256_add_epi64(acc, _mm256_cvtepi32_epi64(_mm256_castsi256_si128(v)));
        acc = _mm256_add_epi64(acc, _mm256_cvtepi32_epi64(_mm256_extracti128_si256(v, 1)));
    }
    alignas(32) std::array<std::int64_t, 4> lane{};
    _mm256_store_si256(reinterpret_cast<__m256i*>(lane.data()), acc);
    std::int64_t total = lane[0] + lane[1] + lane[2] + lane[3];
    for (; k < n; ++k) total += values[indices[k]];
    return total;
}

std::size_t count_equal_u8(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    const std::size_t n = a.size();
    std::size_t same = 0;
    std::size_t k = 0;
    for (; k + 32 <= n; k += 32) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a.data() + k));
        const __m256i vb = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(b.data() + k));
        const auto mask = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(va, vb)));
        same += static_cast<std::size_t>(_mm_popcnt_u32(mask));
    }
    for (; k < n; ++k) same += a[k] == b[k] ? 1U : 0U;
    return same;
}

std::size_t count_nonzero_u8(std::span<const std::uint8_t> a) {
    const std::size_t n = a.size();
    const __m256i zero = _mm256_setzero_si256();
    std::size_t nonzero = 0;
    std::size_t k = 0;
    for (; k + 32 <= n; k += 32) {
        const __m256i va = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(a.data() + k));
        const auto mask = static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(va, zero)));
        nonzero += 32U - static_cast<std::size_t>(_mm_popcnt_u32(mask));
    }
    for (; k < n; ++k) nonzero += a[k] != 0 ? 1U : 0U;
    return nonzero;
}

double sum_f64(std::span<const double> values) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n = values.size();
    std::size_t k = 0;
    for (; k + 4 <= n; k += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(values.data() + k));
    auto lane = store_lanes(acc);
    for (; k < n; ++k) lane[k & 3] += values[k];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace dxi::kernels::avx2
