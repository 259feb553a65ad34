#include "dxi/kernels.hpp"

#include <array>

namespace dxi::kernels::scalar {

double gather_sum_f64(std::span<const double> values, std::span<const std::uint32_t> indices) {
    std::array<double, 4> lane{0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < indices.size(); ++k) lane[k & 3] += values[indices[k]];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

std::int64_t gather_sum_i32(std::span<const std::int32_t> values, std::span<const std::uint32_t> indices) {
    std::int64_t total = 0;
    for (const std::uint32_t idx : indices) total += values[idx];
    return total;
}

std::size_t count_equal_u8(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
    std::size_t same = 0;
    for (std::size_t k = 0; k < a.size(); ++k) same += a[k] == b[k] ? 1U : 0U;
    return same;
}

std::size_t count_nonzero_u8(std::span<const std::uint8_t> a) {
    std::size_t n = 0;
    for (const std::uint8_t v : a) n += v != 0 ? 1U : 0U;
    return n;
}

double sum_f64(std::span<const double> values) {
    std::array<double, 4> lane{0.0, 0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < values.size(); ++k) lane[k & 3] += values[k];
    return (lane[0] + lane[1]) + (lane[2] + lane[3]);
}

}  // namespace dxi::kernels::scalar
