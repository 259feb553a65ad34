#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "dxi/kernels.hpp"
#include "dxi/parallel.hpp"
#include "dxi/rng.hpp"

using namespace dxi;

TEST(Rng, SameKeySameSequence) {
    Stream a(7, 3), b(7, 3);
    for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(Rng, StreamsDiffer) {
    Stream a(7, 3), b(7, 4), c(8, 3);
    int same_ab = 0, same_ac = 0;
    for (int i = 0; i < 1000; ++i) {
        const auto x = a();
        same_ab += x == b() ? 1 : 0;
        same_ac += x == c() ? 1 : 0;
    }
    EXPECT_EQ(same_ab, 0);
    EXPECT_EQ(same_ac, 0);
}

TEST(Rng, DeriveSeedSeparatesTags) {
    EXPECT_NE(derive_seed(42, 1), derive_seed(42, 2));
    EXPECT_NE(derive_seed(42, 1), derive_seed(43, 1));
    EXPECT_EQ(derive_seed(42, 1), derive_seed(42, 1));
}

TEST(Rng, UniformInUnitInterval) {
    Stream s(1, 0);
    double sum = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = s.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        sum += u;
    }
    EXPECT_NEAR(sum / 100000.0, 0.5, 4.0 * std::sqrt(1.0 / 12.0 / 100000.0));
}

TEST(Rng, BoundedIsUniform) {
    Stream s(2, 0);
    const std::uint32_t bound = 7;
    std::vector<int> counts(bound, 0);
    const int n = 70000;
    for (int i = 0; i < n; ++i) {
        const auto v = s.bounded(bound);
        ASSERT_LT(v, bound);
        ++counts[v];
    }
    // Chi-square with 6 df; 0.999 quantile is 22.46.
    double chi2 = 0.0;
    for (const int c : counts) chi2 += (c - n / 7.0) * (c - n / 7.0) / (n / 7.0);
    EXPECT_LT(chi2, 22.46);
}

TEST(Rng, StandardNormalMoments) {
    Stream s(3, 0);
    const int n = 200000;
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = standard_normal(s);
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(sq / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Parallel, EveryIndexOnce) {
    for (unsigned threads : {1u, 2u, 3u, 8u}) {
        std::vector<int> hits(1001, 0);
        parallel_blocks(hits.size(), threads, [&](std::size_t b, std::size_t e) {
            for (std::size_t i = b; i < e; ++i) ++hits[i];
        });
        for (const int h : hits) ASSERT_EQ(h, 1);
    }
}

TEST(Parallel, PropagatesExceptions) {
    EXPECT_THROW(parallel_blocks(10, 4, [](std::size_t b, std::size_t) {
                     if (b == 0) throw std::runtime_error("boom");
                 }),
                 std::runtime_error);
}

namespace {

bool same_bits(double a, double b) {
    return std::memcmp(&a, &b, sizeof a) == 0;
}

}  // namespace

TEST(Kernels, ScalarMatchesNaiveDefinitions) {
    Stream s(5, 0);
    for (std::size_t n : {0u, 1u, 3u, 4u, 5u, 17u, 64u, 1001u}) {
        std::vector<double> vals(n + 1);
        std::vector<std::int32_t> ints(n + 1);
        for (auto& v : vals) v = s.uniform();
        for (auto& v : ints) v = static_cast<std::int32_t>(s.bounded(1000));
        std::vector<std::uint32_t> idx(n);
        for (auto& i : idx) i = s.bounded(static_cast<std::uint32_t>(n + 1));
        std::int64_t isum = 0;
        double dsum = 0.0;
        for (const auto i : idx) {
            isum += ints[i];
            dsum += vals[i];
        }
        EXPECT_EQ(kernels::scalar::gather_sum_i32(ints, idx), isum);
        EXPECT_NEAR(kernels::scalar::gather_sum_f64(vals, idx), dsum, 1e-12 * std::max(1.0, dsum));

        std::vector<std::uint8_t> a(n), b(n);
        std::size_t eq = 0, nz = 0;
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = static_cast<std::uint8_t>(s.bounded(3));
            b[k] = static_cast<std::uint8_t>(s.bounded(3));
            eq += a[k] == b[k] ? 1 : 0;
            nz += a[k] != 0 ? 1 : 0;
        }
        EXPECT_EQ(kernels::scalar::count_equal_u8(a, b), eq);
        EXPECT_EQ(kernels::scalar::count_nonzero_u8(a), nz);
    }
}

TEST(Kernels, Avx2BitIdenticalToScalar) {
    if (!kernels::available(kernels::Isa::Avx2)) GTEST_SKIP() << "AVX2 not available";
    const auto& sc = kernels::table(kernels::Isa::Scalar);
    const auto& vx = kernels::table(kernels::Isa::Avx2);
    ASSERT_EQ(vx.isa, kernels::Isa::Avx2);
    Stream s(6, 0);
    for (std::size_t n = 0; n < 300; n += (n < 40 ? 1 : 37)) {
        std::vector<double> vals(n + 3);
        std::vector<std::int32_t> ints(n + 3);
        for (auto& v : vals) v = (s.uniform() - 0.3) * 1e3;
        for (auto& v : ints) v = static_cast<std::int32_t>(s.bounded(1u << 30)) - (1 << 29);
        std::vector<std::uint32_t> idx(n);
        for (auto& i : idx) i = s.bounded(static_cast<std::uint32_t>(n + 3));
        ASSERT_TRUE(same_bits(sc.gather_sum_f64(vals, idx), vx.gather_sum_f64(vals, idx))) << "n=" << n;
        ASSERT_TRUE(same_bits(sc.sum_f64(vals), vx.sum_f64(vals))) << "n=" << n;
        ASSERT_EQ(sc.gather_sum_i32(ints, idx), vx.gather_sum_i32(ints, idx)) << "n=" << n;

        std::vector<std::uint8_t> a(n), b(n);
        for (std::size_t k = 0; k < n; ++k) {
            a[k] = static_cast<std::uint8_t>(s.bounded(2));
            b[k] = static_cast<std::uint8_t>(s.bounded(2));
        }
        ASSERT_EQ(sc.count_equal_u8(a, b), vx.count_equal_u8(a, b)) << "n=" << n;
        ASSERT_EQ(sc.count_nonzero_u8(a), vx.count_nonzero_u8(a)) << "n=" << n;
    }
}

TEST(Kernels, LargeByteCountsDoNotOverflow) {
    std::vector<std::uint8_t> a(100000, 1), b(100000, 1);
    for (const auto isa : {kernels::Isa::Scalar, kernels::Isa::Avx2}) {
        const auto& t = kernels::table(isa);
        EXPECT_EQ(t.count_equal_u8(a, b), 100000u);
        EXPECT_EQ(t.count_nonzero_u8(a), 100000u);
    }
}

TEST(Kernels, ActiveTableIsNamed) {
    const auto& t = kernels::active();
    EXPECT_FALSE(kernels::name(t.isa).empty());
    EXPECT_TRUE(kernels::available(kernels::Isa::Scalar));
}
