#include <gtest/gtest.h>

#include <cmath>

#include <fmt/format.h>

#include "dxi/power.hpp"

using namespace dxi;

TEST(HalfWidth, Formula) {
    const auto r = ci_halfwidth(0.7, 476);
    EXPECT_DOUBLE_EQ(r.x, 1.96 * std::sqrt(0.7 * 0.3 / 476.0));
    EXPECT_EQ(r.n, 476u);
    EXPECT_THROW(ci_halfwidth(0.0, 10), std::invalid_argument);
    EXPECT_THROW(ci_halfwidth(1.0, 10), std::invalid_argument);
    EXPECT_THROW(ci_halfwidth(0.5, 0), std::invalid_argument);
}

TEST(HalfWidth, PublishedGrid) {
    const std::vector<double> p{0.70, 0.75, 0.80};
    const std::vector<std::size_t> n{476, 1143, 391};
    const double printed[3][3] = {{4.12, 3.89, 3.59}, {2.67, 2.51, 2.32}, {4.54, 4.29, 3.96}};
    const auto t = halfwidth_table(p, n);
    int exact = 0;
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            const double pct = 100.0 * t.cells[i][j].x;
            EXPECT_NEAR(pct, printed[i][j], 0.02);
            exact += fmt::format("{:.2f}", pct) == fmt::format("{:.2f}", printed[i][j]) ? 1 : 0;
        }
    }
    EXPECT_EQ(exact, 8);  // 1143 at 70% recomputes to 2.66
}

TEST(HalfWidth, ShrinksWithN) {
    for (std::size_t n = 10; n < 5000; n += 97) {
        EXPECT_GT(ci_halfwidth(0.7, n).x, ci_halfwidth(0.7, n + 1).x);
        // symmetric in p
        EXPECT_DOUBLE_EQ(ci_halfwidth(0.3, n).x, ci_halfwidth(0.7, n).x);
    }
}

TEST(Table, RenderingAndLabels) {
    const std::vector<double> p{0.70};
    const std::vector<std::size_t> n{476, 100};
    const std::vector<std::string> labels{"PRIME", "small"};
    const auto t = halfwidth_table(p, n, labels);
    const auto md = to_markdown(t);
    EXPECT_NE(md.find("| PRIME | ±4.12% |"), std::string::npos);
    const auto csv = to_csv(t);
    EXPECT_EQ(csv.rfind("cohort,n,p,halfwidth\nPRIME,476,0.7,0.041", 0), 0u);
    EXPECT_EQ(to_json(t).size(), 2u);
    EXPECT_EQ(halfwidth_table(p, n).row_labels[1], "N=100");
    EXPECT_THROW(halfwidth_table({}, n), std::invalid_argument);
    EXPECT_THROW(halfwidth_table(p, {}), std::invalid_argument);
    const std::vector<std::string> one{"x"};
    EXPECT_THROW(halfwidth_table(p, n, one), std::invalid_argument);
}
