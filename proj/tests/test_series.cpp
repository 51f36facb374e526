#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "asymfp/analytics.hpp"
#include "asymfp/series.hpp"

using namespace asymfp;

namespace {

Real rel_diff(const Real& a, const Real& b) {
    if (b.is_zero()) return abs(a);
    return abs(a - b) / abs(b);
}

Real two_pow(int e) { return ldexp(Real(1), e); }

}  // namespace

TEST_CASE("eps = 0 evaluation reproduces the closed-form Gaussian") {
    ModelParams params{0.1, 0.0, 0.0};
    const auto table = CoefficientTable::build_truncated(params, Truncation{100, 1, 256});
    const double t = 0.004;
    PrecisionGuard guard(256);

    const DensityPoint peak = eval_density(table, 0.0, t);
    CHECK(rel_diff(peak.value, gaussian_density(params, t, 0.0)) < two_pow(-200));
    // double sigma = 0.1 carries its binary representation error
    CHECK(rel_diff(peak.value, Real("63.078313050504885045")) < Real(1e-12));

    const double sd = params.sigma * std::sqrt(t);
    for (double q : {0.5, 2.0, 4.0}) {
        const DensityPoint p = eval_density(table, q * sd, t);
        CHECK(rel_diff(p.value, gaussian_density(params, t, q * sd)) < Real(1e-30));
    }
    // at 6 sd the N = 100 Taylor remainder enters at ~1e-25 of the point value
    const DensityPoint deep = eval_density(table, 6.0 * sd, t);
    CHECK(rel_diff(deep.value, gaussian_density(params, t, 6.0 * sd)) < Real(1e-20));
}

TEST_CASE("even symmetry for eta = 0 and mirror symmetry across the sign of eta") {
    ModelParams params{0.1, 0.005, 0.0};
    const auto table = CoefficientTable::build_truncated(params, Truncation{60, 4, 256});
    const double t = 0.08;
    for (double x : {0.002, 0.011, 0.05}) {
        CHECK(eval_density(table, x, t).value == eval_density(table, -x, t).value);
    }

    const auto plus = CoefficientTable::build_truncated(ModelParams{0.1, 0.005, 0.5},
                                                        Truncation{60, 4, 256});
    const auto minus = CoefficientTable::build_truncated(ModelParams{0.1, 0.005, -0.5},
                                                         Truncation{60, 4, 256});
    PrecisionGuard guard(256);
    for (double x : {-0.05, -0.01, 0.0, 0.03}) {
        CHECK(rel_diff(eval_density(plus, x, t).value, eval_density(minus, -x, t).value) <
              two_pow(-180));
    }
}

TEST_CASE("phi terms regroup into the density") {
    ModelParams params{0.1, 0.005, 0.0};
    const auto table = CoefficientTable::build_truncated(params, Truncation{80, 4, 256});
    PrecisionGuard guard(256);
    for (double t : {0.05, 0.2}) {
        for (double x : {0.0, 0.01, 0.04}) {
            Real sum = table.a00() / sqrt(Real(t));
            for (int j = 1; j <= 4; ++j) sum += phi_term(table, j, x, t);
            const Real direct = eval_density(table, x, t).value;
            CHECK(abs(sum - direct) < two_pow(-128) * abs(direct));
        }
    }
}

TEST_CASE("phi term edge cases") {
    ModelParams params{0.1, 0.005, 0.0};
    const auto k1 = CoefficientTable::build_truncated(params, Truncation{40, 1, 128});
    CHECK(phi_term(k1, 2, 0.01, 0.1).is_zero());  // band empty beyond K

    ModelParams gauss{0.1, 0.0, 0.0};
    const auto g1 = CoefficientTable::build_truncated(gauss, Truncation{40, 1, 128});
    PrecisionGuard guard(128);
    const Real phi1 = phi_term(g1, 1, 0.01, 0.1);
    const Real direct = eval_density(g1, 0.01, 0.1).value - g1.a00() / sqrt(Real(0.1));
    CHECK(abs(phi1 - direct) < two_pow(-100) * abs(direct));

    const auto skew = CoefficientTable::build_truncated(ModelParams{0.1, 0.005, 0.5},
                                                        Truncation{10, 2, 128});
    CHECK_THROWS_AS(phi_term(skew, 1, 0.01, 0.1), std::domain_error);
    CHECK_THROWS_AS(phi_term(g1, 0, 0.01, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(phi_term(g1, 1, 0.01, 0.0), std::invalid_argument);
}

TEST_CASE("grid evaluation") {
    ModelParams params{0.1, 0.005, 0.0};
    const auto table = CoefficientTable::build_truncated(params, Truncation{40, 3, 128});
    const double t = 0.08;

    SECTION("empty and singleton grids") {
        CHECK(eval_grid(table, {}, t).points.empty());
        const auto grid = eval_grid(table, {0.0}, t);
        REQUIRE(grid.points.size() == 1);
        CHECK(grid.points[0].value == eval_density(table, 0.0, t).value);
    }
    SECTION("symmetric grid gives a palindromic value array") {
        const auto grid = eval_grid(table, symmetric_grid(params, t, 5.0, 41), t);
        for (std::size_t i = 0; i < grid.points.size(); ++i)
            CHECK(grid.points[i].value ==
                  grid.points[grid.points.size() - 1 - i].value);
    }
    SECTION("threaded evaluation matches single-threaded exactly") {
        const auto xs = symmetric_grid(params, t, 4.0, 31);
        const auto one = eval_grid(table, xs, t, 1);
        const auto four = eval_grid(table, xs, t, 4);
        for (std::size_t i = 0; i < xs.size(); ++i) {
            CHECK(one.points[i].value == four.points[i].value);
            CHECK(one.points[i].max_monomial == four.points[i].max_monomial);
        }
    }
    SECTION("input validation") {
        CHECK_THROWS_AS(eval_grid(table, {0.0, 0.0}, t), std::invalid_argument);
        CHECK_THROWS_AS(eval_grid(table, {0.1, -0.1}, t), std::invalid_argument);
        CHECK_THROWS_AS(eval_density(table, 0.0, 0.0), std::invalid_argument);
        CHECK_THROWS_AS(eval_density(table, 0.0, -1.0), std::invalid_argument);
    }
}

TEST_CASE("cancellation diagnostics at a deep-tail point") {
    // 1-day horizon, x = 6 sigma sqrt(t): monomials reach ~1e8 while the sum
    // is ~1e-6, and the largest monomial sits within an order of magnitude of
    // the published 9.72e+7.
    ModelParams params{0.1, 0.005, 0.0};
    const auto table = CoefficientTable::build_truncated(params, Truncation{100, 1, 256});
    const double t = 0.004;
    const double x = 6.0 * params.sigma * std::sqrt(t);
    const DensityPoint p = eval_density(table, x, t);
    PrecisionGuard guard(256);
    const Real ratio = p.max_monomial / Real(9.72e7);
    CHECK(ratio > Real(0.1));
    CHECK(ratio < Real(10));
    CHECK(abs(p.final_over_max) < Real(1e-14));
    CHECK(p.max_monomial >= abs(p.value));
}

TEST_CASE("max monomial diagnostics are monotone in K at a fixed tail point") {
    ModelParams params{0.1, 0.005, 0.0};
    const double t = 0.004;
    const double x = 6.0 * params.sigma * std::sqrt(t);
    Real previous{0};
    for (int k = 1; k <= 5; ++k) {
        const auto table = CoefficientTable::build_truncated(params, Truncation{100, k, 256});
        const DensityPoint p = eval_density(table, x, t);
        CHECK(p.max_monomial >= previous);
        previous = p.max_monomial;
    }
}

TEST_CASE("convergence in N") {
    ModelParams params{0.1, 0.0, 0.0};
    std::vector<CoefficientTable> family;
    for (int n = 10; n <= 60; n += 10)
        family.push_back(CoefficientTable::build_truncated(params, Truncation{n, 1, 256}));
    const double t = 0.004;
    const double sd = params.sigma * std::sqrt(t);

    // Gaussian Taylor tail: stabilizes quickly at 3 sd, not at all (within
    // this ladder) at 6 sd where the remainder needs n ~ x^2/(2 sigma^2 t).
    const auto near = convergence_in_n(family, 3.0 * sd, t, Real(1e-12));
    REQUIRE(near.has_value());
    CHECK(*near <= 40);
    CHECK_FALSE(convergence_in_n(family, 6.0 * sd, t, Real(1e-12)).has_value());

    CHECK_THROWS_AS(convergence_in_n({family[0]}, 0.0, t, Real(1e-12)), std::invalid_argument);
    std::vector<CoefficientTable> unordered{family[1], family[0]};
    CHECK_THROWS_AS(convergence_in_n(unordered, 0.0, t, Real(1e-12)), std::invalid_argument);
}

TEST_CASE("grid CSV schema and determinism") {
    ModelParams params{0.1, 0.005, 0.0};
    const auto table = CoefficientTable::build_truncated(params, Truncation{20, 2, 128});
    const auto grid = eval_grid(table, symmetric_grid(params, 0.08, 3.0, 11), 0.08);
    std::ostringstream a, b;
    write_grid_csv(a, grid);
    write_grid_csv(b, grid);
    CHECK(a.str() == b.str());
    CHECK(a.str().rfind("x,density,max_monomial,final_over_max\n", 0) == 0);
    std::size_t lines = 0;
    for (char c : a.str())
        if (c == '\n') ++lines;
    CHECK(lines == 12);  // header + 11 points
}
