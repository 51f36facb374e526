#pragma once

// Evaluation of the truncated density series with cancellation diagnostics.
//
// At tail points the monomials a_{nm} x^m / t^{n+1/2} reach ~1e16 while the
// summed density is ~1e-6, so each point records the largest contributing
// monomial and the ratio of the final sum to it. Rows are evaluated by Horner
// over the stored band and combined smallest-first with compensated summation.

#include <algorithm>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "asymfp/coefficients.hpp"
#include "asymfp/params.hpp"
#include "asymfp/real.hpp"

namespace asymfp {

struct DensityPoint {
    double x = 0.0;
    double t = 0.0;
    Real value;
    Real max_monomial;     // largest |a_{nm} x^m / t^{n+1/2}| over included (n,m)
    Real final_over_max;   // value / max_monomial, sign kept
};

struct DensityGrid {
    ModelParams params;
    Truncation trunc;
    double t = 0.0;
    std::vector<double> xs;
    std::vector<DensityPoint> points;
    std::string table_id;
};

inline DensityPoint eval_density(const CoefficientTable& table, double x, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("eval_density requires t > 0");
    PrecisionGuard guard(table.trunc().precision_bits);

    const Real xr(x);
    const Real y = 1 / Real(t);
    const Real sqrt_y = sqrt(y);
    const int n_max = table.rows();

    std::vector<Real> contributions;
    contributions.reserve(static_cast<std::size_t>(n_max) + 1);
    contributions.push_back(table.a00() * sqrt_y);
    Real max_monomial = abs(contributions.back());

    Real ypow = sqrt_y;  // y^{n + 1/2}
    for (int n = 1; n <= n_max; ++n) {
        ypow *= y;
        const int lo = std::max(table.band_low(n), 2);

        // Row value: Horner in x over m = 2n .. lo, then scale by x^lo.
        Real h{0};
        for (int m = 2 * n; m >= lo; --m) h = h * xr + table.a(n, m);
        const Real xlo = pow_ui(xr, static_cast<unsigned long>(lo));
        contributions.push_back(h * xlo * ypow);

        // Diagnostics: per-monomial magnitudes across the same band.
        Real xm = abs(xlo);
        for (int m = lo; m <= 2 * n; ++m) {
            const Real& coeff = table.a(n, m);
            if (!coeff.is_zero()) {
                const Real mono = abs(coeff) * xm * ypow;
                if (mono > max_monomial) max_monomial = mono;
            }
            xm *= abs(xr);
        }
    }

    DensityPoint point;
    point.x = x;
    point.t = t;
    point.value = stable_sum(std::move(contributions));
    point.max_monomial = max_monomial;
    point.final_over_max = point.value / max_monomial;
    return point;
}

/// Pointwise eval_density over a strictly increasing grid. Points are
/// independent; `threads > 1` fans them out with a static index split, and
/// results are identical for any thread count.
inline DensityGrid eval_grid(const CoefficientTable& table, std::vector<double> xs, double t,
                             unsigned threads = 1) {
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (!(xs[i - 1] < xs[i]))
            throw std::invalid_argument("grid xs must be strictly increasing");
    if (!(t > 0.0)) throw std::invalid_argument("eval_grid requires t > 0");

    DensityGrid grid;
    grid.params = table.params();
    grid.trunc = table.trunc();
    grid.t = t;
    grid.table_id = table.id();
    grid.points.resize(xs.size());
    grid.xs = std::move(xs);

    PrecisionGuard guard(table.trunc().precision_bits);
    if (threads <= 1 || grid.xs.size() < 2) {
        for (std::size_t i = 0; i < grid.xs.size(); ++i)
            grid.points[i] = eval_density(table, grid.xs[i], t);
        return grid;
    }

    const unsigned worker_count = std::min<unsigned>(threads, static_cast<unsigned>(grid.xs.size()));
    const unsigned bits = table.trunc().precision_bits;
    std::vector<std::thread> workers;
    workers.reserve(worker_count);
    for (unsigned w = 0; w < worker_count; ++w) {
        workers.emplace_back([&, w] {
            Real::default_precision(digits_for_bits(bits));
            for (std::size_t i = w; i < grid.xs.size(); i += worker_count)
                grid.points[i] = eval_density(table, grid.xs[i], t);
        });
    }
    for (auto& th : workers) th.join();
    return grid;
}

/// j-th diagonal sub-series phi_j(x, 1/t) = sum_{n>=j} a_{n(2n-2j+2)} x^{2n-2j+2} y^{n+1/2},
/// truncated at n = N. Defined for the even-band structure only (eta = 0).
inline Real phi_term(const CoefficientTable& table, int j, double x, double t) {
    if (table.params().eta != 0.0)
        throw std::domain_error("phi_term requires an eta = 0 table");
    if (j < 1) throw std::invalid_argument("phi_term requires j >= 1");
    if (!(t > 0.0)) throw std::invalid_argument("phi_term requires t > 0");
    PrecisionGuard guard(table.trunc().precision_bits);

    const Real xr(x);
    const Real x2 = xr * xr;
    const Real y = 1 / Real(t);

    // n = j term has x^2 y^{j+1/2}; each step multiplies by x^2 y.
    Real xm = x2;
    Real ypow = pow_ui(y, static_cast<unsigned long>(j)) * sqrt(y);
    CompensatedSum acc;
    for (int n = j; n <= table.rows(); ++n) {
        const Real& coeff = table.a(n, 2 * n - 2 * j + 2);
        if (!coeff.is_zero()) acc.add(coeff * xm * ypow);
        xm *= x2;
        ypow *= y;
    }
    return acc.value();
}

/// Smallest N in an N-ascending family from which every successive pair of
/// evaluations at (x, t) differs by less than rel_tol in relative terms.
/// Returns nullopt when the last pair still moves.
inline std::optional<int> convergence_in_n(const std::vector<CoefficientTable>& family, double x,
                                           double t, const Real& rel_tol) {
    if (family.size() < 2)
        throw std::invalid_argument("convergence_in_n needs at least two tables");
    for (std::size_t i = 1; i < family.size(); ++i)
        if (family[i - 1].rows() >= family[i].rows())
            throw std::invalid_argument("family must be strictly increasing in N");

    std::vector<Real> values;
    values.reserve(family.size());
    for (const auto& table : family) values.push_back(eval_density(table, x, t).value);

    PrecisionGuard guard(family.front().trunc().precision_bits);
    std::size_t first_stable = 0;
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        const Real diff = abs(values[i + 1] - values[i]);
        if (diff >= rel_tol * abs(values[i + 1])) first_stable = i + 1;
    }
    if (first_stable + 1 >= values.size()) return std::nullopt;
    return family[first_stable].rows();
}

/// Uniform grid of `points` (odd) spanning +-span_sd sigma sqrt(t), built
/// mirror-exact so that xs[i] == -xs[points-1-i] holds bitwise.
inline std::vector<double> symmetric_grid(const ModelParams& params, double t, double span_sd,
                                          int points) {
    if (points < 3 || points % 2 == 0)
        throw std::invalid_argument("symmetric_grid requires an odd point count >= 3");
    if (!(t > 0.0)) throw std::invalid_argument("symmetric_grid requires t > 0");
    const double sd = params.sigma * std::sqrt(t);
    const int mid = (points - 1) / 2;
    std::vector<double> xs(static_cast<std::size_t>(points), 0.0);
    for (int k = 1; k <= mid; ++k) {
        const double v = span_sd * sd * k / mid;
        xs[static_cast<std::size_t>(mid + k)] = v;
        xs[static_cast<std::size_t>(mid - k)] = -v;
    }
    return xs;
}

/// CSV schema: "x,density,max_monomial,final_over_max".
inline void write_grid_csv(std::ostream& os, const DensityGrid& grid, int digits = 30) {
    os << "x,density,max_monomial,final_over_max\n";
    char xbuf[40];
    for (const auto& p : grid.points) {
        std::snprintf(xbuf, sizeof(xbuf), "%.17g", p.x);
        os << xbuf << ',' << to_decimal(p.value, digits) << ',' << to_decimal(p.max_monomial, digits)
           << ',' << to_decimal(p.final_over_max, digits) << '\n';
    }
}

}  // namespace asymfp
