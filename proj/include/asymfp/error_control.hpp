#pragma once

// Truncation-error control for the asymptotic series.
//
// The ratio of consecutive diagonal sub-series obeys, for small y = 1/t,
//
//     phi_j(x,y) / phi_{j-1}(x,y)  ~  c1 y + c2 x^2 y^2 + O(y^3)
//     c1 = a_{j2} / a_{(j-1)2}
//     c2 = (a_{(j+1)4} - c1 a_{j4}) / a_{(j-1)2}
//
// Requiring |c1 y + c2 x^2 y^2| < tol yields the largest usable y, i.e. the
// minimum horizon t_min below which the K-term series should not be trusted.
// The estimates are always taken from a full-recurrence table: c2 reads
// a_{(j+1)4}, which a K = j truncated table zeroes out.

#include <algorithm>
#include <stdexcept>
#include <utility>
#include <vector>

#include "asymfp/coefficients.hpp"
#include "asymfp/params.hpp"
#include "asymfp/real.hpp"
#include "asymfp/series.hpp"

namespace asymfp {

struct RatioEstimate {
    int j = 0;  // phi_j / phi_{j-1}
    Real c1;
    Real c2;
};

inline RatioEstimate ratio_coefficients(const CoefficientTable& table, int j) {
    if (j < 2) throw std::invalid_argument("ratio_coefficients requires j >= 2");
    if (!table.is_full())
        throw std::invalid_argument("ratio_coefficients requires a full-recurrence table");
    if (table.rows() < j + 1)
        throw std::invalid_argument("ratio_coefficients needs table rows up to n = j + 1");
    PrecisionGuard guard(table.trunc().precision_bits);

    const Real& denom = table.a(j - 1, 2);
    if (denom.is_zero())
        throw std::domain_error("ratio_coefficients: a_{(j-1)2} = 0 (degenerate table)");

    RatioEstimate est;
    est.j = j;
    est.c1 = table.a(j, 2) / denom;
    est.c2 = (table.a(j + 1, 4) - est.c1 * table.a(j, 4)) / denom;
    return est;
}

/// Minimum horizon t_min = 1/y_max where y_max is the largest y with
/// |c1 y + c2 x^2 y^2| < tolerance on all of (0, y]; the first crossing of
/// either +tolerance or -tolerance bounds it. Returns 0 when c1 = c2 x^2 = 0
/// (no constraint: every horizon is usable). At x = 0 this reduces to
/// t_min = |c1| / tolerance.
inline Real min_time(const RatioEstimate& est, double x, double tolerance) {
    if (!(tolerance > 0.0 && tolerance < 1.0))
        throw std::invalid_argument("tolerance must lie in (0, 1)");

    const Real tol(tolerance);
    const Real a = est.c1;
    const Real b = est.c2 * Real(x) * Real(x);

    if (b.is_zero()) {
        if (a.is_zero()) return Real(0);
        return abs(a) / tol;  // t_min = 1 / (tol / |c1|)
    }

    Real y_first{0};
    bool found = false;
    const auto consider = [&](const Real& root) {
        if (root > 0 && (!found || root < y_first)) {
            y_first = root;
            found = true;
        }
    };
    // Roots of b y^2 + a y -/+ tol = 0 for the two crossing levels.
    for (int sign = -1; sign <= 1; sign += 2) {
        const Real c = sign * tol;
        const Real disc = a * a - 4 * b * c;
        if (disc < 0) continue;
        const Real sq = sqrt(disc);
        consider((-a + sq) / (2 * b));
        consider((-a - sq) / (2 * b));
    }
    if (!found) return Real(0);  // |c1 y + c2 x^2 y^2| never reaches tolerance
    return 1 / y_first;
}

/// Largest K <= k_max such that min_time is <= t for every ratio index
/// j = 2 .. K+1; 0 when even the K = 1 successor ratio violates tolerance.
inline int max_safe_k(const CoefficientTable& full_table, double t, double x, double tolerance,
                      int k_max) {
    if (!(t > 0.0)) throw std::invalid_argument("max_safe_k requires t > 0");
    if (k_max < 1) throw std::invalid_argument("max_safe_k requires k_max >= 1");
    if (full_table.rows() < k_max + 2)
        throw std::invalid_argument("max_safe_k needs table rows up to n = k_max + 2");
    PrecisionGuard guard(full_table.trunc().precision_bits);

    const Real tr(t);
    int safe = 0;
    for (int j = 2; j <= k_max + 1; ++j) {
        if (min_time(ratio_coefficients(full_table, j), x, tolerance) > tr) break;
        safe = j - 1;
    }
    return safe;
}

/// phi_j(x, 1/t) / phi_{j-1}(x, 1/t) for direct comparison against the
/// quadratic model. Zero numerator short-circuits to 0 (e.g. eps = 0 tables).
inline Real empirical_term_ratio(const CoefficientTable& table, int j, double x, double t) {
    if (j < 2) throw std::invalid_argument("empirical_term_ratio requires j >= 2");
    PrecisionGuard guard(table.trunc().precision_bits);
    const Real num = phi_term(table, j, x, t);
    if (num.is_zero()) return Real(0);
    const Real den = phi_term(table, j - 1, x, t);
    if (den.is_zero())
        throw std::domain_error("empirical_term_ratio: phi_{j-1}(x, 1/t) = 0");
    return num / den;
}

/// Mid-tail grid |x| in [3, 5] standard deviations (both signs), the region
/// used for divergence reporting.
inline std::vector<double> midtail_grid(const ModelParams& params, double t, int points_per_side) {
    if (points_per_side < 2) throw std::invalid_argument("need at least 2 points per side");
    const double sd = params.sigma * std::sqrt(t);
    std::vector<double> xs;
    xs.reserve(2 * static_cast<std::size_t>(points_per_side));
    const double step = 2.0 * sd / (points_per_side - 1);
    for (int i = 0; i < points_per_side; ++i) xs.push_back(-5.0 * sd + i * step);
    for (int i = 0; i < points_per_side; ++i) xs.push_back(3.0 * sd + i * step);
    return xs;
}

/// d_K = sup over xs of |p_{K+1} - p_K| for consecutive members of a family
/// of tables with increasing K; returned as (K, d_K) pairs.
inline std::vector<std::pair<int, Real>> divergence_scan(
    const std::vector<CoefficientTable>& family, const std::vector<double>& xs, double t) {
    if (family.size() < 2) throw std::invalid_argument("divergence_scan needs >= 2 tables");
    for (std::size_t i = 1; i < family.size(); ++i)
        if (family[i - 1].trunc().K >= family[i].trunc().K)
            throw std::invalid_argument("family must be strictly increasing in K");

    std::vector<std::vector<Real>> values(family.size());
    for (std::size_t i = 0; i < family.size(); ++i) {
        values[i].reserve(xs.size());
        for (double x : xs) values[i].push_back(eval_density(family[i], x, t).value);
    }

    PrecisionGuard guard(family.front().trunc().precision_bits);
    std::vector<std::pair<int, Real>> result;
    result.reserve(family.size() - 1);
    for (std::size_t i = 0; i + 1 < family.size(); ++i) {
        Real sup{0};
        for (std::size_t p = 0; p < xs.size(); ++p) {
            const Real d = abs(values[i + 1][p] - values[i][p]);
            if (d > sup) sup = d;
        }
        result.emplace_back(family[i].trunc().K, sup);
    }
    return result;
}

}  // namespace asymfp
