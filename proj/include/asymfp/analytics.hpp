#pragma once

// Tail probabilities, moments, and reproduction of the published reference
// tables (monomial diagnostics, tail percentiles, cutoff coefficients).

#include <array>
#include <cmath>
#include <cstdio>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymfp/error_control.hpp"
#include "asymfp/params.hpp"
#include "asymfp/real.hpp"
#include "asymfp/series.hpp"

namespace asymfp {

enum class TailSide { left, right };

struct TailQuery {
    double q = 3.0;  // standard-deviation multiple, must be > 0
    TailSide side = TailSide::left;
};

namespace detail {

// Composite Simpson over grid indices [i0, i1]; an odd interval count is
// finished with the 3/8 rule on the last three intervals.
inline Real simpson(const std::vector<double>& xs, const std::vector<DensityPoint>& pts,
                    std::size_t i0, std::size_t i1) {
    if (i1 <= i0) throw std::invalid_argument("empty integration range");
    const Real h = (Real(xs[i1]) - Real(xs[i0])) / Real(static_cast<long>(i1 - i0));
    std::size_t n = i1 - i0;  // interval count
    std::size_t simpson_end = i1;
    Real tail{0};
    if (n == 1) {
        return h / 2 * (pts[i0].value + pts[i1].value);
    }
    if (n % 2 != 0) {
        if (n < 3) throw std::invalid_argument("integration range too small");
        simpson_end = i1 - 3;
        tail = 3 * h / 8 *
               (pts[simpson_end].value + 3 * pts[simpson_end + 1].value +
                3 * pts[simpson_end + 2].value + pts[i1].value);
    }
    Real acc{0};
    if (simpson_end > i0) {
        acc = pts[i0].value + pts[simpson_end].value;
        for (std::size_t i = i0 + 1; i < simpson_end; ++i)
            acc += ((i - i0) % 2 == 1 ? 4 : 2) * pts[i].value;
        acc *= h / 3;
    }
    return acc + tail;
}

inline Real simpson_weighted(const std::vector<double>& xs, const std::vector<Real>& vals,
                             std::size_t i0, std::size_t i1) {
    const Real h = (Real(xs[i1]) - Real(xs[i0])) / Real(static_cast<long>(i1 - i0));
    std::size_t n = i1 - i0;
    std::size_t simpson_end = i1;
    Real tail{0};
    if (n == 1) return h / 2 * (vals[i0] + vals[i1]);
    if (n % 2 != 0) {
        simpson_end = i1 - 3;
        tail = 3 * h / 8 *
               (vals[simpson_end] + 3 * vals[simpson_end + 1] + 3 * vals[simpson_end + 2] +
                vals[i1]);
    }
    Real acc{0};
    if (simpson_end > i0) {
        acc = vals[i0] + vals[simpson_end];
        for (std::size_t i = i0 + 1; i < simpson_end; ++i)
            acc += ((i - i0) % 2 == 1 ? 4 : 2) * vals[i];
        acc *= h / 3;
    }
    return acc + tail;
}

inline std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), format, v);
    return buf;
}

}  // namespace detail

/// Simpson integral of the density from the domain edge to -q sigma sqrt(t)
/// (left) or from +q sigma sqrt(t) to the edge (right). Negative density
/// values integrate as-is. The bound snaps to the nearest grid point.
inline Real tail_probability(const DensityGrid& grid, const TailQuery& query) {
    if (!(query.q > 0.0)) throw std::invalid_argument("tail query requires q > 0");
    if (grid.xs.size() < 5) throw coverage_error("grid too small for tail integration");
    PrecisionGuard guard(grid.trunc.precision_bits);

    const double sd = grid.params.sigma * std::sqrt(grid.t);
    const double x_lim = (query.side == TailSide::left ? -query.q : query.q) * sd;
    if (x_lim < grid.xs.front() || x_lim > grid.xs.back())
        throw coverage_error("grid does not span the tail integration limit");

    const double h = (grid.xs.back() - grid.xs.front()) / static_cast<double>(grid.xs.size() - 1);
    const auto idx = static_cast<std::size_t>(std::llround((x_lim - grid.xs.front()) / h));
    if (query.side == TailSide::left) {
        if (idx < 2) throw coverage_error("tail integration range too small");
        return detail::simpson(grid.xs, grid.points, 0, idx);
    }
    if (idx + 2 >= grid.xs.size()) throw coverage_error("tail integration range too small");
    return detail::simpson(grid.xs, grid.points, idx, grid.xs.size() - 1);
}

/// Standard normal tail P(Z < -q) = erfc(q / sqrt(2)) / 2.
inline Real gaussian_tail(double q) {
    return erfc(Real(q) / sqrt(Real(2))) / 2;
}

/// Centered Gaussian density with variance sigma^2 t.
inline Real gaussian_density(const ModelParams& params, double t, double x) {
    const Real s2 = params.sigma_r() * params.sigma_r() * Real(t);
    return exp(-Real(x) * Real(x) / (2 * s2)) / sqrt(2 * boost::math::constants::pi<Real>() * s2);
}

/// Trapezoid mass of the grid (normalization-defect diagnostic).
inline Real trapezoid_mass(const DensityGrid& grid) {
    PrecisionGuard guard(grid.trunc.precision_bits);
    Real acc{0};
    for (std::size_t i = 0; i + 1 < grid.xs.size(); ++i)
        acc += (Real(grid.xs[i + 1]) - Real(grid.xs[i])) / 2 *
               (grid.points[i].value + grid.points[i + 1].value);
    return acc;
}

struct ClosedFormMoments {
    Real mu2;
    Real mu3;
    Real mu4;
};

/// Central moments as printed in the reference study:
/// mu2 = sigma^2 t, mu3 = sigma^2 t eps eta, mu4 = 3 (sigma^2 t)^2 + sigma^2 t eps.
inline ClosedFormMoments printed_moments(const ModelParams& params, double t) {
    params.validate();
    const Real s2t = params.sigma_r() * params.sigma_r() * Real(t);
    return {s2t, s2t * params.epsilon_r() * params.eta_r(),
            3 * s2t * s2t + s2t * params.epsilon_r()};
}

/// Central moments implied by the exact symbol's cumulants:
/// mu4 = 3 kappa2^2 + kappa4 with kappa4 = sigma^2 eps^2 t (eps power differs
/// from the printed closed form; both are carried side by side).
inline ClosedFormMoments symbol_moments(const ModelParams& params, double t) {
    params.validate();
    const Real s2t = params.sigma_r() * params.sigma_r() * Real(t);
    return {s2t, s2t * params.epsilon_r() * params.eta_r(),
            3 * s2t * s2t + s2t * params.epsilon_r() * params.epsilon_r()};
}

struct MomentReport {
    Real mass;  // integral of the density over the grid
    Real mu1;
    Real mu2;
    Real mu3;
    Real mu4;
    Real kurtosis_ratio;  // mu4 / (3 mu2^2)
    ClosedFormMoments ref;     // printed closed forms
    ClosedFormMoments symbol;  // symbol-derived closed forms
    std::string mu4_note;
};

/// Central moments of the evaluated density by Simpson integration, with the
/// two closed-form fourth-moment conventions reported side by side.
inline MomentReport empirical_moments(const DensityGrid& grid) {
    const double sd = grid.params.sigma * std::sqrt(grid.t);
    if (grid.xs.size() < 9 || grid.xs.front() > -6.0 * sd || grid.xs.back() < 6.0 * sd)
        throw coverage_error("moment grid must span at least 6 standard deviations");
    PrecisionGuard guard(grid.trunc.precision_bits);

    const std::size_t last = grid.xs.size() - 1;
    MomentReport report;
    report.mass = detail::simpson(grid.xs, grid.points, 0, last);

    std::vector<Real> weighted(grid.xs.size());
    for (std::size_t i = 0; i <= last; ++i) weighted[i] = Real(grid.xs[i]) * grid.points[i].value;
    const Real mean = detail::simpson_weighted(grid.xs, weighted, 0, last) / report.mass;
    report.mu1 = mean;

    const auto central = [&](int power) {
        for (std::size_t i = 0; i <= last; ++i) {
            Real d = Real(grid.xs[i]) - mean;
            Real w = d;
            for (int p = 1; p < power; ++p) w *= d;
            weighted[i] = w * grid.points[i].value;
        }
        return detail::simpson_weighted(grid.xs, weighted, 0, last) / report.mass;
    };
    report.mu2 = central(2);
    report.mu3 = central(3);
    report.mu4 = central(4);
    report.kurtosis_ratio = report.mu4 / (3 * report.mu2 * report.mu2);
    report.ref = printed_moments(grid.params, grid.t);
    report.symbol = symbol_moments(grid.params, grid.t);
    report.mu4_note =
        "printed mu4 excess term is sigma^2*t*eps; the symbol-derived fourth cumulant gives "
        "sigma^2*eps^2*t. Both are reported; they are not reconciled here.";
    return report;
}

inline nlohmann::json to_json(const MomentReport& report, int digits = 20) {
    return nlohmann::json{{"mass", to_decimal(report.mass, digits)},
                          {"mu1", to_decimal(report.mu1, digits)},
                          {"mu2", to_decimal(report.mu2, digits)},
                          {"mu3", to_decimal(report.mu3, digits)},
                          {"mu4", to_decimal(report.mu4, digits)},
                          {"kurtosis_ratio", to_decimal(report.kurtosis_ratio, digits)},
                          {"ref_mu2", to_decimal(report.ref.mu2, digits)},
                          {"ref_mu3", to_decimal(report.ref.mu3, digits)},
                          {"ref_mu4", to_decimal(report.ref.mu4, digits)},
                          {"symbol_mu2", to_decimal(report.symbol.mu2, digits)},
                          {"symbol_mu3", to_decimal(report.symbol.mu3, digits)},
                          {"symbol_mu4", to_decimal(report.symbol.mu4, digits)},
                          {"mu4_note", report.mu4_note}};
}

// ---------------------------------------------------------------------------
// Published reference values (monomial diagnostics, tail percentiles, cutoff
// coefficients) and their reproduction documents.

namespace reference {

struct MonomialRow {
    int k;
    double max_monomial;
    double final_over_max;
};
inline constexpr MonomialRow kTable1[] = {
    {1, 9.72e+7, 2.46e-15},  {2, 3.54e+9, 2.18e-15},  {3, 8.87e+10, 1.10e-15},
    {4, 2.00e+12, -1.37e-16}, {5, 4.19e+13, 5.49e-16}, {6, 8.31e+14, 3.71e-16},
    {7, 1.70e+16, 2.66e-16}};

struct TailRow {
    double q;  // standard-deviation multiple, left tail
    double t;
    double gaussian_percent;
    double series_percent;  // K = 4 column
};
inline constexpr TailRow kTable2[] = {{3.0, 0.004, 0.1374, 0.2758},
                                      {4.0, 0.004, 0.0030, 0.0240},
                                      {3.0, 0.08, 0.1417, 0.1577},
                                      {4.0, 0.08, 0.0031, 0.0042}};

struct CutoffRow {
    int k;
    double epsilon;
    double c1;
    double c2;
    double min_t;
};
inline constexpr CutoffRow kTable3[] = {
    {1, 0.005, 0.0006, -0.0365, 0.0125}, {2, 0.005, 0.0017, -0.1163, 0.0333},
    {3, 0.005, 0.0028, -0.2100, 0.0562}, {4, 0.005, 0.0040, -0.3086, 0.08},
    {5, 0.005, 0.0052, -0.4093, 0.1042}, {1, 0.002, 0.0001, -0.0058, 0.0020},
    {2, 0.002, 0.0003, -0.0186, 0.0053}, {3, 0.002, 0.0005, -0.0336, 0.0090},
    {4, 0.002, 0.0006, -0.0494, 0.0128}, {5, 0.002, 0.0010, -0.0655, 0.0167}};

}  // namespace reference

struct TableDocument {
    std::string csv;
    nlohmann::json summary;
};

/// Monomial-size diagnostics at x = 6 sigma sqrt(t), t = 0.004, for K = 1..7.
inline TableDocument reproduce_table1(const ModelParams& params, int n_rows = 100,
                                      unsigned precision_bits = 256, double t = 0.004) {
    std::ostringstream csv;
    csv << "K,max_monomial,final_over_max,ref_max_monomial,ref_final_over_max,rel_dev\n";
    const double x = 6.0 * params.sigma * std::sqrt(t);
    double max_dev = 0.0;
    for (const auto& row : reference::kTable1) {
        Truncation trunc{n_rows, row.k, precision_bits};
        const auto table = CoefficientTable::build_truncated(params, trunc);
        const DensityPoint point = eval_density(table, x, t);
        PrecisionGuard guard(precision_bits);
        const double dev = static_cast<double>(
            abs(point.max_monomial - Real(row.max_monomial)) / Real(row.max_monomial));
        max_dev = std::max(max_dev, dev);
        csv << row.k << ',' << to_decimal(point.max_monomial, 7) << ','
            << to_decimal(point.final_over_max, 7) << ',' << detail::fmt("%.2e", row.max_monomial)
            << ',' << detail::fmt("%.2e", row.final_over_max) << ',' << detail::fmt("%.4e", dev)
            << '\n';
    }
    return {csv.str(),
            nlohmann::json{{"table", "table1"},
                           {"rows", static_cast<int>(std::size(reference::kTable1))},
                           {"max_rel_deviation_vs_paper", max_dev}}};
}

/// Left-tail percentiles (percent) at -3 and -4 standard deviations for the
/// 1-day and 1-month horizons, Gaussian reference vs the K = 4 series.
/// Integration spans 7 standard deviations: past ~7 the truncated series
/// breaks down at both horizons, and the true mass omitted there (~1e-10 %)
/// is far below every tolerance in play.
inline TableDocument reproduce_table2(const ModelParams& params, int n_rows = 100, int k_order = 4,
                                      unsigned precision_bits = 256, int grid_points = 2001,
                                      double grid_span_sd = 7.0, unsigned threads = 1) {
    std::ostringstream csv;
    csv << "tail_sd,epsilon,sigma,t,gaussian,series_K,ref_gaussian,ref_series,rel_dev_series\n";
    Truncation trunc{n_rows, k_order, precision_bits};
    const auto table = CoefficientTable::build_truncated(params, trunc);

    double max_dev = 0.0;
    double current_t = -1.0;
    DensityGrid grid;
    for (const auto& row : reference::kTable2) {
        if (row.t != current_t) {
            grid = eval_grid(table, symmetric_grid(params, row.t, grid_span_sd, grid_points),
                             row.t, threads);
            current_t = row.t;
        }
        const Real series = tail_probability(grid, TailQuery{row.q, TailSide::left}) * 100;
        const Real gauss = gaussian_tail(row.q) * 100;
        PrecisionGuard guard(precision_bits);
        const double dev_series =
            static_cast<double>(abs(series - Real(row.series_percent)) / Real(row.series_percent));
        const double dev_gauss = static_cast<double>(
            abs(gauss - Real(row.gaussian_percent)) / Real(row.gaussian_percent));
        max_dev = std::max({max_dev, dev_series, dev_gauss});
        csv << "-" << row.q << ',' << params.epsilon << ',' << params.sigma << ',' << row.t << ','
            << to_decimal(gauss, 7) << ',' << to_decimal(series, 7) << ','
            << detail::fmt("%.4f", row.gaussian_percent) << ','
            << detail::fmt("%.4f", row.series_percent) << ',' << detail::fmt("%.4e", dev_series)
            << '\n';
    }
    return {csv.str(),
            nlohmann::json{{"table", "table2"},
                           {"rows", static_cast<int>(std::size(reference::kTable2))},
                           {"max_rel_deviation_vs_paper", max_dev}}};
}

/// Cutoff coefficients and minimum horizons for K = 1..5 at the given spread,
/// values rounded to 4 decimal places to match the reference presentation.
inline TableDocument reproduce_table3(const ModelParams& params, double tolerance = 0.05,
                                      unsigned precision_bits = 256) {
    std::ostringstream csv;
    csv << "K,epsilon,c1,c2,min_t,ref_c1,ref_c2,ref_min_t,rel_dev\n";
    Truncation trunc{12, 1, precision_bits};
    const auto table = CoefficientTable::build_full(params, trunc);

    double max_dev = 0.0;
    int rows = 0;
    for (int k = 1; k <= 5; ++k) {
        const RatioEstimate est = ratio_coefficients(table, k + 1);
        const Real tmin = min_time(est, 0.0, tolerance);
        PrecisionGuard guard(precision_bits);

        const reference::CutoffRow* ref = nullptr;
        for (const auto& row : reference::kTable3)
            if (row.k == k && std::abs(row.epsilon - params.epsilon) < 1e-12) ref = &row;

        csv << k << ',' << params.epsilon << ',' << detail::fmt("%.4f", static_cast<double>(est.c1))
            << ',' << detail::fmt("%.4f", static_cast<double>(est.c2)) << ','
            << detail::fmt("%.4f", static_cast<double>(tmin));
        if (ref != nullptr) {
            const double dev = std::max(
                {std::abs(static_cast<double>(est.c1) - ref->c1) / std::abs(ref->c1),
                 std::abs(static_cast<double>(est.c2) - ref->c2) / std::abs(ref->c2),
                 std::abs(static_cast<double>(tmin) - ref->min_t) / std::abs(ref->min_t)});
            max_dev = std::max(max_dev, dev);
            csv << ',' << detail::fmt("%.4f", ref->c1) << ',' << detail::fmt("%.4f", ref->c2) << ','
                << detail::fmt("%.4f", ref->min_t) << ',' << detail::fmt("%.4e", dev);
        } else {
            csv << ",,,,";
        }
        csv << '\n';
        ++rows;
    }
    return {csv.str(), nlohmann::json{{"table", "table3"},
                                      {"rows", rows},
                                      {"max_rel_deviation_vs_paper", max_dev}}};
}

}  // namespace asymfp
