#pragma once

// Exact solution of the full (untruncated) equation, used as an independent
// oracle for the series.
//
// Fourier-transforming the equation term by term (characteristic-function
// convention, d/dx -> -i omega) sums in closed form to
//
//     psi(omega) = (sigma^2/eps^2) (cos(eps omega) - 1)
//                - i (sigma^2 eta/eps^2) (eps omega - sin(eps omega))
//
// which is the exponent of a compound-Poisson jump process on the eps-lattice
// with a deterministic drift:
//
//     lambda_plus  = sigma^2 (1 + eta) / (2 eps^2)      (up-jumps of +eps)
//     lambda_minus = sigma^2 (1 - eta) / (2 eps^2)      (down-jumps of -eps)
//     drift        = -sigma^2 eta / eps
//
// The same assignment falls out of matching the jump generator to the adjoint
// of the spatial operator, and the skew sign is locked by a Monte Carlo of the
// jump process in the test suite. The exact time-t law is a Skellam
// distribution on the shifted lattice x_j = j eps + drift t, with cumulants
// kappa = (0, sigma^2 t, sigma^2 t eps eta, sigma^2 eps^2 t).

#include <array>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "asymfp/params.hpp"
#include "asymfp/real.hpp"
#include "asymfp/series.hpp"

namespace asymfp {

struct SymbolParams {
    Real lambda_plus;
    Real lambda_minus;
    Real drift;
    double epsilon = 0.0;

    static SymbolParams from_model(const ModelParams& params) {
        params.validate();
        if (!(params.epsilon > 0.0))
            throw std::invalid_argument("jump-rate decomposition requires epsilon > 0");
        PrecisionGuard guard(256);
        const Real sigma2 = params.sigma_r() * params.sigma_r();
        const Real eps2 = params.epsilon_r() * params.epsilon_r();
        SymbolParams sp;
        sp.lambda_plus = sigma2 * (1 + params.eta_r()) / (2 * eps2);
        sp.lambda_minus = sigma2 * (1 - params.eta_r()) / (2 * eps2);
        sp.drift = -sigma2 * params.eta_r() / params.epsilon_r();
        sp.epsilon = params.epsilon;
        return sp;
    }
};

struct SymbolValue {
    Real re;
    Real im;
};

/// Fourier symbol psi(omega): the transformed equation reads dp^/dt = psi p^.
/// For eps = 0 the Gaussian symbol -sigma^2 omega^2 / 2 is returned.
inline SymbolValue symbol(const ModelParams& params, const Real& omega) {
    params.validate();
    const Real sigma2 = params.sigma_r() * params.sigma_r();
    if (params.epsilon == 0.0) return {-sigma2 * omega * omega / 2, Real(0)};
    const Real eps = params.epsilon_r();
    const Real u = eps * omega;
    SymbolValue v;
    v.re = sigma2 / (eps * eps) * (cos(u) - 1);
    v.im = -sigma2 * params.eta_r() / (eps * eps) * (u - sin(u));
    return v;
}

namespace detail {

// m-th Taylor coefficient of psi at omega = 0 (real part for even m,
// imaginary for odd m) by a central finite-difference stencil. Runs at a
// fixed high internal precision so the ~700-bit stencil cancellation at
// m = 17 stays far above the noise floor.
inline Real symbol_taylor_coefficient(const ModelParams& params, int m) {
    PrecisionGuard guard(4096);
    const Real h = pow_ui(Real(1) / 2, 40);  // 2^-40
    const bool even = (m % 2) == 0;

    CompensatedSum stencil;
    BigInt binom = 1;  // C(m, i)
    for (int i = 0; i <= m; ++i) {
        const Real offset = Real(m) / 2 - i;
        const SymbolValue value = symbol(params, offset * h);
        const Real f = even ? value.re : value.im;
        Real weight(binom);  // full working precision, exact
        if (i % 2 != 0) weight = -weight;
        stencil.add(weight * f);
        binom *= BigInt(m - i);
        binom /= BigInt(i + 1);
    }
    BigInt fact = 1;
    for (int i = 2; i <= m; ++i) fact *= i;
    return stencil.value() / (pow_ui(h, static_cast<unsigned long>(m)) * Real(fact));
}

}  // namespace detail

/// Compares the first 2K+1 numerically-differentiated Taylor coefficients of
/// the closed-form symbol against the equation's derivative coefficients
/// under the (-i omega)^m substitution; returns the largest relative mismatch.
inline Real symbol_taylor_check(const ModelParams& params, int k_order) {
    params.validate();
    if (!(params.epsilon > 0.0))
        throw std::invalid_argument("symbol_taylor_check requires epsilon > 0");
    if (k_order < 1) throw std::invalid_argument("symbol_taylor_check requires K >= 1");

    PrecisionGuard guard(4096);
    const Real sigma2 = params.sigma_r() * params.sigma_r();
    const Real eps = params.epsilon_r();
    const Real eta = params.eta_r();

    Real worst{0};
    for (int m = 1; m <= 2 * k_order + 1; ++m) {
        const Real numeric = detail::symbol_taylor_coefficient(params, m);
        BigInt fact = 1;
        for (int i = 2; i <= m; ++i) fact *= i;
        // Family scale sigma^2 eps^{m-2} / m! used to normalize zero targets.
        const Real scale = sigma2 * pow_ui(eps, static_cast<unsigned long>(m)) /
                           (eps * eps * Real(fact));
        Real expected{0};
        if (m % 2 == 0) {
            const int k = m / 2;
            expected = (k % 2 == 0 ? scale : -scale);
        } else if (m >= 3) {
            const int k = (m + 1) / 2;
            expected = eta * (k % 2 == 0 ? -scale : scale);
        }
        const Real denom = abs(expected) > scale ? abs(expected) : scale;
        const Real rel = abs(numeric - expected) / denom;
        if (rel > worst) worst = rel;
    }
    return worst;
}

struct LatticeDistribution {
    ModelParams params;
    double t = 0.0;
    unsigned precision_bits = 256;
    Real drift;
    long j_min = 0;
    std::vector<Real> masses;   // P(j), j = j_min .. j_min + size - 1
    std::vector<Real> support;  // x_j = j eps + drift t
    Real total_mass;
};

namespace detail {

// Skellam mass P(J = j) for Poisson rates u = lambda_plus t, v = lambda_minus t
// by direct double summation (without the exp(-(u+v)) prefactor).
inline Real skellam_sum(long j, Real u, Real v) {
    if (j < 0) {
        std::swap(u, v);
        j = -j;
    }
    BigInt fact = 1;
    for (long i = 2; i <= j; ++i) fact *= i;
    Real term = pow_ui(u, static_cast<unsigned long>(j)) / Real(fact);
    Real sum = term;
    const Real uv = u * v;
    const Real floor_factor = ldexp(Real(1), -static_cast<int>(Real::default_precision() * 4));
    for (long k = 0;; ++k) {
        const Real denom = Real(j + k + 1) * Real(k + 1);
        term *= uv / denom;
        sum += term;
        if (denom > uv && term < sum * floor_factor) break;
    }
    return sum;
}

}  // namespace detail

/// Exact law at time t: Skellam masses on the shifted lattice, window chosen
/// so the discarded mass stays below mass_tolerance.
inline LatticeDistribution lattice_pmf(const ModelParams& params, double t, double mass_tolerance,
                                       unsigned precision_bits = 256) {
    params.validate();
    if (!(params.epsilon > 0.0))
        throw std::invalid_argument("lattice_pmf requires epsilon > 0 (use the Gaussian closed "
                                    "form for eps = 0)");
    if (!(t > 0.0)) throw std::invalid_argument("lattice_pmf requires t > 0");
    if (!(mass_tolerance > 0.0 && mass_tolerance < 1.0))
        throw std::invalid_argument("mass_tolerance must lie in (0, 1)");

    PrecisionGuard guard(precision_bits);
    const SymbolParams sp = SymbolParams::from_model(params);
    const Real u = sp.lambda_plus * Real(t);
    const Real v = sp.lambda_minus * Real(t);
    const Real prefactor = exp(-(u + v));
    const Real cut = Real(mass_tolerance) / 1000;

    const long j_center = static_cast<long>(std::llround(static_cast<double>(u - v)));
    std::vector<Real> up{detail::skellam_sum(j_center, u, v) * prefactor};
    std::vector<Real> down;  // j < j_center
    Real total = up.front();

    // The Skellam pmf is unimodal: expand each side until its boundary mass
    // falls below the cut, then top up if the captured mass is still short.
    long hi = j_center, lo = j_center;
    const long hard_cap = 1000000;
    auto extend_up = [&] {
        ++hi;
        up.push_back(detail::skellam_sum(hi, u, v) * prefactor);
        total += up.back();
    };
    auto extend_down = [&] {
        --lo;
        down.push_back(detail::skellam_sum(lo, u, v) * prefactor);
        total += down.back();
    };
    while (hi - j_center < hard_cap && (up.back() >= cut || hi - j_center < 2)) extend_up();
    while (j_center - lo < hard_cap && (down.empty() || down.back() >= cut || j_center - lo < 2))
        extend_down();
    while (total < 1 - Real(mass_tolerance) / 2 && hi - lo < 2 * hard_cap) {
        if (up.back() > down.back())
            extend_up();
        else
            extend_down();
    }

    LatticeDistribution dist;
    dist.params = params;
    dist.t = t;
    dist.precision_bits = precision_bits;
    dist.drift = sp.drift;
    dist.j_min = lo;
    dist.masses.reserve(up.size() + down.size());
    for (auto it = down.rbegin(); it != down.rend(); ++it) dist.masses.push_back(*it);
    for (const auto& mass : up) dist.masses.push_back(mass);
    dist.support.reserve(dist.masses.size());
    const Real shift = sp.drift * Real(t);
    for (std::size_t i = 0; i < dist.masses.size(); ++i)
        dist.support.push_back(Real(lo + static_cast<long>(i)) * params.epsilon_r() + shift);
    dist.total_mass = total;
    return dist;
}

/// Analytic cumulants (kappa1..kappa4) of the exact law.
inline std::array<Real, 4> oracle_cumulants(const ModelParams& params, double t) {
    params.validate();
    if (!(t > 0.0)) throw std::invalid_argument("oracle_cumulants requires t > 0");
    PrecisionGuard guard(256);
    const Real sigma2t = params.sigma_r() * params.sigma_r() * Real(t);
    return {Real(0), sigma2t, sigma2t * params.epsilon_r() * params.eta_r(),
            sigma2t * params.epsilon_r() * params.epsilon_r()};
}

/// Cumulants (kappa1..kappa4) of a lattice law, computed from its masses.
inline std::array<Real, 4> lattice_cumulants(const LatticeDistribution& dist) {
    PrecisionGuard guard(dist.precision_bits);
    CompensatedSum mass_acc, mean_acc;
    for (std::size_t i = 0; i < dist.masses.size(); ++i) {
        mass_acc.add(dist.masses[i]);
        mean_acc.add(dist.masses[i] * dist.support[i]);
    }
    const Real mass = mass_acc.value();
    const Real mean = mean_acc.value() / mass;
    CompensatedSum m2, m3, m4;
    for (std::size_t i = 0; i < dist.masses.size(); ++i) {
        const Real d = dist.support[i] - mean;
        const Real d2 = d * d;
        m2.add(dist.masses[i] * d2);
        m3.add(dist.masses[i] * d2 * d);
        m4.add(dist.masses[i] * d2 * d2);
    }
    const Real mu2 = m2.value() / mass;
    const Real mu3 = m3.value() / mass;
    const Real mu4 = m4.value() / mass;
    return {mean, mu2, mu3, mu4 - 3 * mu2 * mu2};
}

struct OracleComparison {
    Real max_rel_error;
    Real mean_rel_error;
    int points = 0;
};

/// Compares lattice masses / eps against the series density (linear
/// interpolation on the grid) at lattice points with |x_j| <= bulk_sd sigma
/// sqrt(t). Requires the local-limit regime sigma^2 t / eps^2 >= 25.
inline OracleComparison compare_series_to_oracle(const DensityGrid& grid,
                                                 const LatticeDistribution& lattice,
                                                 double bulk_sd) {
    const ModelParams& params = grid.params;
    const double ratio = params.sigma * params.sigma * grid.t / (params.epsilon * params.epsilon);
    if (!(ratio >= 25.0)) {
        std::ostringstream os;
        os << "local-limit regime requires sigma^2*t/epsilon^2 >= 25, got " << ratio;
        throw regime_error(os.str());
    }
    if (std::abs(grid.t - lattice.t) > 1e-15 * std::max(1.0, grid.t))
        throw std::invalid_argument("grid and lattice horizons differ");
    if (grid.xs.size() < 2) throw coverage_error("series grid too small for interpolation");

    PrecisionGuard guard(grid.trunc.precision_bits);
    const double window = bulk_sd * params.sigma * std::sqrt(grid.t);
    const Real eps = params.epsilon_r();

    OracleComparison report;
    report.max_rel_error = Real(0);
    CompensatedSum rel_acc;
    for (std::size_t i = 0; i < lattice.support.size(); ++i) {
        const double x = static_cast<double>(lattice.support[i]);
        if (std::abs(x) > window) continue;
        if (x < grid.xs.front() || x > grid.xs.back())
            throw coverage_error("series grid does not span the comparison window");
        auto it = std::upper_bound(grid.xs.begin(), grid.xs.end(), x);
        std::size_t hi = std::min<std::size_t>(
            static_cast<std::size_t>(it - grid.xs.begin()), grid.xs.size() - 1);
        if (hi == 0) hi = 1;
        const std::size_t lo = hi - 1;
        const Real x0(grid.xs[lo]), x1(grid.xs[hi]);
        const Real w = (lattice.support[i] - x0) / (x1 - x0);
        const Real series_val = grid.points[lo].value * (1 - w) + grid.points[hi].value * w;
        const Real target = lattice.masses[i] / eps;
        const Real rel = abs(series_val - target) / target;
        if (rel > report.max_rel_error) report.max_rel_error = rel;
        rel_acc.add(rel);
        ++report.points;
    }
    if (report.points == 0) throw coverage_error("no lattice points inside the bulk window");
    report.mean_rel_error = rel_acc.value() / report.points;
    return report;
}

}  // namespace asymfp
