#pragma once

// Series-coefficient engine.
//
// The density ansatz is
//
//     p(x,t) = a00/sqrt(t) + sum_{n>=1} sum_m a_{nm} x^m / t^{n+1/2}
//
// and inserting it into the governing equation couples consecutive rows:
//
//     (1/2 - n) a_{(n-1)m} =  sigma^2       sum_{l>=1} C(m+2l,  2l)   eps^{2l-2} a_{n(m+2l)}
//                           - sigma^2 eta   sum_{l>=2} C(m+2l-1,2l-1) eps^{2l-3} a_{n(m+2l-1)}
//
// Rows are solved in increasing n; within a row, m descends from 2n-2 with
// unit step and each equation determines the single unknown a_{n(m+2)}.
// The full builder imposes every equation (m down to 0). The K-truncated
// builder caps both l-sums at l <= K and imposes the equations with
// m >= 2(n-K), which pins the band support m in [2(n-K+1), 2n] of the
// truncated ansatz; entries below the band are zero.

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "asymfp/params.hpp"
#include "asymfp/real.hpp"

namespace asymfp {

/// a00 pinned so the eps = 0 series is the unit-mass centered Gaussian
/// density with variance sigma^2 t:  a00 = 1 / (sigma sqrt(2 pi)).
inline Real normalization_constant(const ModelParams& params) {
    params.validate();
    return 1 / (params.sigma_r() * sqrt(2 * boost::math::constants::pi<Real>()));
}

class CoefficientTable {
  public:
    static CoefficientTable build_full(const ModelParams& params, const Truncation& trunc,
                                       std::optional<Real> a00 = std::nullopt) {
        return build_impl(params, trunc, /*full=*/true, std::move(a00));
    }

    static CoefficientTable build_truncated(const ModelParams& params, const Truncation& trunc,
                                            std::optional<Real> a00 = std::nullopt) {
        return build_impl(params, trunc, /*full=*/false, std::move(a00));
    }

    const ModelParams& params() const { return params_; }
    const Truncation& trunc() const { return trunc_; }
    bool is_full() const { return full_; }
    int rows() const { return trunc_.N; }
    const Real& a00() const { return a00_; }

    /// Coefficient a_{nm}; zero outside the stored rows or the row range.
    const Real& a(int n, int m) const {
        static const Real zero{0};
        if (n == 0) return m == 0 ? a00_ : zero;
        if (n < 1 || n > trunc_.N || m < 0 || m > 2 * n) return zero;
        return rows_[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(m)];
    }

    /// Lowest index of the coefficient band in row n (2(n-K+1) clipped at 0).
    int band_low(int n) const {
        if (full_) return 0;
        return std::max(0, 2 * (n - trunc_.K + 1));
    }

    /// Lowest m whose recurrence equation the builder imposed for row n.
    int equation_low(int n) const {
        if (full_) return 0;
        return std::max(0, 2 * (n - trunc_.K));
    }

    Real max_abs_in_row(int n) const {
        Real m{0};
        for (const Real& v : rows_[static_cast<std::size_t>(n - 1)])
            if (abs(v) > m) m = abs(v);
        return m;
    }

    std::string id() const {
        return describe(params_, trunc_) + (full_ ? ",form=full" : ",form=truncated");
    }

    nlohmann::json to_json() const {
        PrecisionGuard guard(trunc_.precision_bits);
        const int digits = roundtrip_digits(trunc_.precision_bits);
        nlohmann::json entries = nlohmann::json::array();
        for (int n = 1; n <= trunc_.N; ++n)
            for (int m = 0; m <= 2 * n; ++m)
                entries.push_back({n, m, to_decimal(a(n, m), digits)});
        return nlohmann::json{
            {"params",
             {{"sigma", params_.sigma}, {"epsilon", params_.epsilon}, {"eta", params_.eta}}},
            {"trunc",
             {{"N", trunc_.N}, {"K", trunc_.K}, {"precision_bits", trunc_.precision_bits}}},
            {"form", full_ ? "full" : "truncated"},
            {"a00", to_decimal(a00_, digits)},
            {"entries", std::move(entries)}};
    }

    static CoefficientTable from_json(const nlohmann::json& doc) {
        ModelParams params{doc.at("params").at("sigma").get<double>(),
                           doc.at("params").at("epsilon").get<double>(),
                           doc.at("params").at("eta").get<double>()};
        Truncation trunc{doc.at("trunc").at("N").get<int>(), doc.at("trunc").at("K").get<int>(),
                         doc.at("trunc").at("precision_bits").get<unsigned>()};
        params.validate();
        trunc.validate();
        PrecisionGuard guard(trunc.precision_bits);
        CoefficientTable table(params, trunc, doc.at("form").get<std::string>() == "full");
        table.a00_ = Real(doc.at("a00").get<std::string>());
        table.rows_.assign(static_cast<std::size_t>(trunc.N), {});
        for (int n = 1; n <= trunc.N; ++n)
            table.rows_[static_cast<std::size_t>(n - 1)].assign(
                static_cast<std::size_t>(2 * n + 1), Real(0));
        for (const auto& e : doc.at("entries")) {
            const int n = e.at(0).get<int>();
            const int m = e.at(1).get<int>();
            if (n < 1 || n > trunc.N || m < 0 || m > 2 * n)
                throw std::invalid_argument("coefficient entry outside table range");
            table.rows_[static_cast<std::size_t>(n - 1)][static_cast<std::size_t>(m)] =
                Real(e.at(2).get<std::string>());
        }
        return table;
    }

    /// Assemble a table from raw rows (deserialization and test probes).
    static CoefficientTable from_parts(const ModelParams& params, const Truncation& trunc,
                                       bool full, Real a00, std::vector<std::vector<Real>> rows) {
        CoefficientTable table(params, trunc, full);
        table.a00_ = std::move(a00);
        table.rows_ = std::move(rows);
        if (table.rows_.size() != static_cast<std::size_t>(trunc.N))
            throw std::invalid_argument("row count does not match N");
        return table;
    }

    const std::vector<std::vector<Real>>& raw_rows() const { return rows_; }

  private:
    CoefficientTable(const ModelParams& params, const Truncation& trunc, bool full)
        : params_(params), trunc_(trunc), full_(full) {}

    static CoefficientTable build_impl(const ModelParams& params, const Truncation& trunc,
                                       bool full, std::optional<Real> a00) {
        params.validate();
        trunc.validate();
        PrecisionGuard guard(trunc.precision_bits);

        CoefficientTable table(params, trunc, full);
        table.a00_ = a00 ? *a00 : normalization_constant(params);

        const Real sigma2 = params.sigma_r() * params.sigma_r();
        const Real eta = params.eta_r();
        const bool has_eta = params.eta != 0.0;

        // eps^p for p = 0 .. 2N (eps^0 == 1 even when eps == 0).
        std::vector<Real> eps_pow(static_cast<std::size_t>(2 * trunc.N + 1));
        eps_pow[0] = 1;
        for (std::size_t p = 1; p < eps_pow.size(); ++p)
            eps_pow[p] = eps_pow[p - 1] * params.epsilon_r();

        table.rows_.assign(static_cast<std::size_t>(trunc.N), {});
        for (int n = 1; n <= trunc.N; ++n) {
            auto& row = table.rows_[static_cast<std::size_t>(n - 1)];
            row.assign(static_cast<std::size_t>(2 * n + 1), Real(0));
            const Real half_minus_n = Real(1) / 2 - n;
            const int cap = full ? n : trunc.K;

            for (int m = 2 * n - 2; m >= table.equation_low(n); --m) {
                // Known part of the even family, l = 2 .. min(floor((2n-m)/2), K).
                Real even_sum{0};
                {
                    const int l_max = std::min((2 * n - m) / 2, cap);
                    BigInt binom = BigInt(m + 1) * (m + 2) * (m + 3) * (m + 4) / 24;  // C(m+4,4)
                    for (int l = 2; l <= l_max; ++l) {
                        const Real& coeff = table.a(n, m + 2 * l);
                        if (!coeff.is_zero())
                            even_sum +=
                                Real(binom) * eps_pow[static_cast<std::size_t>(2 * l - 2)] * coeff;
                        binom *= BigInt(m + 2 * l + 1) * (m + 2 * l + 2);
                        binom /= BigInt(2 * l + 1) * (2 * l + 2);
                    }
                }
                // Known part of the skew family, l = 2 .. min(floor((2n+1-m)/2), K).
                Real odd_sum{0};
                if (has_eta) {
                    const int l_max = std::min((2 * n + 1 - m) / 2, cap);
                    BigInt binom = BigInt(m + 1) * (m + 2) * (m + 3) / 6;  // C(m+3,3)
                    for (int l = 2; l <= l_max; ++l) {
                        const Real& coeff = table.a(n, m + 2 * l - 1);
                        if (!coeff.is_zero())
                            odd_sum +=
                                Real(binom) * eps_pow[static_cast<std::size_t>(2 * l - 3)] * coeff;
                        binom *= BigInt(m + 2 * l) * (m + 2 * l + 1);
                        binom /= BigInt(2 * l) * (2 * l + 1);
                    }
                }
                const BigInt lead_binom = BigInt(m + 1) * (m + 2) / 2;  // C(m+2,2)
                const Real lead(lead_binom);
                Real rhs = half_minus_n * table.a(n - 1, m) / sigma2 - even_sum;
                if (has_eta) rhs += eta * odd_sum;
                row[static_cast<std::size_t>(m + 2)] = rhs / lead;
            }
        }
        return table;
    }

    ModelParams params_;
    Truncation trunc_;
    bool full_ = true;
    Real a00_;
    std::vector<std::vector<Real>> rows_;
};

/// Re-evaluates every recurrence equation the builder imposed (band equations
/// for truncated tables, all of them for full tables, structurally-zero rows
/// included) and returns the largest |lhs - rhs| normalized by the largest
/// |a_{nm}| in the row.
inline Real residual_check(const CoefficientTable& table) {
    const ModelParams& params = table.params();
    const Truncation& trunc = table.trunc();
    PrecisionGuard guard(trunc.precision_bits);

    const Real sigma2 = params.sigma_r() * params.sigma_r();
    const Real eta = params.eta_r();
    const bool has_eta = params.eta != 0.0;

    std::vector<Real> eps_pow(static_cast<std::size_t>(2 * trunc.N + 1));
    eps_pow[0] = 1;
    for (std::size_t p = 1; p < eps_pow.size(); ++p)
        eps_pow[p] = eps_pow[p - 1] * params.epsilon_r();

    Real worst{0};
    for (int n = 1; n <= trunc.N; ++n) {
        const Real scale = table.max_abs_in_row(n);
        const int cap = table.is_full() ? n : trunc.K;
        for (int m = 2 * n - 2; m >= table.equation_low(n); --m) {
            Real even_sum{0};
            {
                const int l_max = std::min((2 * n - m) / 2, cap);
                BigInt binom = BigInt(m + 1) * (m + 2) / 2;  // C(m+2,2)
                for (int l = 1; l <= l_max; ++l) {
                    even_sum +=
                        Real(binom) * eps_pow[static_cast<std::size_t>(2 * l - 2)] * table.a(n, m + 2 * l);
                    binom *= BigInt(m + 2 * l + 1) * (m + 2 * l + 2);
                    binom /= BigInt(2 * l + 1) * (2 * l + 2);
                }
            }
            Real odd_sum{0};
            if (has_eta) {
                const int l_max = std::min((2 * n + 1 - m) / 2, cap);
                BigInt binom = BigInt(m + 1) * (m + 2) * (m + 3) / 6;  // C(m+3,3)
                for (int l = 2; l <= l_max; ++l) {
                    odd_sum += Real(binom) * eps_pow[static_cast<std::size_t>(2 * l - 3)] *
                               table.a(n, m + 2 * l - 1);
                    binom *= BigInt(m + 2 * l) * (m + 2 * l + 1);
                    binom /= BigInt(2 * l) * (2 * l + 1);
                }
            }
            Real residual = (Real(1) / 2 - n) * table.a(n - 1, m) - sigma2 * even_sum;
            if (has_eta) residual += sigma2 * eta * odd_sum;
            residual = abs(residual) / scale;
            if (residual > worst) worst = residual;
        }
    }
    return worst;
}

}  // namespace asymfp
