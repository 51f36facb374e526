#pragma once

// Arbitrary-precision real arithmetic used throughout the library.
//
// All series coefficients and evaluations run on MPFR binary floats via
// Boost.Multiprecision with a runtime-selectable mantissa width. Expression
// templates are disabled so that compensated summation sees concrete values.

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ios>
#include <string>
#include <vector>

namespace asymfp {

using Real = boost::multiprecision::number<boost::multiprecision::mpfr_float_backend<0>,
                                           boost::multiprecision::et_off>;
using BigInt = boost::multiprecision::mpz_int;

/// Decimal digits needed so the MPFR mantissa holds at least `bits` bits.
inline unsigned digits_for_bits(unsigned bits) {
    return static_cast<unsigned>(bits * 0.3010299956639812) + 2;
}

/// Decimal digits that round-trip a `bits`-bit mantissa through a string.
inline int roundtrip_digits(unsigned bits) {
    return static_cast<int>(bits * 0.3010299956639812) + 3;
}

// Scoped working precision. Boost's default precision for the MPFR backend is
// process-global (1.74), so one precision is active at a time; every public
// operation installs a guard for the precision of the table it works on.
class PrecisionGuard {
  public:
    explicit PrecisionGuard(unsigned bits) : previous_(Real::default_precision()) {
        Real::default_precision(digits_for_bits(bits));
    }
    PrecisionGuard(const PrecisionGuard&) = delete;
    PrecisionGuard& operator=(const PrecisionGuard&) = delete;
    ~PrecisionGuard() { Real::default_precision(previous_); }

  private:
    unsigned previous_;
};

// Neumaier-compensated accumulator. The truncated series cancels ~30 decimal
// digits at tail points, so row contributions are added smallest-first through
// this instead of a bare running sum.
class CompensatedSum {
  public:
    void add(const Real& v) {
        const Real t = sum_ + v;
        if (abs(sum_) >= abs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    Real value() const { return sum_ + comp_; }

  private:
    Real sum_{0};
    Real comp_{0};
};

/// Sums `terms` in ascending order of magnitude with compensation.
inline Real stable_sum(std::vector<Real> terms) {
    std::sort(terms.begin(), terms.end(),
              [](const Real& a, const Real& b) { return abs(a) < abs(b); });
    CompensatedSum acc;
    for (const Real& t : terms) acc.add(t);
    return acc.value();
}

/// Scientific-notation decimal string with `digits` significant digits.
inline std::string to_decimal(const Real& v, int digits) {
    return v.str(digits, std::ios_base::scientific);
}

/// x^n for integer n >= 0 by binary exponentiation.
inline Real pow_ui(const Real& x, unsigned long n) {
    Real result(1);
    Real base = x;
    while (n != 0) {
        if (n & 1UL) result *= base;
        base *= base;
        n >>= 1UL;
    }
    return result;
}

}  // namespace asymfp
