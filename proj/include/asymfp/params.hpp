#pragma once

// Market parameters and truncation settings shared by every module.

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>

#include "asymfp/real.hpp"

namespace asymfp {

// Raised when a requested computation is outside the regime where its result
// is meaningful (e.g. comparing a smooth density against a nearly-atomic law).
class regime_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Raised when a grid does not span the range an integral or lookup needs.
class coverage_error : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Market model: volatility sigma (per sqrt time unit), bid-offer spread
/// width epsilon (price units, also the lattice jump size), and buyer/seller
/// imbalance eta in [-1, 1]. eta > 0 means sellers outweigh buyers.
struct ModelParams {
    double sigma = 0.1;
    double epsilon = 0.005;
    double eta = 0.0;

    void validate() const {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("sigma must be positive and finite");
        if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
            throw std::invalid_argument("epsilon must be non-negative and finite");
        if (!(eta >= -1.0 && eta <= 1.0))
            throw std::invalid_argument("eta must lie in [-1, 1]");
    }

    Real sigma_r() const { return Real(sigma); }
    Real epsilon_r() const { return Real(epsilon); }
    Real eta_r() const { return Real(eta); }
};

/// Truncation settings: N caps the power-series row index, K the number of
/// derivative families kept in the equation, precision_bits the mantissa
/// width of all coefficient arithmetic.
struct Truncation {
    int N = 100;
    int K = 4;
    unsigned precision_bits = 256;

    void validate() const {
        if (K < 1) throw std::invalid_argument("K must be >= 1");
        if (N < K) throw std::invalid_argument("N must be >= K");
        if (precision_bits < 64) throw std::invalid_argument("precision_bits must be >= 64");
    }
};

inline std::string describe(const ModelParams& p, const Truncation& tr) {
    std::ostringstream os;
    os << "sigma=" << p.sigma << ",epsilon=" << p.epsilon << ",eta=" << p.eta << ",N=" << tr.N
       << ",K=" << tr.K << ",prec=" << tr.precision_bits;
    return os.str();
}

}  // namespace asymfp
