#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isocausal/lorentz.hpp"

namespace isocausal {

enum class DPClass { Future, Past, NotCausal };
enum class Segre { Diagonalizable, NullEigenvector, None };

const char* to_string(DPClass c);
const char* to_string(Segre s);

// Margins closer to zero than this are reported as boundary cases.
constexpr double kBoundaryBand = 1e-6;

struct DPReport {
    DPClass classification = DPClass::NotCausal;
    Segre segre = Segre::None;
    std::vector<double> eigenvalues;  // real parts of the spectrum of g^-1 T
    double lambda0 = 0.0;             // timelike eigenvalue, or the null eigenvalue mu
    std::vector<double> spatial;      // eigenvalues on the spacelike complement
    double lambda = 0.0;              // coefficient of k (x) k in the null case
    double margin = 0.0;              // smallest slack in the defining inequalities
    bool boundary = false;
    bool complex_spectrum = false;
    std::vector<Vec> canonical_null;  // future null eigenvectors annihilating T
    bool all_null_canonical = false;  // T proportional to g
    std::optional<Vec> witness;       // future causal vector u with T(u, .) failing
    std::optional<Vec> witness2;      // partner of the witness when a pair is needed
};

// T-hat with T(u, v) = g(u, T-hat v).
Mat endomorphism(const SymMatrix& g, const SymMatrix& T);

// Dominant-property classification (T(u,v) >= 0 on future causal pairs).
DPReport classify_dp(const SymMatrix& g, const SymMatrix& T, const Vec& orientation, double tol = 1e-9);

// Weak-energy variant: lambda0 >= lambda_i without absolute values.
DPReport classify_weak(const SymMatrix& g, const SymMatrix& T, const Vec& orientation, double tol = 1e-9);

struct OracleResult {
    double min_value = 0.0;      // min of T(k1, k2) over sampled future null pairs
    double diagonal_min = 0.0;   // min of T(k, k), the null energy check alone
    Vec k1;
    Vec k2;
};

// Independent Monte-Carlo check: samples future null vectors of unit Euclidean
// length and minimizes T over all pairs, then polishes the best pair locally.
OracleResult null_oracle(const SymMatrix& g, const SymMatrix& T, const Vec& orientation, int samples,
                         std::uint64_t seed);

struct CanonicalNull {
    std::vector<Vec> directions;
    bool all = false;
};
CanonicalNull canonical_null_directions(const SymMatrix& g, const SymMatrix& T, const Vec& orientation,
                                        double tol = 1e-9);

struct StabilityConstant {
    double A0 = 0.0;
    double L1 = 0.0;
    double L2 = 0.0;
    bool verified = false;  // A0 * Omega + T classified Future (DP)
};

StabilityConstant stability_constant(const SymMatrix& g, const SymMatrix& Omega, const SymMatrix& T,
                                     const Vec& orientation, int samples, std::uint64_t seed);

}  // namespace isocausal
