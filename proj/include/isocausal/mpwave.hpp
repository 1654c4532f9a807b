#pragma once

#include <string>
#include <vector>

#include "isocausal/lorentz.hpp"
#include "isocausal/mapping.hpp"

namespace isocausal {

// G = 2 du dv - h[u] + H(x, u) du^2 on coordinates (u, v, x1..xm).
struct MpWaveSpec {
    std::vector<std::string> fiber_coords;
    std::vector<Interval> fiber_domain;       // defaults to the whole line
    ScalarExpr H;                             // in (u, x)
    std::vector<std::vector<ScalarExpr>> h;   // m x m, in (u, x)

    int fiber_dim() const { return static_cast<int>(fiber_coords.size()); }
    Chart chart() const;
    // oriented along d/du + (1 + |H|) d/dv
    MetricField metric() const;
};

// G = 2 du dv + A_ij(u) x^i x^j du^2 - h_ij dx^i dx^j with constant h.
struct PlaneWaveSpec {
    std::vector<std::vector<ScalarExpr>> A;  // frequency matrix, in u
    Mat h;                                   // positive definite; empty means identity
    bool locally_symmetric = false;          // A constant

    int fiber_dim() const { return static_cast<int>(A.size()); }
    void validate() const;
    Mat fiber_metric() const;
    Mat frequency(double u) const;
    MpWaveSpec as_mpwave() const;
};

// Sample count per axis that keeps an n-dimensional grid near 50k points.
SampleGrid mp_default_grid(const Chart& chart);

struct MpResult {
    bool certified = false;  // a feasible ratio was found
    double r = 0.0;          // k2 / k1
    double k1 = 0.0;
    double k2 = 0.0;
    double a = 0.0;
    bool extrapolated = false;
    DiffeoSpec map;
    MappingVerdict verdict;
    std::string reason;
};

MpResult mp_causal_check(const MpWaveSpec& s1, const MpWaveSpec& s2, const SampleGrid& grid);

// Default u samples: cell-centred in atan(u) over the whole line.
std::vector<double> default_u_grid(int count = 401);

struct FrequencyProfile {
    std::vector<double> u;
    std::vector<Signature> signature;
    std::vector<double> abs_max;  // largest |eigenvalue| of A(u) relative to h
    std::vector<double> abs_min;  // smallest |eigenvalue|
    bool constant_signature = true;
    int definiteness = 0;         // +1 positive, -1 negative, 0 otherwise
    double max_sup = 0.0;         // sup_u abs_max
    double min_inf = 0.0;         // inf_u abs_min
    double self_ratio = 0.0;      // max_sup / min_inf
};

FrequencyProfile planewave_profile(const PlaneWaveSpec& spec, const std::vector<double>& u);

struct PolVerdict {
    bool isocausal = false;
    double ratio12 = 0.0;            // sup_u abs_max1(u) / abs_min2(u)
    double ratio21 = 0.0;
    double ratio12_decoupled = 0.0;  // sup abs_max1 / inf abs_min2 over independent u
    double ratio21_decoupled = 0.0;
    MpResult forward;
    MpResult backward;
    std::string reason;
};

PolVerdict pol_check(const PlaneWaveSpec& s1, const PlaneWaveSpec& s2, const std::vector<double>& u);

struct WeylReport {
    Mat components;  // C_{u i u j}
    bool flat = false;
    double lambda = 0.0;  // trace / (n - 2)
};

WeylReport weyl_flatness(const Mat& Q, int n);

enum class BoundaryKind { NullLine1A, SandwichPlanes1B, MarolfRossLine, Unknown };
const char* to_string(BoundaryKind k);

struct BoundaryReport {
    BoundaryKind kind = BoundaryKind::Unknown;
    bool conformally_flat = false;
    Signature signature;
    Mat canonical_Q;  // Q in coordinates where h is the identity
    std::string chain;
};

BoundaryReport boundary_report(const PlaneWaveSpec& spec);

}  // namespace isocausal
