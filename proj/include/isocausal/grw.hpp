#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "isocausal/lorentz.hpp"
#include "isocausal/mapping.hpp"

namespace isocausal {

// G = rho dt^2 + Omega (x) dt + dt (x) Omega - h[t] on I x fiber.
struct TimeProductSpec {
    std::string time_coord = "t";
    Interval interval;
    ScalarExpr rho = ScalarExpr::constant(1.0);
    std::vector<ScalarExpr> omega;  // one per fiber coordinate; empty means zero
    std::vector<std::string> fiber_coords;
    std::vector<Interval> fiber_domain;
    std::vector<std::vector<ScalarExpr>> h;  // fiber metric, expressions in (t, x)

    int fiber_dim() const { return static_cast<int>(fiber_coords.size()); }
    bool separable() const;  // Omega identically zero
    Chart chart() const;
    MetricField metric() const;  // oriented along d/dt
};

// G = dt^2 - f(t)^2 h on (a, b) x fiber.
struct GRWSpec {
    std::string time_coord = "t";
    Interval interval;
    ScalarExpr f;
    bool compact_fiber = false;
    std::string fiber = "S1";
    double diameter = 0.0;  // round fiber diameter; 0 means the unit sphere (diameter pi)
};

struct QuadratureConfig {
    double rel_tol = 1e-13;        // per shell
    int growth_shells = 20;        // consecutive non-decaying shells that mean divergence
    double growth_floor = 1.0 - 1e-3;
    int decay_shells = 5;          // consecutive shells with ratio below decay_ratio
    double decay_ratio = 0.9;
    double tail_tol = 1e-13;       // relative size of the extrapolated tail to stop early
};

enum class EndKind { Finite, Infinite, Unknown };
const char* to_string(EndKind k);

struct EndIntegral {
    EndKind kind = EndKind::Unknown;
    double value = 0.0;  // partial sum plus tail when finite, +inf when infinite
    double error = 0.0;
    int shells = 0;
    std::string diagnostics;
};

// Integral of 1/f from c to `end` (either side) by dyadic shells.
EndIntegral end_integral(const std::function<double(double)>& inv_f, double c, double end,
                         const QuadratureConfig& q = {});

struct IntervalProfile {
    EndIntegral past;
    EndIntegral future;
    bool past_finite = false;
    bool future_finite = false;
    double L = kInf;
    double error = 0.0;
};

double default_anchor(const Interval& I);
IntervalProfile conformal_interval(const GRWSpec& spec, std::optional<double> c = std::nullopt,
                                   const QuadratureConfig& q = {});

enum class GRWType { EinsteinStatic, ExpNeg, ExpPos, FiniteBand };
struct GRWClass {
    GRWType type = GRWType::EinsteinStatic;
    double L = kInf;
    std::string to_string() const;
};
const char* type_name(GRWType t);
const char* roman(GRWType t);

GRWClass class_from_profile(const IntervalProfile& p);
GRWClass grw_classify(const GRWSpec& spec, const QuadratureConfig& q = {});

enum class Relation { Precedes, Follows, Equivalent, Incomparable };
const char* to_string(Relation r);

// Coverage rank of the cylinder (0, L) x S1: 0 neither, 1 closure only,
// 2 timelike curve covers. Empty when not computed.
using BandEvidence = std::function<std::optional<int>(double L)>;

struct OrderResult {
    Relation relation = Relation::Incomparable;
    bool strict = false;  // non-equivalence established
    std::string reason;
};

// Bands closer than this are the same parameter.
constexpr double kBandTolerance = 1e-6;

OrderResult grw_order(const GRWClass& a, const GRWClass& b, const BandEvidence& evidence = {});

// Conformally flat representative on (t, theta) for each type.
MetricField grw_representative(const GRWClass& c);

struct ConstructParams {
    std::optional<double> A;
    std::optional<double> B;
};
DiffeoSpec grw_mapping_construct(const GRWClass& from, const GRWClass& to, const ConstructParams& p = {});

struct SplitResult {
    double k = 0.0;
    double N = 0.0;
    double l = 0.0;
    bool extrapolated = false;  // an extreme sat in the far-field probes
    DiffeoSpec map;
    MappingVerdict verdict;
};

SplitResult split_mapping(const TimeProductSpec& s1, const TimeProductSpec& s2, const SampleGrid& grid);

struct ArrivalGrid {
    std::vector<int> counts;          // fiber nodes per axis
    std::vector<Interval> window;     // per axis; defaults to the fiber domain, else [-10, 10]
    std::vector<bool> periodic;       // per axis; defaults to false
    double max_lapse = 50.0;          // arrivals later than this are infinite
};

struct ArrivalField {
    std::vector<std::vector<double>> axes;  // fiber node coordinates
    std::vector<double> t_plus;             // future arrival lapse per node
    std::vector<double> t_minus;            // past arrival lapse per node
    std::size_t base_node = 0;
    double base_time = 0.0;
    double spacing = 0.0;  // largest node spacing
    double max_lapse = 0.0;

    std::size_t nodes() const { return t_plus.size(); }
    std::size_t node_index(const std::vector<int>& idx) const;
    std::size_t nearest(const Vec& x) const;
    Vec node(std::size_t i) const;
};

// Shortest arrival times from (t0, x0) to every fiber node.
ArrivalField arrival_time(const TimeProductSpec& spec, double t0, const Vec& x0, const ArrivalGrid& grid);

struct HorizonReport {
    bool no_past_horizon = false;
    bool no_future_horizon = false;
    std::size_t samples = 0;
    std::string window;
};

HorizonReport horizon_check(const TimeProductSpec& spec, const Vec& x0, const ArrivalGrid& grid,
                            const std::vector<double>& times);

struct ObstructionReport {
    std::string related;  // "no", "isocausal" or "unknown"
    bool first_not_below_second = false;  // G1 is not causally below G2
    bool second_not_below_first = false;
    std::string reason;
    IntervalProfile p1, p2;
};

ObstructionReport grw_obstruction(const GRWSpec& g1, const GRWSpec& g2, const QuadratureConfig& q = {});

struct ProbeReport {
    double L_minus = 0.0;  // raised warping, shorter band
    double L_zero = 0.0;
    double L_plus = 0.0;   // lowered warping, longer band
    double error = 0.0;
    GRWClass c_minus, c_zero, c_plus;
    OrderResult minus_zero, zero_plus, minus_plus;
    std::string f_minus, f_plus;
};

ProbeReport desitter_instability_probe(double amplitude, double width, const BandEvidence& evidence = {},
                                       const QuadratureConfig& q = {});

}  // namespace isocausal
