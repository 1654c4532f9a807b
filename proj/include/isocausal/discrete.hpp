#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "isocausal/lorentz.hpp"

namespace isocausal {

// Node coordinates along one axis; uniform spacing.
struct GridAxis {
    std::vector<double> x;
    double h = 0.0;
    bool periodic = false;

    static GridAxis inclusive(double lo, double hi, int n);  // endpoints included
    static GridAxis centered(double lo, double hi, int n);   // lo + (k + 1/2) h
    static GridAxis periodic_circle(int n);                  // k 2pi/n on [0, 2pi)
    int size() const { return static_cast<int>(x.size()); }
};

enum class EdgeKind { Timelike, Null, Spacelike, Past };
const char* to_string(EdgeKind k);

// Lattice steps within Chebyshev radius 2 with coprime components.
constexpr int kOffsetCount = 16;
extern const std::array<std::array<int, 2>, kOffsetCount> kOffsets;

class CausalGrid {
public:
    CausalGrid() = default;
    // Axis 1 may be periodic (cylinder). Throws DomainError on a degenerate
    // cone at a live node.
    CausalGrid(const MetricField& m, GridAxis a0, GridAxis a1);

    std::size_t size() const { return live_.size(); }
    int n0() const { return axes_[0].size(); }
    int n1() const { return axes_[1].size(); }
    const GridAxis& axis(int i) const { return axes_[i]; }
    bool cylinder() const { return axes_[1].periodic; }

    std::size_t index(int i, int j) const;
    int row(std::size_t k) const { return static_cast<int>(k / static_cast<std::size_t>(n1())); }
    int col(std::size_t k) const { return static_cast<int>(k % static_cast<std::size_t>(n1())); }
    Vec point(std::size_t k) const;
    std::size_t nearest(double x0, double x1) const;
    // Neighbour by lattice step, or nothing off the grid (wraps on a cylinder).
    std::optional<std::size_t> step(std::size_t k, int d0, int d1) const;

    bool live(std::size_t k) const { return live_[k] != 0; }
    std::size_t live_count() const;
    // Angles of the two future null directions, atan2(dx1, dx0).
    const std::array<double, 2>& cone(std::size_t k) const { return cone_[k]; }
    // Future-directed classification of a lattice step at node k.
    EdgeKind classify(std::size_t k, int d0, int d1) const;
    // Bit o set when kOffsets[o] is a causal (timelike) future edge from k.
    std::uint16_t causal_edges(std::size_t k) const { return causal_[k]; }
    std::uint16_t timelike_edges(std::size_t k) const { return timelike_[k]; }
    const MetricField& metric() const { return metric_; }

    std::string csv() const;

private:
    MetricField metric_;
    std::array<GridAxis, 2> axes_;
    std::vector<std::uint8_t> live_;
    std::vector<std::array<double, 2>> cone_;
    std::vector<Mat> g_;  // per node, empty when dead
    std::vector<Vec> o_;
    std::vector<std::uint16_t> causal_;
    std::vector<std::uint16_t> timelike_;
};

class NodeSet {
public:
    NodeSet() = default;
    explicit NodeSet(std::size_t n) : bits_((n + 63) / 64, 0), n_(n) {}
    std::size_t size() const { return n_; }
    bool test(std::size_t k) const { return (bits_[k >> 6] >> (k & 63)) & 1u; }
    void set(std::size_t k) { bits_[k >> 6] |= std::uint64_t{1} << (k & 63); }
    std::size_t count() const;
    NodeSet& operator|=(const NodeSet& o);
    NodeSet& operator&=(const NodeSet& o);
    bool subset_of(const NodeSet& o) const;
    std::vector<std::size_t> members() const;

private:
    std::vector<std::uint64_t> bits_;
    std::size_t n_ = 0;
};

enum class ReachKind { Chronological, Causal };  // I or J
enum class Direction { Future, Past };

struct ReachSet {
    NodeSet nodes;
    std::vector<std::size_t> generators;
    ReachKind kind = ReachKind::Causal;
    Direction dir = Direction::Future;
};

// J uses closed-cone edges and contains the generators; I needs at least one
// timelike edge on the path.
ReachSet reach(const CausalGrid& g, const std::vector<std::size_t>& from, ReachKind kind, Direction dir);
ReachSet future_set(const CausalGrid& g, std::size_t node, ReachKind kind);
ReachSet past_set(const CausalGrid& g, std::size_t node, ReachKind kind);

// All nodes within `cells` lattice steps (Chebyshev) of the set, restricted to live nodes.
NodeSet dilate(const CausalGrid& g, const NodeSet& s, int cells);
NodeSet live_set(const CausalGrid& g);

struct PolyCurve {
    std::vector<std::size_t> nodes;
    std::vector<EdgeKind> segments;
    // Every segment causal and every chord spanning `window` nodes timelike.
    bool timelike(const CausalGrid& g, int window = 8) const;
    bool causal() const;
    bool null() const;
};

PolyCurve make_curve(const CausalGrid& g, const std::vector<std::size_t>& nodes);
// Walks from `start` taking at each node the causal step closest to the future
// null direction whose axis-1 component has sign `sense` (+1 or -1), until
// the grid or the live region ends or no step lies within 0.25 rad of it.
PolyCurve null_curve(const CausalGrid& g, std::size_t start, int sense);

struct ImprisonmentReport {
    bool imprisoned = false;
    double band_lo = 0.0;  // widest forward reach in axis-0 coordinate
    double band_hi = 0.0;
    double band = 0.0;
    double terminal_band = 0.0;  // widest band of a strongly connected set of nodes closed under the future
    std::size_t probed = 0;
    std::string reason;
};

// Probes nodes in the middle third of axis 0: imprisoned when no forward
// reach set touches the first or last row.
ImprisonmentReport imprisonment_probe(const CausalGrid& g);

struct ChainResult {
    bool achievable = false;
    std::vector<PolyCurve> curves;
    std::size_t candidates = 0;
    std::string reason;
};

// Searches j zig-zag null curves, each with V = I+(c) u c u I-(c), and each
// in the common chronological past of the next.
ChainResult chain_obstruction(const CausalGrid& g, int j);

struct HypersurfaceReport {
    bool acausal = false;
    bool achronal = false;
    bool covers = false;
    std::size_t uncovered = 0;
};

HypersurfaceReport hypersurface_tests(const CausalGrid& g, const PolyCurve& S);
// No causal curve joins two distinct members.
bool causally_disjoint(const CausalGrid& g, const std::vector<PolyCurve>& sets);

struct CoverageReport {
    bool covers_J = false;
    bool covers_closure_J = false;  // within one cell
    std::size_t uncovered = 0;
};

CoverageReport coverage_criterion(const CausalGrid& g, const PolyCurve& curve);

struct ClosednessReport {
    bool jplus_closed = false;
    bool jminus_closed = false;
    bool jplus_is_closure_of_iplus = false;  // J+(p) within one cell of I+(p)
    bool jminus_is_closure_of_iminus = false;
    double jplus_jump = 0.0;  // cells of generator deviation not explained by smooth spreading
    double jminus_jump = 0.0;
};

// The boundary of J(p) is swept by the null generators from p, traced through
// the metric's cones; deleted sets are resolved to the nearest node. Starts
// displaced by 1/8 and 3/4 of a cell in eight directions are traced too. The
// relation is closed at p when, in every direction, the coarse deviation from
// the generators of p stays within two cells of twice the linear
// extrapolation of the fine one. Points within seven cells of a deleted node
// (eight times the coarse shift, plus one) are ignored, since their limits may
// lie outside the spacetime.
ClosednessReport closedness_probe(const CausalGrid& g, std::size_t p);

// Fixtures.
struct Fixture {
    std::string name;
    MetricField metric;
    CausalGrid grid;
    std::vector<PolyCurve> hypersurfaces;  // the fixture's distinguished S, if any
};

// Bridges phi: [0,1] -> [0,1], smooth, non-increasing, phi(0) = 1, phi(1) = 0.
enum class Bridge { BumpIntegral, Smoothstep };
double bridge(Bridge b, double s);
double counterexample_f(double u, double v, Bridge b = Bridge::BumpIntegral);

// Names: minkowski2, rect:L, cyl:L, stairway:m, excoj, exnotim,
// counterexample32 (also counterexample32:eta), ex42:quadrant, ex42:slits:m.
// `scale` multiplies the default resolution.
Fixture make_fixture(const std::string& name, double scale = 1.0, Bridge b = Bridge::BumpIntegral);

// Coverage rank of C_L = (0, L) x S1 on an n-node circle: 2 when a timelike
// helix covers J, 1 when a null geodesic covers the closure only, 0 otherwise.
struct CylinderRank {
    int rank = 0;
    std::optional<double> helix_slope;  // covering helix
    CoverageReport geodesic;
};
CylinderRank cylinder_rank(double L, int circle_nodes = 512);

}  // namespace isocausal
