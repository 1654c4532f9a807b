#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "isocausal/causal.hpp"
#include "isocausal/lorentz.hpp"

namespace isocausal {

// Anything that maps points and has a Jacobian.
class PointMap {
public:
    virtual ~PointMap() = default;
    virtual int dim() const = 0;
    virtual Vec apply(const Vec& p) const = 0;
    virtual Mat jacobian(const Vec& p) const = 0;
};

class DiffeoSpec : public PointMap {
public:
    DiffeoSpec() = default;
    // Components are expressions in `coords`; without Jacobian expressions
    // the Jacobian is taken by central differences.
    DiffeoSpec(std::vector<std::string> coords, std::vector<ScalarExpr> components,
               std::optional<std::vector<std::vector<ScalarExpr>>> jacobian = std::nullopt);
    static DiffeoSpec identity(std::vector<std::string> coords);

    int dim() const override { return static_cast<int>(coords_.size()); }
    Vec apply(const Vec& p) const override;
    Mat jacobian(const Vec& p) const override;

    // (this o inner): substitutes inner's components for this map's coordinates.
    DiffeoSpec compose(const DiffeoSpec& inner) const;

    const std::vector<std::string>& coords() const { return coords_; }
    const std::vector<ScalarExpr>& components() const { return comp_expr_; }

private:
    std::vector<std::string> coords_;
    std::vector<ScalarExpr> comp_expr_;
    std::vector<CompiledExpr> comp_;
    std::vector<CompiledExpr> jac_;  // row-major, empty when using differences
};

// Inverse of a map by Newton iteration started at the target point.
class NumericalInverse : public PointMap {
public:
    explicit NumericalInverse(const PointMap& f) : f_(f) {}
    int dim() const override { return f_.dim(); }
    Vec apply(const Vec& q) const override;
    Mat jacobian(const Vec& q) const override;

private:
    const PointMap& f_;
};

// Sample points over a chart. Bounded axes are cell-centred on
// [lo, hi]; unbounded axes are cell-centred in s on (atan lo, atan hi) with
// x = tan s.
class SampleGrid {
public:
    SampleGrid(const Chart& chart, std::vector<int> counts);
    SampleGrid(const Chart& chart, int per_axis = 41);

    std::size_t size() const { return total_; }
    Vec point(std::size_t index) const;
    const std::vector<double>& axis(int i) const { return axes_[i]; }
    bool compactified(int i) const { return compact_[i]; }

private:
    std::vector<std::vector<double>> axes_;
    std::vector<bool> compact_;
    std::size_t total_ = 1;
};

// Axis samples of `grid` plus far-field probes (end * 10^k, k = 1..8) on
// compactified axes; probes start at index `first_probe`.
std::vector<double> probe_axis(const SampleGrid& grid, int i, const Interval& dom, std::size_t& first_probe);

SymMatrix pullback_metric(const PointMap& phi, const MetricField& g2, const Vec& p);

enum class MapOutcome { Causal, Anticausal, NotCausal, Inconclusive };
const char* to_string(MapOutcome o);

struct MappingVerdict {
    MapOutcome outcome = MapOutcome::Inconclusive;
    std::size_t samples = 0;
    std::size_t skipped = 0;  // masked grid points
    double min_margin = 0.0;
    std::size_t boundary_points = 0;
    std::optional<Vec> witness_point;
    std::optional<Vec> witness_vector;
    bool witness_verified = false;
    std::string reason;
};

MappingVerdict check_causal_mapping(const MetricField& g1, const MetricField& g2, const PointMap& phi,
                                    const SampleGrid& grid);

struct ConformalReport {
    bool conformal = false;
    double lambda_min = 0.0;
    double lambda_max = 0.0;
    std::vector<double> lambda;  // one per sampled (unmasked) point
    double worst_residual = 0.0;
};

ConformalReport check_conformal(const MetricField& g1, const MetricField& g2, const PointMap& phi,
                                const SampleGrid& grid, double rtol = 1e-8);

struct ConeBracket {
    double theta_minus = 0.0;
    double theta_plus = 0.0;
    bool extrapolated = false;  // far-field probes moved an extreme
    // flat metrics with cones of half-angle theta_minus / theta_plus about d/dt
    MetricField eta_minus;
    MetricField eta_plus;
};

struct StabilityReport {
    ConeBracket bracket;
    bool isocausal = false;
    std::string verdict;
    MappingVerdict lower;  // identity: eta_minus -> g
    MappingVerdict upper;  // identity: g -> eta_plus
};

StabilityReport minkowski_stability(const MetricField& g, const SampleGrid& grid);

// dt^2 - sum dx^2 / c^2 over the chart of `like`, oriented along d/dt.
MetricField flat_cone_metric(const Chart& like, double speed);

}  // namespace isocausal
