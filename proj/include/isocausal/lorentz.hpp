#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "isocausal/expr.hpp"

namespace isocausal {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

// Symmetric matrix. The constructor symmetrizes and rejects inputs whose
// antisymmetric part is not round-off.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(const Mat& m);
    static SymMatrix diag(std::initializer_list<double> d);

    int dim() const { return static_cast<int>(m_.rows()); }
    const Mat& mat() const { return m_; }
    double operator()(int i, int j) const { return m_(i, j); }
    double form(const Vec& a, const Vec& b) const { return a.dot(m_ * b); }
    double form(const Vec& a) const { return a.dot(m_ * a); }

    SymMatrix operator-() const;
    friend SymMatrix operator+(const SymMatrix& a, const SymMatrix& b);
    friend SymMatrix operator*(double s, const SymMatrix& a);

private:
    Mat m_;
};

struct Signature {
    int positives = 0;
    int negatives = 0;
    int zeros = 0;
    bool lorentzian() const { return positives == 1 && zeros == 0 && negatives >= 1; }
};

// tol <= 0 uses 1e-9 times the spectral radius.
Signature signature(const SymMatrix& s, double tol = 0.0);

struct Interval {
    double lo = -kInf;
    double hi = kInf;
    bool contains(double x) const { return x >= lo && x <= hi; }
    bool bounded() const { return std::isfinite(lo) && std::isfinite(hi); }
};

struct Chart {
    std::vector<std::string> coords;
    std::vector<Interval> domain;
    std::vector<ScalarExpr> masks;  // a point is removed when any mask holds

    int dim() const { return static_cast<int>(coords.size()); }
};

// Metric components and a time-orientation field over a single chart.
class MetricField {
public:
    MetricField() = default;
    // `components` is a full n x n array; only the upper triangle is read.
    MetricField(Chart chart, const std::vector<std::vector<ScalarExpr>>& components,
                std::vector<ScalarExpr> orientation);
    static MetricField constant(const Mat& g, const Vec& orientation, std::vector<std::string> coords = {});

    int dim() const { return chart_.dim(); }
    const Chart& chart() const { return chart_; }
    const ScalarExpr& component(int i, int j) const;
    const ScalarExpr& orientation_component(int i) const { return orient_expr_[i]; }

    bool in_domain(const Vec& p) const;
    bool masked(const Vec& p) const;

    // Component-wise evaluation; throws DomainError outside the chart or on a mask.
    SymMatrix at(const Vec& p) const;
    // Throws DomainError when the orientation is not g-timelike at p.
    Vec orientation(const Vec& p) const;

    MetricField with_reversed_orientation() const;

private:
    void compile();

    Chart chart_;
    std::vector<ScalarExpr> upper_;  // row-major upper triangle
    std::vector<ScalarExpr> orient_expr_;
    std::vector<CompiledExpr> comp_;
    std::vector<CompiledExpr> orient_;
    std::vector<CompiledExpr> mask_;
};

SymMatrix evaluate_metric(const MetricField& m, const Vec& p);
Vec orientation_at(const MetricField& m, const Vec& p);

// Future null vectors of unit Euclidean length. In two dimensions the two
// null directions are returned once each regardless of count.
std::vector<Vec> sample_null_cone(const SymMatrix& g, const Vec& orientation, int count, std::uint64_t seed);
std::vector<Vec> sample_null_cone(const MetricField& m, const Vec& p, int count, std::uint64_t seed);

// g-orthonormal frame: column 0 is the unit future timelike vector along the
// orientation, the rest span its g-orthogonal complement with g = -1.
Mat orthonormal_frame(const SymMatrix& g, const Vec& orientation);

struct ConeAngles {
    double theta_min = 0.0;
    double theta_max = 0.0;
    bool exact = true;  // false when cross terms forced a numerical scan
};

// Euclidean angles between d/dt (first coordinate) and the null directions.
ConeAngles cone_angles(const SymMatrix& g);
ConeAngles cone_angles(const MetricField& m, const Vec& p);

}  // namespace isocausal
