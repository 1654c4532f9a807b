#include "isocausal/lorentz.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace isocausal {

SymMatrix::SymMatrix(const Mat& m) {
    if (m.rows() != m.cols() || m.rows() == 0) throw InputError("symmetric matrix must be square and non-empty");
    double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw InputError("matrix is not symmetric");
    m_ = 0.5 * (m + m.transpose());
}

SymMatrix SymMatrix::diag(std::initializer_list<double> d) {
    Vec v(static_cast<Eigen::Index>(d.size()));
    int i = 0;
    for (double x : d) v(i++) = x;
    return SymMatrix(Mat(v.asDiagonal()));
}

SymMatrix SymMatrix::operator-() const { return SymMatrix(Mat(-m_)); }
SymMatrix operator+(const SymMatrix& a, const SymMatrix& b) { return SymMatrix(Mat(a.m_ + b.m_)); }
SymMatrix operator*(double s, const SymMatrix& a) { return SymMatrix(Mat(s * a.m_)); }

Signature signature(const SymMatrix& s, double tol) {
    Eigen::SelfAdjointEigenSolver<Mat> es(s.mat(), Eigen::EigenvaluesOnly);
    const Vec& ev = es.eigenvalues();
    if (tol <= 0.0) tol = 1e-9 * ev.cwiseAbs().maxCoeff();
    Signature sig;
    for (int i = 0; i < ev.size(); ++i) {
        if (ev(i) > tol) ++sig.positives;
        else if (ev(i) < -tol) ++sig.negatives;
        else ++sig.zeros;
    }
    return sig;
}

MetricField::MetricField(Chart chart, const std::vector<std::vector<ScalarExpr>>& components,
                         std::vector<ScalarExpr> orientation)
    : chart_(std::move(chart)), orient_expr_(std::move(orientation)) {
    const int n = chart_.dim();
    if (n < 2) throw InputError("a chart needs at least two coordinates");
    if (chart_.domain.empty()) chart_.domain.assign(n, Interval{});
    if (static_cast<int>(chart_.domain.size()) != n) throw InputError("domain size does not match the chart");
    if (static_cast<int>(components.size()) != n) throw InputError("metric size does not match the chart");
    if (static_cast<int>(orient_expr_.size()) != n) throw InputError("orientation size does not match the chart");
    for (const auto& row : components)
        if (static_cast<int>(row.size()) != n) throw InputError("metric rows must have n entries");
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) upper_.push_back(components[i][j]);
    for (const auto& m : chart_.masks)
        if (!m.is_condition()) throw InputError("mask must be a condition");
    compile();
}

void MetricField::compile() {
    comp_.clear();
    orient_.clear();
    mask_.clear();
    for (const auto& e : upper_) comp_.emplace_back(e, chart_.coords);
    for (const auto& e : orient_expr_) orient_.emplace_back(e, chart_.coords);
    for (const auto& e : chart_.masks) mask_.emplace_back(e, chart_.coords);
}

MetricField MetricField::constant(const Mat& g, const Vec& o, std::vector<std::string> coords) {
    const int n = static_cast<int>(g.rows());
    if (coords.empty())
        for (int i = 0; i < n; ++i) coords.push_back("x" + std::to_string(i));
    Chart c;
    c.coords = std::move(coords);
    std::vector<std::vector<ScalarExpr>> comps(n, std::vector<ScalarExpr>(n));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) comps[i][j] = ScalarExpr::constant(g(std::min(i, j), std::max(i, j)));
    std::vector<ScalarExpr> orient;
    for (int i = 0; i < n; ++i) orient.push_back(ScalarExpr::constant(o(i)));
    return MetricField(std::move(c), comps, std::move(orient));
}

const ScalarExpr& MetricField::component(int i, int j) const {
    const int n = dim();
    if (i > j) std::swap(i, j);
    return upper_[i * n - i * (i - 1) / 2 + (j - i)];
}

bool MetricField::in_domain(const Vec& p) const {
    if (p.size() != dim()) return false;
    for (int i = 0; i < dim(); ++i)
        if (!chart_.domain[i].contains(p(i))) return false;
    return true;
}

bool MetricField::masked(const Vec& p) const {
    std::span<const double> x(p.data(), p.size());
    return std::any_of(mask_.begin(), mask_.end(), [&](const CompiledExpr& m) { return m.test(x); });
}

SymMatrix MetricField::at(const Vec& p) const {
    if (!in_domain(p)) throw DomainError("point outside the chart domain");
    if (masked(p)) throw DomainError("point lies in a removed region");
    const int n = dim();
    std::span<const double> x(p.data(), p.size());
    Mat g(n, n);
    int k = 0;
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            g(i, j) = comp_[k++](x);
            g(j, i) = g(i, j);
        }
    return SymMatrix(g);
}

Vec MetricField::orientation(const Vec& p) const {
    SymMatrix g = at(p);
    std::span<const double> x(p.data(), p.size());
    Vec o(dim());
    for (int i = 0; i < dim(); ++i) o(i) = orient_[i](x);
    if (!(g.form(o) > 0.0)) throw DomainError("orientation vector is not timelike");
    return o;
}

MetricField MetricField::with_reversed_orientation() const {
    MetricField r = *this;
    for (auto& e : r.orient_expr_) e = -e;
    r.compile();
    return r;
}

SymMatrix evaluate_metric(const MetricField& m, const Vec& p) { return m.at(p); }
Vec orientation_at(const MetricField& m, const Vec& p) { return m.orientation(p); }

Mat orthonormal_frame(const SymMatrix& g, const Vec& orientation) {
    const int n = g.dim();
    double oo = g.form(orientation);
    if (!(oo > 0.0)) throw DomainError("orientation vector is not timelike");
    Mat frame(n, n);
    frame.col(0) = orientation / std::sqrt(oo);
    // Complement: Euclidean-orthonormal basis of {w : g(u, w) = 0}, then
    // diagonalize g on it.
    Vec gu = g.mat() * frame.col(0);
    Eigen::JacobiSVD<Mat> svd(gu.transpose(), Eigen::ComputeFullV);
    Mat W = svd.matrixV().rightCols(n - 1);
    Mat gw = W.transpose() * g.mat() * W;
    Eigen::SelfAdjointEigenSolver<Mat> es(-gw);
    if (es.eigenvalues().minCoeff() <= 0.0) throw DomainError("metric is not Lorentzian");
    for (int a = 0; a < n - 1; ++a)
        frame.col(a + 1) = W * es.eigenvectors().col(a) / std::sqrt(es.eigenvalues()(a));
    return frame;
}

std::vector<Vec> sample_null_cone(const SymMatrix& g, const Vec& orientation, int count, std::uint64_t seed) {
    if (!signature(g).lorentzian()) throw DomainError("metric is not Lorentzian");
    Mat frame = orthonormal_frame(g, orientation);
    const int n = g.dim();
    std::vector<Vec> out;
    auto push = [&](const Vec& spatial) {
        Vec k = frame.col(0) + frame.rightCols(n - 1) * spatial;
        out.push_back(k.normalized());
    };
    if (n == 2) {
        Vec s(1);
        s(0) = 1.0;
        push(s);
        s(0) = -1.0;
        push(s);
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (int i = 0; i < count; ++i) {
        Vec s(n - 1);
        for (int a = 0; a < n - 1; ++a) s(a) = normal(rng);
        double r = s.norm();
        if (r == 0.0) {
            --i;
            continue;
        }
        push(s / r);
    }
    return out;
}

std::vector<Vec> sample_null_cone(const MetricField& m, const Vec& p, int count, std::uint64_t seed) {
    return sample_null_cone(m.at(p), m.orientation(p), count, seed);
}

namespace {

// theta for the spatial displacement y (e = (-b.y/gtt, y)).
double angle_of(const Vec& y, const Vec& b, double gtt) {
    return std::atan2(y.norm(), 1.0 - b.dot(y) / gtt);
}

}  // namespace

ConeAngles cone_angles(const SymMatrix& g) {
    const int n = g.dim();
    const double gtt = g(0, 0);
    if (!(gtt > 0.0)) throw DomainError("d/dt is not timelike");
    Vec b = g.mat().block(0, 1, 1, n - 1).transpose();
    Mat S = g.mat().block(1, 1, n - 1, n - 1);
    // Admissible e satisfy y^T M y = gtt with M positive definite.
    Mat M = b * b.transpose() / gtt - S;
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    if (es.eigenvalues().minCoeff() <= 0.0) throw DomainError("metric is not Lorentzian");
    const Vec& mu = es.eigenvalues();
    ConeAngles out;
    double bnorm = b.cwiseAbs().maxCoeff();
    if (bnorm <= 1e-14 * std::max(1.0, gtt)) {
        out.theta_min = std::atan(std::sqrt(gtt / mu.maxCoeff()));
        out.theta_max = std::atan(std::sqrt(gtt / mu.minCoeff()));
        return out;
    }
    // y = sqrt(gtt) M^{-1/2} s with |s| = 1.
    Mat Minvhalf = es.eigenvectors() * mu.cwiseInverse().cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    auto theta = [&](const Vec& s) { return angle_of(std::sqrt(gtt) * Minvhalf * s.normalized(), b, gtt); };
    if (n == 2) {
        Vec s(1);
        s(0) = 1.0;
        double a = theta(s);
        s(0) = -1.0;
        double c = theta(s);
        out.theta_min = std::min(a, c);
        out.theta_max = std::max(a, c);
        return out;
    }
    out.exact = false;
    // Dense scan of the unit sphere followed by a shrinking local search.
    const int dim = n - 1;
    std::vector<Vec> starts;
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> normal;
    int scan = dim == 2 ? 720 : 4000;
    for (int i = 0; i < scan; ++i) {
        Vec s(dim);
        if (dim == 2) {
            double a = 2.0 * std::numbers::pi * i / scan;
            s << std::cos(a), std::sin(a);
        } else {
            for (int k = 0; k < dim; ++k) s(k) = normal(rng);
        }
        starts.push_back(s.normalized());
    }
    auto refine = [&](Vec s, double sign) {
        double best = sign * theta(s);
        double step = 0.05;
        while (step > 1e-13) {
            bool moved = false;
            for (int k = 0; k < dim; ++k)
                for (double d : {step, -step}) {
                    Vec t = s;
                    t(k) += d;
                    t.normalize();
                    double v = sign * theta(t);
                    if (v > best) {
                        best = v;
                        s = t;
                        moved = true;
                    }
                }
            if (!moved) step *= 0.5;
        }
        return sign * best;
    };
    Vec smin = starts[0], smax = starts[0];
    for (const auto& s : starts) {
        if (theta(s) < theta(smin)) smin = s;
        if (theta(s) > theta(smax)) smax = s;
    }
    out.theta_min = refine(smin, -1.0);
    out.theta_max = refine(smax, 1.0);
    return out;
}

ConeAngles cone_angles(const MetricField& m, const Vec& p) { return cone_angles(m.at(p)); }

}  // namespace isocausal
