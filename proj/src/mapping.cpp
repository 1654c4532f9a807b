#include "isocausal/mapping.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>

#include "isocausal/parallel.hpp"

namespace isocausal {

namespace {

std::span<const double> as_span(const Vec& p) { return {p.data(), static_cast<std::size_t>(p.size())}; }

}  // namespace

DiffeoSpec::DiffeoSpec(std::vector<std::string> coords, std::vector<ScalarExpr> components,
                       std::optional<std::vector<std::vector<ScalarExpr>>> jacobian)
    : coords_(std::move(coords)), comp_expr_(std::move(components)) {
    const std::size_t n = coords_.size();
    if (n == 0) throw InputError("a map needs coordinates");
    if (comp_expr_.size() != n) throw InputError("map component count does not match its coordinates");
    for (const auto& e : comp_expr_) {
        if (e.is_condition()) throw InputError("map component must be a value, not a condition");
        comp_.emplace_back(e, coords_);
    }
    if (jacobian) {
        if (jacobian->size() != n) throw InputError("jacobian must be n x n");
        for (const auto& row : *jacobian) {
            if (row.size() != n) throw InputError("jacobian must be n x n");
            for (const auto& e : row) jac_.emplace_back(e, coords_);
        }
    }
}

DiffeoSpec DiffeoSpec::identity(std::vector<std::string> coords) {
    std::vector<ScalarExpr> comps;
    std::vector<std::vector<ScalarExpr>> jac;
    for (std::size_t i = 0; i < coords.size(); ++i) {
        comps.push_back(ScalarExpr::variable(coords[i]));
        jac.emplace_back();
        for (std::size_t j = 0; j < coords.size(); ++j) jac.back().push_back(ScalarExpr::constant(i == j ? 1.0 : 0.0));
    }
    return DiffeoSpec(std::move(coords), std::move(comps), std::move(jac));
}

Vec DiffeoSpec::apply(const Vec& p) const {
    if (p.size() != dim()) throw InputError("point dimension does not match the map");
    Vec q(dim());
    for (int i = 0; i < dim(); ++i) q(i) = comp_[i](as_span(p));
    return q;
}

Mat DiffeoSpec::jacobian(const Vec& p) const {
    if (p.size() != dim()) throw InputError("point dimension does not match the map");
    const int n = dim();
    Mat J(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            if (!jac_.empty()) {
                J(i, j) = jac_[i * n + j](as_span(p));
                continue;
            }
            // Richardson-extrapolated central differences
            const double h = 1e-3 * std::max(1.0, std::abs(p(j)));
            const double d1 = comp_[i].diff_fd(as_span(p), j, h).value;
            const double d2 = comp_[i].diff_fd(as_span(p), j, h / 2).value;
            J(i, j) = (4.0 * d2 - d1) / 3.0;
        }
    return J;
}

DiffeoSpec DiffeoSpec::compose(const DiffeoSpec& inner) const {
    if (inner.dim() != dim()) throw InputError("cannot compose maps of different dimension");
    std::map<std::string, ScalarExpr, std::less<>> repl;
    for (int i = 0; i < dim(); ++i) repl[coords_[i]] = inner.comp_expr_[i];
    std::vector<ScalarExpr> comps;
    for (const auto& e : comp_expr_) comps.push_back(e.substitute(repl));
    return DiffeoSpec(inner.coords_, std::move(comps));
}

Vec NumericalInverse::apply(const Vec& q) const {
    Vec x = q;
    const double scale = 1.0 + q.norm();
    for (int it = 0; it < 100; ++it) {
        Vec r = f_.apply(x) - q;
        if (r.norm() <= 1e-13 * scale) return x;
        Eigen::FullPivLU<Mat> lu(f_.jacobian(x));
        if (!lu.isInvertible()) throw NumericalError("singular jacobian while inverting the map");
        Vec step = lu.solve(r);
        // damp steps that increase the residual
        double t = 1.0;
        Vec next = x - step;
        while (t > 1e-6 && (f_.apply(next) - q).norm() > r.norm()) {
            t *= 0.5;
            next = x - t * step;
        }
        x = next;
    }
    if ((f_.apply(x) - q).norm() <= 1e-10 * scale) return x;
    throw NumericalError("newton inversion did not converge");
}

Mat NumericalInverse::jacobian(const Vec& q) const {
    Eigen::FullPivLU<Mat> lu(f_.jacobian(apply(q)));
    if (!lu.isInvertible()) throw NumericalError("singular jacobian while inverting the map");
    return lu.inverse();
}

SampleGrid::SampleGrid(const Chart& chart, std::vector<int> counts) {
    const int n = chart.dim();
    if (static_cast<int>(counts.size()) != n) throw InputError("grid counts do not match the chart");
    std::vector<Interval> dom = chart.domain;
    if (dom.empty()) dom.assign(n, Interval{});
    for (int i = 0; i < n; ++i) {
        const int N = counts[i];
        if (N < 1) throw InputError("grid needs at least one point per axis");
        const Interval iv = dom[i];
        std::vector<double> ax(N);
        const bool compact = !iv.bounded();
        const double lo = compact ? std::atan(iv.lo) : iv.lo;
        const double hi = compact ? std::atan(iv.hi) : iv.hi;
        for (int k = 0; k < N; ++k) {
            const double s = lo + (k + 0.5) * (hi - lo) / N;
            ax[k] = compact ? std::tan(s) : s;
        }
        axes_.push_back(std::move(ax));
        compact_.push_back(compact);
        total_ *= static_cast<std::size_t>(N);
    }
}

SampleGrid::SampleGrid(const Chart& chart, int per_axis)
    : SampleGrid(chart, std::vector<int>(chart.dim(), per_axis)) {}

Vec SampleGrid::point(std::size_t index) const {
    const int n = static_cast<int>(axes_.size());
    Vec p(n);
    for (int i = n - 1; i >= 0; --i) {
        const std::size_t N = axes_[i].size();
        p(i) = axes_[i][index % N];
        index /= N;
    }
    return p;
}

std::vector<double> probe_axis(const SampleGrid& grid, int i, const Interval& dom, std::size_t& first_probe) {
    std::vector<double> ax = grid.axis(i);
    first_probe = ax.size();
    if (!grid.compactified(i)) return ax;
    for (double end : {ax.front(), ax.back()})
        for (int k = 1; k <= 8; ++k) {
            const double v = end * std::pow(10.0, k);
            if (end != 0.0 && dom.contains(v)) ax.push_back(v);
        }
    return ax;
}

SymMatrix pullback_metric(const PointMap& phi, const MetricField& g2, const Vec& p) {
    const Mat J = phi.jacobian(p);
    const Vec q = phi.apply(p);
    if (!g2.in_domain(q)) throw DomainError("map image leaves the target chart (codomain violation)");
    const SymMatrix G = g2.at(q);
    return SymMatrix(J.transpose() * G.mat() * J);
}

const char* to_string(MapOutcome o) {
    switch (o) {
        case MapOutcome::Causal: return "Causal";
        case MapOutcome::Anticausal: return "Anticausal";
        case MapOutcome::NotCausal: return "NotCausal";
        case MapOutcome::Inconclusive: return "Inconclusive";
    }
    return "?";
}

namespace {

enum class PointKind { Skipped, Preserving, Reversing, Failing };

struct PointCheck {
    PointKind kind = PointKind::Skipped;
    double margin = 0.0;
    bool boundary = false;
    Vec witness;
    bool verified = false;
};

// Picks a g1-future causal vector whose image fails to be g2-causal or lands
// in the wrong half of the g2 cone; `sign` is the orientation sign at p.
bool find_failing_vector(const SymMatrix& G2, const Vec& o2, const Mat& J, const std::vector<Vec>& cands,
                         double sign, Vec& out) {
    for (const auto& v : cands) {
        const Vec w = J * v;
        const double scale = w.squaredNorm() * G2.mat().cwiseAbs().maxCoeff();
        if (G2.form(w) < -1e-9 * scale || sign * G2.form(w, o2) < -1e-9 * std::sqrt(scale * std::abs(G2.form(o2)))) {
            out = v;
            return true;
        }
    }
    return false;
}

PointCheck check_point(const MetricField& g1, const MetricField& g2, const PointMap& phi, const Vec& p) {
    PointCheck pc;
    if (g1.masked(p)) return pc;
    const SymMatrix G1 = g1.at(p);
    const Vec o1 = g1.orientation(p);
    const Vec q = phi.apply(p);
    const Mat J = phi.jacobian(p);
    if (std::abs(J.determinant()) <= 1e-14 * std::pow(std::max(1.0, J.cwiseAbs().maxCoeff()), J.rows()))
        throw DomainError("map jacobian is singular");
    if (!g2.in_domain(q)) throw DomainError("map image leaves the target chart (codomain violation)");
    const SymMatrix G2 = g2.at(q);
    const Vec o2 = g2.orientation(q);
    const SymMatrix T(J.transpose() * G2.mat() * J);
    // relative tolerance: difference Jacobians carry errors proportional to |T|
    const double tol = 1e-9 * std::max(1.0, endomorphism(G1, T).cwiseAbs().maxCoeff());
    const DPReport r = classify_dp(G1, T, o1, tol);
    pc.margin = r.margin;
    pc.boundary = r.boundary;
    const double s = G2.form(J * o1, o2);
    const double sign = s >= 0.0 ? 1.0 : -1.0;
    if (r.classification == DPClass::Future) {
        pc.kind = s > 0.0 ? PointKind::Preserving : PointKind::Reversing;
        return pc;
    }
    pc.kind = PointKind::Failing;
    std::vector<Vec> cands;
    if (r.witness) cands.push_back(*r.witness);
    if (r.witness2) cands.push_back(*r.witness2);
    for (auto& k : sample_null_cone(G1, o1, 512, 7)) cands.push_back(std::move(k));
    cands.push_back(o1);
    pc.verified = find_failing_vector(G2, o2, J, cands, sign, pc.witness);
    if (!pc.verified) pc.witness = r.witness ? *r.witness : o1;
    return pc;
}

}  // namespace

MappingVerdict check_causal_mapping(const MetricField& g1, const MetricField& g2, const PointMap& phi,
                                    const SampleGrid& grid) {
    if (g1.dim() != g2.dim() || phi.dim() != g1.dim())
        throw InputError("metrics and map must share one dimension");
    const std::size_t n = grid.size();
    const std::size_t chunks = std::min<std::size_t>(n, 64);

    struct ChunkResult {
        std::size_t samples = 0, skipped = 0, boundary = 0;
        double min_margin = kInf;
        std::size_t first_fail = SIZE_MAX, first_pres = SIZE_MAX, first_rev = SIZE_MAX;
        PointCheck fail;
    };
    std::vector<ChunkResult> res(chunks);
    parallel_chunks(n, chunks, [&](std::size_t b, std::size_t e, std::size_t c) {
        ChunkResult& cr = res[c];
        for (std::size_t i = b; i < e; ++i) {
            const Vec p = grid.point(i);
            PointCheck pc = check_point(g1, g2, phi, p);
            if (pc.kind == PointKind::Skipped) {
                ++cr.skipped;
                continue;
            }
            ++cr.samples;
            cr.min_margin = std::min(cr.min_margin, pc.margin);
            if (pc.boundary) ++cr.boundary;
            if (pc.kind == PointKind::Preserving && cr.first_pres == SIZE_MAX) cr.first_pres = i;
            if (pc.kind == PointKind::Reversing && cr.first_rev == SIZE_MAX) cr.first_rev = i;
            if (pc.kind == PointKind::Failing && cr.first_fail == SIZE_MAX) {
                cr.first_fail = i;
                cr.fail = std::move(pc);
            }
        }
    });

    MappingVerdict v;
    v.min_margin = kInf;
    std::size_t fail = SIZE_MAX, pres = SIZE_MAX, rev = SIZE_MAX;
    const PointCheck* failing = nullptr;
    for (const auto& cr : res) {
        v.samples += cr.samples;
        v.skipped += cr.skipped;
        v.boundary_points += cr.boundary;
        v.min_margin = std::min(v.min_margin, cr.min_margin);
        if (cr.first_fail < fail) {
            fail = cr.first_fail;
            failing = &cr.fail;
        }
        pres = std::min(pres, cr.first_pres);
        rev = std::min(rev, cr.first_rev);
    }
    if (v.samples == 0) {
        v.min_margin = 0.0;
        v.outcome = MapOutcome::Inconclusive;
        v.reason = "no unmasked sample points";
        return v;
    }
    if (failing) {
        v.outcome = MapOutcome::NotCausal;
        v.witness_point = grid.point(fail);
        v.witness_vector = failing->witness;
        v.witness_verified = failing->verified;
        v.reason = "pullback fails the dominant property";
        return v;
    }
    if (pres != SIZE_MAX && rev != SIZE_MAX) {
        v.outcome = MapOutcome::NotCausal;
        const std::size_t at = std::max(pres, rev);
        v.witness_point = grid.point(at);
        v.witness_vector = g1.orientation(*v.witness_point);
        v.witness_verified = true;
        v.reason = "time orientation is preserved at some points and reversed at others";
        return v;
    }
    v.outcome = rev == SIZE_MAX ? MapOutcome::Causal : MapOutcome::Anticausal;
    return v;
}

ConformalReport check_conformal(const MetricField& g1, const MetricField& g2, const PointMap& phi,
                                const SampleGrid& grid, double rtol) {
    ConformalReport rep;
    rep.conformal = true;
    rep.lambda_min = kInf;
    rep.lambda_max = -kInf;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec p = grid.point(i);
        if (g1.masked(p)) continue;
        const Mat G = g1.at(p).mat();
        const Mat T = pullback_metric(phi, g2, p).mat();
        const double lam = (T.array() * G.array()).sum() / G.squaredNorm();
        const double resid = (T - lam * G).norm() / std::max(T.norm(), 1e-300);
        rep.lambda.push_back(lam);
        rep.lambda_min = std::min(rep.lambda_min, lam);
        rep.lambda_max = std::max(rep.lambda_max, lam);
        rep.worst_residual = std::max(rep.worst_residual, resid);
        if (resid > rtol || !(lam > 0.0)) rep.conformal = false;
    }
    if (rep.lambda.empty()) rep.conformal = false;
    return rep;
}

MetricField flat_cone_metric(const Chart& like, double speed) {
    const int n = like.dim();
    std::vector<std::vector<ScalarExpr>> comps(n, std::vector<ScalarExpr>(n, ScalarExpr::constant(0.0)));
    comps[0][0] = ScalarExpr::constant(1.0);
    for (int i = 1; i < n; ++i) comps[i][i] = ScalarExpr::constant(-1.0 / (speed * speed));
    std::vector<ScalarExpr> o(n, ScalarExpr::constant(0.0));
    o[0] = ScalarExpr::constant(1.0);
    return MetricField(like, comps, o);
}

StabilityReport minkowski_stability(const MetricField& g, const SampleGrid& grid) {
    StabilityReport rep;
    ConeBracket& br = rep.bracket;
    br.theta_minus = kInf;
    br.theta_plus = -kInf;
    Vec at_min, at_max;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const Vec p = grid.point(i);
        if (g.masked(p)) continue;
        const ConeAngles a = cone_angles(g, p);
        if (a.theta_min < br.theta_minus) {
            br.theta_minus = a.theta_min;
            at_min = p;
        }
        if (a.theta_max > br.theta_plus) {
            br.theta_plus = a.theta_max;
            at_max = p;
        }
    }
    if (at_min.size() == 0) throw InputError("no unmasked sample points");

    // Far-field probes: push the extreme points outwards along the
    // compactified axes to see whether the bracket keeps widening.
    auto probe = [&](const Vec& start) {
        for (int k = 1; k <= 8; ++k) {
            Vec q = start;
            bool moved = false;
            for (int i = 0; i < q.size(); ++i)
                if (grid.compactified(i) && q(i) != 0.0) {
                    q(i) *= std::pow(10.0, k);
                    moved = true;
                }
            if (!moved || !g.in_domain(q) || g.masked(q)) break;
            const ConeAngles a = cone_angles(g, q);
            if (a.theta_min < br.theta_minus - 1e-9) {
                br.theta_minus = a.theta_min;
                br.extrapolated = true;
            }
            if (a.theta_max > br.theta_plus + 1e-9) {
                br.theta_plus = a.theta_max;
                br.extrapolated = true;
            }
        }
    };
    probe(at_min);
    probe(at_max);

    constexpr double kEdge = 1e-6;
    if (br.theta_minus <= kEdge || br.theta_plus >= std::numbers::pi / 2 - kEdge) {
        rep.verdict = br.theta_plus >= std::numbers::pi / 2 - kEdge
                          ? "inconclusive: cones open towards the spatial directions"
                          : "inconclusive: cones close onto the time axis";
        return rep;
    }
    br.eta_minus = flat_cone_metric(g.chart(), std::tan(br.theta_minus));
    br.eta_plus = flat_cone_metric(g.chart(), std::tan(br.theta_plus));
    const DiffeoSpec id = DiffeoSpec::identity(g.chart().coords);
    rep.lower = check_causal_mapping(br.eta_minus, g, id, grid);
    rep.upper = check_causal_mapping(g, br.eta_plus, id, grid);
    const bool both_causal = rep.lower.outcome == MapOutcome::Causal && rep.upper.outcome == MapOutcome::Causal;
    const bool both_anti =
        rep.lower.outcome == MapOutcome::Anticausal && rep.upper.outcome == MapOutcome::Anticausal;
    rep.isocausal = both_causal || both_anti;
    rep.verdict = rep.isocausal ? "isocausal to Minkowski" : "inconclusive: bracket maps failed";
    return rep;
}

}  // namespace isocausal
