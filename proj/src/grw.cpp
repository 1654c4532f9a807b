#include "isocausal/grw.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <queue>
#include <sstream>

namespace isocausal {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1].
constexpr double kXgk[8] = {0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
                            0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
                            0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
                            0.207784955007898467600689403773245, 0.0};
constexpr double kWgk[8] = {0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
                            0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
                            0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
                            0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Piece {
    double a, b, value, err;
    bool operator<(const Piece& o) const { return err < o.err; }
};

Piece gk15(const std::function<double(double)>& g, double a, double b) {
    const double c = 0.5 * (a + b), h = 0.5 * (b - a);
    const double fc = g(c);
    double k = fc * kWgk[7], gs = fc * kWg[3];
    for (int j = 0; j < 7; ++j) {
        const double x = h * kXgk[j];
        const double s = g(c - x) + g(c + x);
        k += kWgk[j] * s;
        if (j % 2 == 1) gs += kWg[j / 2] * s;
    }
    return {a, b, k * h, std::abs(k - gs) * h};
}

// Adaptive bisection of the piece with the largest error estimate.
Piece integrate(const std::function<double(double)>& g, double a, double b, double rel_tol) {
    std::priority_queue<Piece> heap;
    Piece whole = gk15(g, a, b);
    heap.push(whole);
    double value = whole.value, err = whole.err;
    for (int it = 0; it < 4000 && err > std::max(rel_tol * std::abs(value), 1e-300); ++it) {
        Piece p = heap.top();
        const double m = 0.5 * (p.a + p.b);
        if (m <= p.a || m >= p.b) break;
        heap.pop();
        Piece l = gk15(g, p.a, m), r = gk15(g, m, p.b);
        value += l.value + r.value - p.value;
        err += l.err + r.err - p.err;
        heap.push(l);
        heap.push(r);
    }
    // resum to shed accumulated cancellation error
    value = 0.0;
    err = 0.0;
    while (!heap.empty()) {
        value += heap.top().value;
        err += heap.top().err;
        heap.pop();
    }
    return {a, b, value, err};
}

std::function<double(double)> reciprocal(const GRWSpec& spec) {
    auto fc = std::make_shared<CompiledExpr>(spec.f, std::vector<std::string>{spec.time_coord});
    // a round fiber of diameter d is the unit sphere scaled by d / pi
    const double scale = spec.diameter > 0.0 ? spec.diameter / std::numbers::pi : 1.0;
    return [fc, scale](double t) {
        const double f = (*fc)(std::span<const double>(&t, 1));
        if (!(f > 0.0)) throw DomainError("warping function is not positive at t = " + num(t));
        return 1.0 / (scale * f);
    };
}

}  // namespace

bool TimeProductSpec::separable() const {
    for (const auto& o : omega)
        if (!(o.is_constant() && o.eval({}) == 0.0)) return false;
    return true;
}

Chart TimeProductSpec::chart() const {
    Chart c;
    c.coords.push_back(time_coord);
    c.domain.push_back(interval);
    for (std::size_t i = 0; i < fiber_coords.size(); ++i) {
        c.coords.push_back(fiber_coords[i]);
        c.domain.push_back(i < fiber_domain.size() ? fiber_domain[i] : Interval{});
    }
    return c;
}

MetricField TimeProductSpec::metric() const {
    const int m = fiber_dim();
    if (m < 1) throw InputError("time product needs at least one fiber coordinate");
    if (static_cast<int>(h.size()) != m) throw InputError("fiber metric size does not match the fiber chart");
    if (!omega.empty() && static_cast<int>(omega.size()) != m)
        throw InputError("Omega needs one component per fiber coordinate");
    const int n = m + 1;
    std::vector<std::vector<ScalarExpr>> comps(n, std::vector<ScalarExpr>(n, ScalarExpr::constant(0.0)));
    comps[0][0] = rho;
    for (int j = 0; j < m; ++j) {
        if (!omega.empty()) comps[0][j + 1] = comps[j + 1][0] = omega[j];
        if (static_cast<int>(h[j].size()) != m) throw InputError("fiber metric must be square");
        for (int k = 0; k < m; ++k) comps[j + 1][k + 1] = -h[j][k];
    }
    std::vector<ScalarExpr> o(n, ScalarExpr::constant(0.0));
    o[0] = ScalarExpr::constant(1.0);
    return MetricField(chart(), comps, o);
}

const char* to_string(EndKind k) {
    switch (k) {
        case EndKind::Finite: return "finite";
        case EndKind::Infinite: return "infinite";
        case EndKind::Unknown: return "unknown";
    }
    return "?";
}

EndIntegral end_integral(const std::function<double(double)>& inv_f, double c, double end, const QuadratureConfig& q) {
    EndIntegral out;
    const bool finite_end = std::isfinite(end);
    const double dir = end > c ? 1.0 : -1.0;
    auto boundary = [&](int k) {
        return finite_end ? c + (end - c) * (1.0 - std::ldexp(1.0, -k)) : c + dir * (std::ldexp(1.0, k) - 1.0);
    };
    std::vector<double> shells;
    double total = 0.0, err = 0.0;
    int grow = 0, decay = 0;
    auto finish_finite = [&](double tail, double tail_err) {
        out.kind = EndKind::Finite;
        out.value = total + tail;
        out.error = err + tail_err;
        out.shells = static_cast<int>(shells.size());
    };
    auto ratio_span = [&](double& rmin, double& rmax) {
        rmin = kInf;
        rmax = 0.0;
        const std::size_t n = shells.size();
        for (int j = 0; j < q.decay_shells; ++j) {
            const double r = shells[n - 1 - j] / shells[n - 2 - j];
            rmin = std::min(rmin, r);
            rmax = std::max(rmax, r);
        }
    };
    for (int k = 0; k < 64; ++k) {
        const double a = boundary(k), b = boundary(k + 1);
        if (a == b || (finite_end && b == end)) break;
        // growing shells only feed the ratio test, so coarse accuracy suffices
        const Piece p = integrate(inv_f, std::min(a, b), std::max(a, b), grow >= 2 ? 1e-6 : q.rel_tol);
        shells.push_back(p.value);
        total += p.value;
        err += p.err;
        if (shells.size() < 2) continue;
        const double prev = shells[shells.size() - 2], cur = p.value;
        grow = (cur > 0.0 && cur >= q.growth_floor * prev) ? grow + 1 : 0;
        decay = (prev > 0.0 && cur < q.decay_ratio * prev) ? decay + 1 : 0;
        // partial integrals past a huge threshold while still growing
        const bool blown = grow >= 3 && total > 1e30;
        if (grow >= q.growth_shells || blown) {
            out.kind = EndKind::Infinite;
            out.value = kInf;
            out.error = 0.0;
            out.shells = static_cast<int>(shells.size());
            out.diagnostics = blown ? "partial integral above 1e30 with growing shells"
                                    : num(grow) + " consecutive shells without decay";
            return out;
        }
        if (cur == 0.0) {
            finish_finite(0.0, 0.0);
            out.diagnostics = "shell contributions underflow";
            return out;
        }
        if (decay >= q.decay_shells) {
            double rmin, rmax;
            ratio_span(rmin, rmax);
            const double tail = cur * rmax / (1.0 - rmax);
            if (tail <= q.tail_tol * std::abs(total)) {
                finish_finite(tail, tail);
                out.diagnostics = "geometric decay, max ratio " + num(rmax);
                return out;
            }
        }
    }
    if (decay >= q.decay_shells && shells.size() > static_cast<std::size_t>(q.decay_shells)) {
        double rmin, rmax;
        ratio_span(rmin, rmax);
        // geometric tail; the spread of the measured ratios bounds its error
        const double tail = shells.back() * rmax / (1.0 - rmax);
        const double tail_lo = shells.back() * rmin / (1.0 - rmin);
        finish_finite(tail, tail - tail_lo + 1e-15 * std::abs(total));
        out.diagnostics = "tail extrapolated from ratio " + num(rmax);
        return out;
    }
    out.kind = EndKind::Unknown;
    out.value = total;
    out.error = err;
    out.shells = static_cast<int>(shells.size());
    std::ostringstream os;
    os << "neither divergence nor decay detected after " << shells.size() << " shells";
    if (shells.size() >= 2) os << ", last ratio " << shells.back() / shells[shells.size() - 2];
    out.diagnostics = os.str();
    return out;
}

double default_anchor(const Interval& I) {
    const bool lo = std::isfinite(I.lo), hi = std::isfinite(I.hi);
    if (lo && hi) return 0.5 * (I.lo + I.hi);
    if (lo) return I.lo + 1.0;
    if (hi) return I.hi - 1.0;
    return 0.0;
}

IntervalProfile conformal_interval(const GRWSpec& spec, std::optional<double> c, const QuadratureConfig& q) {
    if (!(spec.interval.lo < spec.interval.hi)) throw InputError("empty time interval");
    const double anchor = c.value_or(default_anchor(spec.interval));
    if (!(anchor > spec.interval.lo && anchor < spec.interval.hi))
        throw InputError("anchor must lie inside the time interval");
    const auto inv_f = reciprocal(spec);
    IntervalProfile p;
    p.past = end_integral(inv_f, anchor, spec.interval.lo, q);
    p.future = end_integral(inv_f, anchor, spec.interval.hi, q);
    p.past_finite = p.past.kind == EndKind::Finite;
    p.future_finite = p.future.kind == EndKind::Finite;
    if (p.past_finite && p.future_finite) {
        p.L = p.past.value + p.future.value;
        p.error = p.past.error + p.future.error;
    }
    return p;
}

const char* type_name(GRWType t) {
    switch (t) {
        case GRWType::EinsteinStatic: return "EinsteinStaticType";
        case GRWType::ExpNeg: return "ExpNegType";
        case GRWType::ExpPos: return "ExpPosType";
        case GRWType::FiniteBand: return "FiniteBand";
    }
    return "?";
}

const char* roman(GRWType t) {
    switch (t) {
        case GRWType::EinsteinStatic: return "i";
        case GRWType::ExpNeg: return "ii";
        case GRWType::ExpPos: return "iii";
        case GRWType::FiniteBand: return "iv";
    }
    return "?";
}

std::string GRWClass::to_string() const {
    if (type == GRWType::FiniteBand) return "FiniteBand(" + num(L) + ")";
    return type_name(type);
}

GRWClass class_from_profile(const IntervalProfile& p) {
    for (const EndIntegral* e : {&p.past, &p.future})
        if (e->kind == EndKind::Unknown)
            throw NumericalError("undecidable conformal integral: " + e->diagnostics);
    GRWClass c;
    if (!p.past_finite && !p.future_finite) c.type = GRWType::EinsteinStatic;
    else if (p.past_finite && !p.future_finite) c.type = GRWType::ExpNeg;
    else if (!p.past_finite && p.future_finite) c.type = GRWType::ExpPos;
    else {
        c.type = GRWType::FiniteBand;
        c.L = p.L;
    }
    return c;
}

GRWClass grw_classify(const GRWSpec& spec, const QuadratureConfig& q) {
    if (!spec.compact_fiber) throw InputError("the four-type classification needs a compact fiber");
    return class_from_profile(conformal_interval(spec, std::nullopt, q));
}

const char* to_string(Relation r) {
    switch (r) {
        case Relation::Precedes: return "precedes";
        case Relation::Follows: return "follows";
        case Relation::Equivalent: return "equivalent";
        case Relation::Incomparable: return "incomparable";
    }
    return "?";
}

OrderResult grw_order(const GRWClass& a, const GRWClass& b, const BandEvidence& evidence) {
    auto rank = [](GRWType t) {
        switch (t) {
            case GRWType::FiniteBand: return 0;
            case GRWType::ExpNeg:
            case GRWType::ExpPos: return 1;
            case GRWType::EinsteinStatic: return 2;
        }
        return 0;
    };
    OrderResult r;
    if (a.type == GRWType::FiniteBand && b.type == GRWType::FiniteBand) {
        if (std::abs(a.L - b.L) < kBandTolerance) {
            r.relation = Relation::Equivalent;
            r.reason = "same band length";
            return r;
        }
        r.relation = a.L < b.L ? Relation::Precedes : Relation::Follows;
        r.reason = "cylinder inclusion of the shorter band";
        if (evidence) {
            const auto ea = evidence(a.L), eb = evidence(b.L);
            if (ea && eb) {
                r.strict = *ea != *eb;
                r.reason += r.strict ? "; cylinder coverage classes differ (" + num(*ea) + " vs " + num(*eb) + ")"
                                     : "; cylinder coverage classes agree, non-equivalence not established";
            }
        } else {
            r.reason += "; no coverage evidence";
        }
        return r;
    }
    if (a.type == b.type) {
        r.relation = Relation::Equivalent;
        r.reason = "same type";
        return r;
    }
    const int ra = rank(a.type), rb = rank(b.type);
    if (ra == rb) {
        r.relation = Relation::Incomparable;
        r.reason = "types ii and iii are unordered";
        return r;
    }
    r.relation = ra < rb ? Relation::Precedes : Relation::Follows;
    r.strict = true;
    r.reason = std::string("type ") + roman(a.type) + (ra < rb ? " below " : " above ") + "type " + roman(b.type);
    return r;
}

MetricField grw_representative(const GRWClass& c) {
    Chart ch;
    ch.coords = {"t", "theta"};
    Interval I;
    std::string factor = "1";
    switch (c.type) {
        case GRWType::EinsteinStatic: break;
        case GRWType::ExpNeg:
            I = {0.0, kInf};
            factor = "1/t^2";
            break;
        case GRWType::ExpPos:
            I = {-kInf, 0.0};
            factor = "1/t^2";
            break;
        case GRWType::FiniteBand:
            if (!(c.L > 0.0 && std::isfinite(c.L))) throw InputError("band length must be positive and finite");
            I = {0.0, c.L};
            break;
    }
    ch.domain = {I, {0.0, 2 * std::numbers::pi}};
    const ScalarExpr f = ScalarExpr::parse(factor);
    std::vector<std::vector<ScalarExpr>> g = {{f, ScalarExpr::constant(0.0)}, {ScalarExpr::constant(0.0), -f}};
    return MetricField(ch, g, {ScalarExpr::constant(1.0), ScalarExpr::constant(0.0)});
}

DiffeoSpec grw_mapping_construct(const GRWClass& from, const GRWClass& to, const ConstructParams& p) {
    const std::vector<std::string> coords = {"t", "theta"};
    auto make = [&](const std::string& t_new, const std::string& dt_new) {
        std::vector<std::vector<ScalarExpr>> jac = {{ScalarExpr::parse(dt_new), ScalarExpr::constant(0.0)},
                                                    {ScalarExpr::constant(0.0), ScalarExpr::constant(1.0)}};
        return DiffeoSpec(coords, {ScalarExpr::parse(t_new), ScalarExpr::variable("theta")}, jac);
    };
    const double B = p.B.value_or(2.0);
    auto tan_map = [&](bool to_past) {
        const double L = from.L;
        const double A = p.A.value_or(2.0 * L / std::numbers::pi);
        if (!(A > 0.0)) throw InputError("A must be positive");
        const std::string k = num(std::numbers::pi / (2.0 * L));
        const std::string arg = to_past ? k + "*(t - " + num(L) + ")" : k + "*t";
        return make(num(A) + "*tan(" + arg + ")", num(A) + "*" + k + "*(1 + tan(" + arg + ")^2)");
    };
    auto hyp_map = [&]() {
        const double A = p.A.value_or(1.0);
        if (!(A > 0.0) || !(B > 0.0)) throw InputError("A and B must be positive");
        return make(num(B) + "*t - " + num(A) + "/t", num(B) + " + " + num(A) + "/t^2");
    };
    const GRWType f = from.type, t = to.type;
    if (f == t && f != GRWType::FiniteBand) return DiffeoSpec::identity(coords);
    if (f == GRWType::FiniteBand && t == GRWType::FiniteBand) {
        if (to.L + kBandTolerance < from.L) throw InputError("direction not provided by the theorem");
        const std::string s = num(to.L / from.L);
        return make(s + "*t", s);
    }
    if (f == GRWType::FiniteBand && t == GRWType::ExpNeg) return tan_map(false);
    if (f == GRWType::FiniteBand && t == GRWType::ExpPos) return tan_map(true);
    if ((f == GRWType::ExpNeg || f == GRWType::ExpPos) && t == GRWType::EinsteinStatic) return hyp_map();
    if (f == GRWType::FiniteBand && t == GRWType::EinsteinStatic) {
        ConstructParams inner = p;
        inner.A.reset();
        const DiffeoSpec first = grw_mapping_construct(from, GRWClass{GRWType::ExpNeg, kInf}, inner);
        ConstructParams outer = p;
        return grw_mapping_construct(GRWClass{GRWType::ExpNeg, kInf}, to, outer).compose(first);
    }
    throw InputError("direction not provided by the theorem");
}

namespace {

bool scale_invariant(const Interval& I) {
    return (I.lo == -kInf || I.lo == 0.0) && (I.hi == kInf || I.hi == 0.0);
}

}  // namespace

SplitResult split_mapping(const TimeProductSpec& s1, const TimeProductSpec& s2, const SampleGrid& grid) {
    if (!s1.separable() || !s2.separable()) throw InputError("split mapping needs Omega = 0");
    if (s1.chart().coords != s2.chart().coords) throw InputError("both specs must share one chart");
    if (!scale_invariant(s1.interval) || s1.interval.lo != s2.interval.lo || s1.interval.hi != s2.interval.hi)
        throw InputError("time interval must be unbounded and shared; reparameterize a bounded interval first");
    const MetricField g1 = s1.metric(), g2 = s2.metric();
    const Chart chart = s1.chart();
    const int n = chart.dim(), m = n - 1;

    std::vector<std::vector<double>> axes(n);
    std::vector<std::size_t> probe_from(n);
    for (int i = 0; i < n; ++i) axes[i] = probe_axis(grid, i, chart.domain[i], probe_from[i]);

    // fiber positions
    std::vector<Vec> xs;
    std::vector<bool> x_probe;
    {
        std::vector<std::size_t> idx(m, 0);
        while (true) {
            Vec x(m);
            bool probe = false;
            for (int j = 0; j < m; ++j) {
                x(j) = axes[j + 1][idx[j]];
                probe = probe || idx[j] >= probe_from[j + 1];
            }
            xs.push_back(x);
            x_probe.push_back(probe);
            int j = m - 1;
            while (j >= 0 && ++idx[j] == axes[j + 1].size()) idx[j--] = 0;
            if (j < 0) break;
        }
    }
    const auto& ts = axes[0];
    std::vector<std::string> slots = chart.coords;
    CompiledExpr r1(s1.rho, slots), r2(s2.rho, slots);
    std::vector<CompiledExpr> h1, h2;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            h1.emplace_back(s1.h[a][b], slots);
            h2.emplace_back(s2.h[a][b], slots);
        }

    SplitResult res;
    double k = kInf, N = 0.0;
    bool k_probe = false, N_probe = false;
    std::vector<double> pt(n);
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        for (int j = 0; j < m; ++j) pt[j + 1] = xs[xi](j);
        std::vector<double> rho1(ts.size()), rho2(ts.size());
        std::vector<Mat> H1(ts.size()), H2(ts.size());
        for (std::size_t ti = 0; ti < ts.size(); ++ti) {
            pt[0] = ts[ti];
            rho1[ti] = r1(pt);
            rho2[ti] = r2(pt);
            if (!(rho1[ti] > 0.0) || !(rho2[ti] > 0.0)) throw DomainError("rho must be positive");
            H1[ti] = Mat(m, m);
            H2[ti] = Mat(m, m);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) {
                    H1[ti](a, b) = h1[a * m + b](pt);
                    H2[ti](a, b) = h2[a * m + b](pt);
                }
        }
        const auto mn2 = std::min_element(rho2.begin(), rho2.end());
        const auto mx1 = std::max_element(rho1.begin(), rho1.end());
        const double kx = *mn2 / *mx1;
        if (kx < k) {
            k = kx;
            k_probe = x_probe[xi] || static_cast<std::size_t>(mn2 - rho2.begin()) >= probe_from[0] ||
                      static_cast<std::size_t>(mx1 - rho1.begin()) >= probe_from[0];
        }
        for (std::size_t t1 = 0; t1 < ts.size(); ++t1) {
            Eigen::LLT<Mat> llt(H1[t1]);
            if (llt.info() != Eigen::Success) throw DomainError("fiber metric h1 is not positive definite");
            const Mat Linv = llt.matrixL().solve(Mat::Identity(m, m));
            for (std::size_t t2 = 0; t2 < ts.size(); ++t2) {
                const Mat S = Linv * H2[t2] * Linv.transpose();
                const double rad = Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
                if (rad > N) {
                    N = rad;
                    N_probe = x_probe[xi] || t1 >= probe_from[0] || t2 >= probe_from[0];
                }
            }
        }
    }
    res.k = k;
    res.N = N;
    res.extrapolated = k_probe || N_probe;
    if (!(k > 1e-10)) throw DomainError("condition (i) fails: inf of rho2/rho1 vanishes on the grid (" + num(k) + ")");
    if (!(N < 1e10)) throw DomainError("condition (ii) fails on grid: fiber ratio unbounded (" + num(N) + ")");
    res.l = std::sqrt(N / k);
    if (res.l == 1.0) {
        res.map = DiffeoSpec::identity(chart.coords);
    } else {
        std::vector<ScalarExpr> comps;
        std::vector<std::vector<ScalarExpr>> jac(n, std::vector<ScalarExpr>(n, ScalarExpr::constant(0.0)));
        for (int i = 0; i < n; ++i) {
            comps.push_back(i == 0 ? ScalarExpr::constant(res.l) * ScalarExpr::variable(chart.coords[0])
                                   : ScalarExpr::variable(chart.coords[i]));
            jac[i][i] = ScalarExpr::constant(i == 0 ? res.l : 1.0);
        }
        res.map = DiffeoSpec(chart.coords, comps, jac);
    }
    res.verdict = check_causal_mapping(g1, g2, res.map, grid);
    return res;
}

std::size_t ArrivalField::node_index(const std::vector<int>& idx) const {
    std::size_t k = 0;
    for (std::size_t i = 0; i < axes.size(); ++i) k = k * axes[i].size() + static_cast<std::size_t>(idx[i]);
    return k;
}

Vec ArrivalField::node(std::size_t k) const {
    Vec x(static_cast<int>(axes.size()));
    for (int i = static_cast<int>(axes.size()) - 1; i >= 0; --i) {
        x(i) = axes[i][k % axes[i].size()];
        k /= axes[i].size();
    }
    return x;
}

std::size_t ArrivalField::nearest(const Vec& x) const {
    std::vector<int> idx(axes.size());
    for (std::size_t i = 0; i < axes.size(); ++i) {
        const auto& ax = axes[i];
        std::size_t best = 0;
        for (std::size_t j = 1; j < ax.size(); ++j)
            if (std::abs(ax[j] - x(static_cast<int>(i))) < std::abs(ax[best] - x(static_cast<int>(i)))) best = j;
        idx[i] = static_cast<int>(best);
    }
    return node_index(idx);
}

namespace {

struct ArrivalModel {
    int m = 0;
    std::vector<std::string> slots;
    CompiledExpr rho;
    std::vector<CompiledExpr> omega;
    std::vector<CompiledExpr> h;
    Interval interval;

    // Fiber speed along edge vector e at (t, x), in edge lengths per unit time.
    double speed(double t, const Vec& x, const Vec& e, double s) const {
        double pt[3];
        pt[0] = t;
        for (int j = 0; j < m; ++j) pt[j + 1] = x(j);
        const std::span<const double> sp(pt, static_cast<std::size_t>(m + 1));
        const double r = rho(sp);
        double om = 0.0, hee = 0.0;
        for (int a = 0; a < m; ++a) {
            if (!omega.empty()) om += omega[a](sp) * e(a);
            for (int b = 0; b < m; ++b) hee += h[a * m + b](sp) * e(a) * e(b);
        }
        if (!(r > 0.0) || !(hee > 0.0)) throw DomainError("time product degenerates at t = " + num(t));
        return (s * om + std::sqrt(om * om + r * hee)) / hee;
    }

    // Lapse to traverse the straight edge from x along e starting at time t,
    // or +inf when it exceeds `budget` or leaves the interval.
    double traverse(double t, const Vec& x, const Vec& e, double s, double budget) const {
        double tau = 0.0, lam = 0.0;
        auto f = [&](double ta, double la) { return speed(t + s * ta, x + la * e, e, s); };
        auto rk4 = [&](double ta, double la, double h) {
            const double k1 = f(ta, la);
            const double k2 = f(ta + h / 2, std::min(1.0, la + h / 2 * k1));
            const double k3 = f(ta + h / 2, std::min(1.0, la + h / 2 * k2));
            const double k4 = f(ta + h, std::min(1.0, la + h * k3));
            return la + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
        };
        for (int it = 0; it < 100000; ++it) {
            if (tau > budget) return kInf;
            const double h = std::min(0.1 / f(tau, lam), 0.5);
            const double next = rk4(tau, lam, h);
            if (next >= 1.0) {
                // secant on the step length so the last step ends on the node
                double lo = 0.0, hi = h, lam_hi = next;
                double hs = h * (1.0 - lam) / (next - lam);
                for (int k = 0; k < 6; ++k) {
                    const double v = rk4(tau, lam, hs);
                    if (std::abs(v - 1.0) < 1e-13) break;
                    if (v < 1.0) lo = hs;
                    else {
                        hi = hs;
                        lam_hi = v;
                    }
                    const double lam_lo = lo == 0.0 ? lam : rk4(tau, lam, lo);
                    hs = lo + (hi - lo) * (1.0 - lam_lo) / (lam_hi - lam_lo);
                }
                tau += hs;
                break;
            }
            lam = next;
            tau += h;
            if (!interval.contains(t + s * tau)) return kInf;
        }
        if (tau > budget || !interval.contains(t + s * tau)) return kInf;
        return tau;
    }
};

}  // namespace

ArrivalField arrival_time(const TimeProductSpec& spec, double t0, const Vec& x0, const ArrivalGrid& grid) {
    const int m = spec.fiber_dim();
    if (m < 1 || m > 2) throw InputError("arrival times need a fiber of dimension 1 or 2");
    if (x0.size() != m) throw InputError("base point does not match the fiber");
    if (!spec.interval.contains(t0)) throw InputError("base time outside the interval");
    spec.metric();  // validates shapes

    ArrivalModel model;
    model.m = m;
    model.slots = spec.chart().coords;
    model.rho = CompiledExpr(spec.rho, model.slots);
    for (const auto& o : spec.omega) model.omega.emplace_back(o, model.slots);
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) model.h.emplace_back(spec.h[a][b], model.slots);
    model.interval = spec.interval;

    ArrivalField out;
    out.base_time = t0;
    out.max_lapse = grid.max_lapse;
    std::vector<bool> periodic(m, false);
    std::vector<double> spacing(m);
    for (int i = 0; i < m; ++i) {
        const int M = i < static_cast<int>(grid.counts.size()) ? grid.counts[i] : 201;
        if (M < 2) throw InputError("arrival grid needs at least two nodes per axis");
        Interval w = i < static_cast<int>(grid.window.size()) ? grid.window[i]
                     : (i < static_cast<int>(spec.fiber_domain.size()) && spec.fiber_domain[i].bounded())
                         ? spec.fiber_domain[i]
                         : Interval{-10.0, 10.0};
        if (!w.bounded() || !(w.lo < w.hi)) throw InputError("arrival window must be bounded");
        periodic[i] = i < static_cast<int>(grid.periodic.size()) && grid.periodic[i];
        spacing[i] = (w.hi - w.lo) / (periodic[i] ? M : M - 1);
        std::vector<double> ax(M);
        for (int k = 0; k < M; ++k) ax[k] = w.lo + k * spacing[i];
        out.axes.push_back(std::move(ax));
    }
    out.spacing = *std::max_element(spacing.begin(), spacing.end());
    out.base_node = out.nearest(x0);

    std::vector<std::vector<int>> offsets;
    if (m == 1) {
        offsets = {{1}, {-1}};
    } else {
        for (int a = -2; a <= 2; ++a)
            for (int b = -2; b <= 2; ++b)
                if ((a || b) && std::gcd(std::abs(a), std::abs(b)) == 1) offsets.push_back({a, b});
    }

    std::size_t total = 1;
    for (const auto& ax : out.axes) total *= ax.size();
    auto unpack = [&](std::size_t k) {
        std::vector<int> idx(m);
        for (int i = m - 1; i >= 0; --i) {
            idx[i] = static_cast<int>(k % out.axes[i].size());
            k /= out.axes[i].size();
        }
        return idx;
    };

    for (double s : {1.0, -1.0}) {
        std::vector<double> best(total, kInf);
        std::vector<bool> done(total, false);
        using Item = std::pair<double, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        best[out.base_node] = 0.0;
        pq.push({0.0, out.base_node});
        while (!pq.empty()) {
            const auto [tau, k] = pq.top();
            pq.pop();
            if (done[k]) continue;
            done[k] = true;
            const std::vector<int> idx = unpack(k);
            const Vec x = out.node(k);
            for (const auto& off : offsets) {
                std::vector<int> nidx = idx;
                Vec e(m);
                bool ok = true;
                for (int i = 0; i < m; ++i) {
                    const int M = static_cast<int>(out.axes[i].size());
                    nidx[i] = idx[i] + off[i];
                    if (periodic[i]) nidx[i] = ((nidx[i] % M) + M) % M;
                    else if (nidx[i] < 0 || nidx[i] >= M) ok = false;
                    e(i) = off[i] * spacing[i];
                }
                if (!ok) continue;
                const std::size_t nk = out.node_index(nidx);
                if (done[nk]) continue;
                const double budget = std::min(grid.max_lapse, best[nk]) - tau;
                if (budget <= 0.0) continue;
                const double dt = model.traverse(t0 + s * tau, x, e, s, budget);
                if (tau + dt < best[nk]) {
                    best[nk] = tau + dt;
                    pq.push({best[nk], nk});
                }
            }
        }
        (s > 0 ? out.t_plus : out.t_minus) = std::move(best);
    }
    return out;
}

HorizonReport horizon_check(const TimeProductSpec& spec, const Vec& x0, const ArrivalGrid& grid,
                            const std::vector<double>& times) {
    HorizonReport rep;
    rep.no_past_horizon = true;
    rep.no_future_horizon = true;
    // node layout from a throwaway run at the first time
    if (times.empty()) throw InputError("horizon check needs sample times");
    const ArrivalField layout = arrival_time(spec, times.front(), x0, grid);
    const std::size_t target = layout.nearest(x0);
    const std::size_t stride = std::max<std::size_t>(1, layout.nodes() / 17);
    for (double t : times) {
        for (std::size_t k = 0; k < layout.nodes(); k += stride) {
            const ArrivalField f = arrival_time(spec, t, layout.node(k), grid);
            ++rep.samples;
            if (!std::isfinite(f.t_plus[target])) rep.no_past_horizon = false;
            if (!std::isfinite(f.t_minus[target])) rep.no_future_horizon = false;
        }
    }
    std::ostringstream os;
    os << "finite within the computational window: fiber";
    for (const auto& ax : layout.axes) os << " [" << ax.front() << ", " << ax.back() << "]";
    os << ", " << times.size() << " sample times, max lapse " << grid.max_lapse;
    rep.window = os.str();
    return rep;
}

namespace {

// Sampled bounds of f over the interval, approaching finite ends dyadically
// and infinite ends geometrically.
std::pair<double, double> sampled_bounds(const GRWSpec& s) {
    CompiledExpr f(s.f, {s.time_coord});
    const double c = default_anchor(s.interval);
    double lo = kInf, hi = 0.0;
    auto visit = [&](double t) {
        if (!(t > s.interval.lo && t < s.interval.hi)) return;
        double v;
        try {
            v = f(std::span<const double>(&t, 1));
        } catch (const DomainError&) {
            v = kInf;  // overflow counts as unbounded
        }
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    };
    for (double end : {s.interval.lo, s.interval.hi}) {
        const double dir = end > c ? 1.0 : -1.0;
        for (int k = 0; k <= 400; ++k) {
            const double u = k / 400.0;
            visit(std::isfinite(end) ? c + (end - c) * u : c + dir * std::tan(u * 1.5));
        }
        for (int k = 1; k <= 45; ++k)
            visit(std::isfinite(end) ? end + (c - end) * std::ldexp(1.0, -k) : c + dir * std::ldexp(1.0, k));
    }
    return {lo, hi};
}

}  // namespace

ObstructionReport grw_obstruction(const GRWSpec& g1, const GRWSpec& g2, const QuadratureConfig& q) {
    ObstructionReport r;
    r.p1 = conformal_interval(g1, std::nullopt, q);
    r.p2 = conformal_interval(g2, std::nullopt, q);
    bool unknown = false;
    std::vector<std::string> notes;
    auto compare = [&](const EndIntegral& a, const EndIntegral& b, const char* which) {
        if (a.kind == EndKind::Unknown || b.kind == EndKind::Unknown) {
            unknown = true;
            notes.push_back(std::string(which) + " integral undecided");
            return;
        }
        if (a.kind == EndKind::Infinite && b.kind == EndKind::Finite) {
            r.first_not_below_second = true;
            notes.push_back(std::string(which) + " integral infinite for the first, finite for the second");
        }
        if (a.kind == EndKind::Finite && b.kind == EndKind::Infinite) {
            r.second_not_below_first = true;
            notes.push_back(std::string(which) + " integral finite for the first, infinite for the second");
        }
    };
    compare(r.p1.past, r.p2.past, "past");
    compare(r.p1.future, r.p2.future, "future");
    auto join = [&] {
        std::string s;
        for (const auto& n : notes) s += (s.empty() ? "" : "; ") + n;
        return s;
    };
    if (r.first_not_below_second || r.second_not_below_first) {
        r.related = "no";
        r.reason = join();
        return r;
    }
    const bool same_base = g1.interval.lo == g2.interval.lo && g1.interval.hi == g2.interval.hi &&
                           g1.fiber == g2.fiber && g1.compact_fiber == g2.compact_fiber;
    if (same_base && g1.f.to_string() == g2.f.to_string()) {
        r.related = "isocausal";
        r.reason = "identical warping functions";
        return r;
    }
    if (same_base) {
        const auto [lo1, hi1] = sampled_bounds(g1);
        const auto [lo2, hi2] = sampled_bounds(g2);
        if (lo1 > 1e-8 && lo2 > 1e-8 && hi1 < 1e8 && hi2 < 1e8) {
            r.related = "isocausal";
            r.reason = "both warping functions bounded away from 0 and infinity on samples: [" + num(lo1) + ", " +
                       num(hi1) + "] and [" + num(lo2) + ", " + num(hi2) + "]";
            return r;
        }
    }
    r.related = "unknown";
    notes.push_back(unknown ? "no obstruction among decided integrals" : "integral test does not separate them");
    r.reason = join();
    return r;
}

ProbeReport desitter_instability_probe(double amplitude, double width, const BandEvidence& evidence,
                                       const QuadratureConfig& q) {
    if (!(width > 0.0)) throw InputError("bump width must be positive");
    const double a = std::abs(amplitude);
    const std::string w = num(width);
    const std::string bump = "piecewise(abs(t/" + w + ") < 1, exp(1 - 1/(1 - (t/" + w + ")^2)), 0)";
    ProbeReport rep;
    rep.f_minus = "cosh(t) + " + num(a) + "*" + bump;
    rep.f_plus = "cosh(t) - " + num(a) + "*" + bump;
    {
        CompiledExpr fp(ScalarExpr::parse(rep.f_plus), {"t"});
        for (int k = 0; k <= 4000; ++k) {
            const double t = -width + 2.0 * width * k / 4000.0;
            const double v = fp(std::span<const double>(&t, 1));
            if (!(v > 0.0)) throw DomainError("bump makes f <= 0 at t = " + num(t));
        }
    }
    auto band = [&](const std::string& f) {
        GRWSpec s;
        s.interval = Interval{};
        s.f = ScalarExpr::parse(f);
        s.compact_fiber = true;
        const IntervalProfile p = conformal_interval(s, 0.0, q);
        rep.error = std::max(rep.error, p.error);
        return class_from_profile(p);
    };
    rep.c_minus = band(rep.f_minus);
    rep.c_zero = band("cosh(t)");
    rep.c_plus = band(rep.f_plus);
    rep.L_minus = rep.c_minus.L;
    rep.L_zero = rep.c_zero.L;
    rep.L_plus = rep.c_plus.L;
    rep.minus_zero = grw_order(rep.c_minus, rep.c_zero, evidence);
    rep.zero_plus = grw_order(rep.c_zero, rep.c_plus, evidence);
    rep.minus_plus = grw_order(rep.c_minus, rep.c_plus, evidence);
    return rep;
}

}  // namespace isocausal
