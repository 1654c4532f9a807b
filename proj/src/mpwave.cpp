#include "isocausal/mpwave.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace isocausal {

namespace {

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

std::string fiber_name(int j) { return "x" + std::to_string(j + 1); }

bool depends_on(const ScalarExpr& e, const std::string& var) {
    const auto fv = e.free_variables();
    return std::find(fv.begin(), fv.end(), var) != fv.end();
}

bool depends_on_any(const ScalarExpr& e, const std::vector<std::string>& vars) {
    return std::any_of(vars.begin(), vars.end(), [&](const std::string& v) { return depends_on(e, v); });
}

}  // namespace

Chart MpWaveSpec::chart() const {
    Chart c;
    c.coords = {"u", "v"};
    c.domain = {Interval{}, Interval{}};
    for (int j = 0; j < fiber_dim(); ++j) {
        c.coords.push_back(fiber_coords[j]);
        c.domain.push_back(fiber_domain.empty() ? Interval{} : fiber_domain.at(j));
    }
    return c;
}

MetricField MpWaveSpec::metric() const {
    const int m = fiber_dim();
    if (m < 1) throw InputError("mp-wave needs at least one fiber coordinate");
    if (!fiber_domain.empty() && static_cast<int>(fiber_domain.size()) != m)
        throw InputError("fiber domain needs one interval per fiber coordinate");
    if (static_cast<int>(h.size()) != m) throw InputError("fiber metric size does not match the fiber chart");
    const int n = m + 2;
    std::vector<std::vector<ScalarExpr>> comps(n, std::vector<ScalarExpr>(n, ScalarExpr::constant(0.0)));
    comps[0][0] = H;
    comps[0][1] = comps[1][0] = ScalarExpr::constant(1.0);
    for (int a = 0; a < m; ++a) {
        if (static_cast<int>(h[a].size()) != m) throw InputError("fiber metric must be square");
        for (int b = 0; b < m; ++b) comps[a + 2][b + 2] = -h[a][b];
    }
    std::vector<ScalarExpr> o(n, ScalarExpr::constant(0.0));
    o[0] = ScalarExpr::constant(1.0);
    o[1] = ScalarExpr::parse("1 + abs(H)").substitute({{"H", H}});
    return MetricField(chart(), comps, o);
}

Mat PlaneWaveSpec::fiber_metric() const {
    const int m = fiber_dim();
    return h.size() == 0 ? Mat(Mat::Identity(m, m)) : h;
}

void PlaneWaveSpec::validate() const {
    const int m = fiber_dim();
    if (m < 1) throw InputError("frequency matrix is empty");
    for (const auto& row : A) {
        if (static_cast<int>(row.size()) != m) throw InputError("frequency matrix must be square");
        for (const auto& e : row) {
            for (const auto& v : e.free_variables())
                if (v != "u") throw InputError("frequency matrix may depend on u only, found '" + v + "'");
            if (locally_symmetric && !e.free_variables().empty())
                throw InputError("locally symmetric wave needs a constant frequency matrix");
        }
    }
    const Mat hm = fiber_metric();
    if (hm.rows() != m || hm.cols() != m) throw InputError("fiber metric size does not match the frequency matrix");
    if ((hm - hm.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, hm.cwiseAbs().maxCoeff()))
        throw InputError("fiber metric must be symmetric");
    if (Eigen::LLT<Mat>(hm).info() != Eigen::Success) throw InputError("fiber metric must be positive definite");
}

Mat PlaneWaveSpec::frequency(double u) const {
    const int m = fiber_dim();
    Mat F(m, m);
    const std::map<std::string, double, std::less<>> env{{"u", u}};
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) F(a, b) = A[a][b].eval(env);
    if ((F - F.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, F.cwiseAbs().maxCoeff()))
        throw InputError("frequency matrix must be symmetric (u = " + num(u) + ")");
    return 0.5 * (F + F.transpose());
}

MpWaveSpec PlaneWaveSpec::as_mpwave() const {
    validate();
    const int m = fiber_dim();
    const Mat hm = fiber_metric();
    MpWaveSpec s;
    ScalarExpr H = ScalarExpr::constant(0.0);
    bool first = true;
    for (int a = 0; a < m; ++a) {
        s.fiber_coords.push_back(fiber_name(a));
        for (int b = 0; b < m; ++b) {
            const ScalarExpr term = A[a][b] * ScalarExpr::variable(fiber_name(a)) * ScalarExpr::variable(fiber_name(b));
            H = first ? term : H + term;
            first = false;
        }
    }
    s.H = H;
    s.h.assign(m, std::vector<ScalarExpr>(m));
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) s.h[a][b] = ScalarExpr::constant(hm(a, b));
    return s;
}

SampleGrid mp_default_grid(const Chart& chart) {
    const int n = chart.dim();
    int per = static_cast<int>(std::floor(std::pow(50000.0, 1.0 / n)));
    if (per % 2 == 0) --per;  // keep the axis centre on the grid
    return SampleGrid(chart, std::clamp(per, 5, 41));
}

MpResult mp_causal_check(const MpWaveSpec& s1, const MpWaveSpec& s2, const SampleGrid& grid) {
    const MetricField g1 = s1.metric(), g2 = s2.metric();
    const Chart chart = s1.chart();
    if (chart.coords != s2.chart().coords) throw InputError("both waves must share one chart");
    const int n = chart.dim(), m = n - 2;
    const std::vector<std::string>& slots = chart.coords;
    const std::vector<std::string> fiber(slots.begin() + 2, slots.end());

    std::vector<std::vector<double>> axes(n);
    std::vector<std::size_t> probe_from(n);
    for (int i = 0; i < n; ++i) axes[i] = probe_axis(grid, i, chart.domain[i], probe_from[i]);

    CompiledExpr H1(s1.H, slots), H2(s2.H, slots);
    std::vector<CompiledExpr> h1, h2;
    bool h_u = false, h_x = false;
    for (int a = 0; a < m; ++a)
        for (int b = 0; b < m; ++b) {
            h1.emplace_back(s1.h[a][b], slots);
            h2.emplace_back(s2.h[a][b], slots);
            for (const auto* e : {&s1.h[a][b], &s2.h[a][b]}) {
                h_u = h_u || depends_on(*e, "u");
                h_x = h_x || depends_on_any(*e, fiber);
            }
        }
    const bool H_u = depends_on(s1.H, "u") || depends_on(s2.H, "u");

    // fiber positions, axis 2 slowest
    std::vector<std::vector<double>> xs;
    std::vector<bool> x_probe;
    {
        std::vector<std::size_t> idx(m, 0);
        while (true) {
            std::vector<double> x(m);
            bool probe = false;
            for (int j = 0; j < m; ++j) {
                x[j] = axes[j + 2][idx[j]];
                probe = probe || idx[j] >= probe_from[j + 2];
            }
            xs.push_back(x);
            x_probe.push_back(probe);
            int j = m - 1;
            while (j >= 0 && ++idx[j] == axes[j + 2].size()) idx[j--] = 0;
            if (j < 0) break;
        }
    }
    const std::vector<double> us = H_u || h_u ? axes[0] : std::vector<double>{0.0};
    std::vector<double> pt(n, 0.0);

    // per fiber point: sup_u H1 and inf_u H2, with u1 and u2 independent
    std::vector<double> sup1(xs.size()), inf2(xs.size());
    for (std::size_t xi = 0; xi < xs.size(); ++xi) {
        for (int j = 0; j < m; ++j) pt[j + 2] = xs[xi][j];
        double s = -kInf, i2 = kInf;
        for (double u : H_u ? us : std::vector<double>{0.0}) {
            pt[0] = u;
            s = std::max(s, H1(pt));
            i2 = std::min(i2, H2(pt));
        }
        if (!std::isfinite(s) || !std::isfinite(i2)) throw NumericalError("profile H is not finite on the grid");
        sup1[xi] = s;
        inf2[xi] = i2;
    }

    // a^2 = sup of the spectral radius of h1[u1]^-1 h2[u2]
    MpResult res;
    double a2 = 0.0;
    bool a_probe = false;
    const std::size_t x_count = h_x ? xs.size() : 1;
    const std::vector<double> hu = h_u ? us : std::vector<double>{0.0};
    for (std::size_t xi = 0; xi < x_count; ++xi) {
        for (int j = 0; j < m; ++j) pt[j + 2] = xs[xi][j];
        std::vector<Mat> M1, M2;
        for (double u : hu) {
            pt[0] = u;
            Mat A1(m, m), A2(m, m);
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) {
                    A1(a, b) = h1[a * m + b](pt);
                    A2(a, b) = h2[a * m + b](pt);
                }
            M1.push_back(A1);
            M2.push_back(A2);
        }
        for (std::size_t u1 = 0; u1 < hu.size(); ++u1) {
            Eigen::LLT<Mat> llt(M1[u1]);
            if (llt.info() != Eigen::Success) throw DomainError("fiber metric h1 is not positive definite");
            const Mat Linv = llt.matrixL().solve(Mat::Identity(m, m));
            for (std::size_t u2 = 0; u2 < hu.size(); ++u2) {
                const Mat S = Linv * M2[u2] * Linv.transpose();
                const auto ev = Eigen::SelfAdjointEigenSolver<Mat>(S, Eigen::EigenvaluesOnly).eigenvalues();
                if (!(ev.minCoeff() > 0.0)) throw DomainError("fiber metric h2 is not positive definite");
                if (ev.maxCoeff() > a2) {
                    a2 = ev.maxCoeff();
                    a_probe = x_probe[xi] || (h_u && (u1 >= probe_from[0] || u2 >= probe_from[0]));
                }
            }
        }
    }
    if (!(a2 < 1e10)) throw DomainError("fiber ratio unbounded on grid (" + num(a2) + ")");
    res.a = std::sqrt(a2);
    res.extrapolated = a_probe;

    // k2 / k1 on a log grid, nearest feasible value to 1
    auto feasible = [&](double r) {
        for (std::size_t xi = 0; xi < xs.size(); ++xi) {
            const double tol = 1e-12 * std::max({1.0, std::fabs(sup1[xi]), std::fabs(inf2[xi])});
            if (r * inf2[xi] < sup1[xi] - tol) return false;
        }
        return true;
    };
    int best = -1;
    for (int j = 0; j <= 120; ++j) {
        if (!feasible(std::pow(10.0, -6.0 + 0.1 * j))) continue;
        if (best < 0 || std::abs(j - 60) < std::abs(best - 60)) best = j;
    }
    if (best < 0) {
        res.reason = "no ratio k2/k1 in [1e-6, 1e6] satisfies k2 H2 >= k1 H1 on the grid; conditions not certified";
        res.verdict.reason = res.reason;
        return res;
    }
    res.certified = true;
    res.r = best == 60 ? 1.0 : std::pow(10.0, -6.0 + 0.1 * best);
    if (res.r >= 1.0) {
        res.k1 = 1.0;
        res.k2 = res.r;
    } else {
        res.k1 = 1.0 / res.r;
        res.k2 = 1.0;
    }

    const double cu = res.a * res.k2, cv = res.a * res.k1;
    if (cu == 1.0 && cv == 1.0) {
        res.map = DiffeoSpec::identity(chart.coords);
    } else {
        std::vector<ScalarExpr> comps;
        std::vector<std::vector<ScalarExpr>> jac(n, std::vector<ScalarExpr>(n, ScalarExpr::constant(0.0)));
        for (int i = 0; i < n; ++i) {
            const double c = i == 0 ? cu : i == 1 ? cv : 1.0;
            comps.push_back(c == 1.0 ? ScalarExpr::variable(slots[i])
                                     : ScalarExpr::constant(c) * ScalarExpr::variable(slots[i]));
            jac[i][i] = ScalarExpr::constant(c);
        }
        res.map = DiffeoSpec(chart.coords, comps, jac);
    }
    res.verdict = check_causal_mapping(g1, g2, res.map, grid);
    res.reason = "u -> " + num(cu) + " u, v -> " + num(cv) + " v";
    return res;
}

std::vector<double> default_u_grid(int count) {
    std::vector<double> u(count);
    for (int i = 0; i < count; ++i) u[i] = std::tan(-M_PI / 2 + M_PI * (i + 0.5) / count);
    return u;
}

FrequencyProfile planewave_profile(const PlaneWaveSpec& spec, const std::vector<double>& u) {
    spec.validate();
    if (u.empty()) throw InputError("no u samples");
    const Mat hm = spec.fiber_metric();
    FrequencyProfile p;
    p.u = u;
    p.max_sup = 0.0;
    p.min_inf = kInf;
    bool all_pos = true, all_neg = true;
    for (double s : u) {
        const Mat F = spec.frequency(s);
        const Vec ev = Eigen::GeneralizedSelfAdjointEigenSolver<Mat>(F, hm, Eigen::EigenvaluesOnly).eigenvalues();
        const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
        Signature sig;
        for (double l : ev) {
            if (l > 1e-12 * scale) ++sig.positives;
            else if (l < -1e-12 * scale) ++sig.negatives;
            else ++sig.zeros;
        }
        if (!p.signature.empty()) {
            const Signature& q = p.signature.back();
            if (q.positives != sig.positives || q.negatives != sig.negatives || q.zeros != sig.zeros)
                p.constant_signature = false;
        }
        all_pos = all_pos && sig.positives == spec.fiber_dim();
        all_neg = all_neg && sig.negatives == spec.fiber_dim();
        p.signature.push_back(sig);
        p.abs_max.push_back(ev.cwiseAbs().maxCoeff());
        p.abs_min.push_back(ev.cwiseAbs().minCoeff());
        p.max_sup = std::max(p.max_sup, p.abs_max.back());
        p.min_inf = std::min(p.min_inf, p.abs_min.back());
    }
    p.definiteness = all_pos ? 1 : all_neg ? -1 : 0;
    p.self_ratio = p.min_inf > 0.0 ? p.max_sup / p.min_inf : kInf;
    return p;
}

PolVerdict pol_check(const PlaneWaveSpec& s1, const PlaneWaveSpec& s2, const std::vector<double>& u) {
    if (s1.fiber_dim() != s2.fiber_dim()) throw InputError("both waves must have the same fiber dimension");
    const FrequencyProfile p1 = planewave_profile(s1, u), p2 = planewave_profile(s2, u);
    for (const auto* p : {&p1, &p2}) {
        if (!p->constant_signature) throw InputError("frequency matrix changes signature across u");
        if (p->definiteness == 0) throw InputError("frequency matrix is not definite");
    }
    if (p1.definiteness != p2.definiteness) throw InputError("frequency matrices are definite with opposite signs");

    PolVerdict v;
    v.ratio12 = v.ratio21 = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        v.ratio12 = std::max(v.ratio12, p2.abs_min[i] > 0.0 ? p1.abs_max[i] / p2.abs_min[i] : kInf);
        v.ratio21 = std::max(v.ratio21, p1.abs_min[i] > 0.0 ? p2.abs_max[i] / p1.abs_min[i] : kInf);
    }
    v.ratio12_decoupled = p2.min_inf > 0.0 ? p1.max_sup / p2.min_inf : kInf;
    v.ratio21_decoupled = p1.min_inf > 0.0 ? p2.max_sup / p1.min_inf : kInf;

    const MpWaveSpec w1 = s1.as_mpwave(), w2 = s2.as_mpwave();
    const SampleGrid grid = mp_default_grid(w1.chart());
    v.forward = mp_causal_check(w1, w2, grid);
    v.backward = mp_causal_check(w2, w1, grid);
    const bool bounded = v.ratio12_decoupled < 1e12 && v.ratio21_decoupled < 1e12;
    const bool fwd = v.forward.certified && v.forward.verdict.outcome == MapOutcome::Causal;
    const bool bwd = v.backward.certified && v.backward.verdict.outcome == MapOutcome::Causal;
    v.isocausal = bounded && fwd && bwd;
    if (!bounded) v.reason = "eigenvalue ratio unbounded on the u samples";
    else if (!fwd) v.reason = "forward map not verified: " + (v.forward.certified ? v.forward.verdict.reason : v.forward.reason);
    else if (!bwd) v.reason = "backward map not verified: " + (v.backward.certified ? v.backward.verdict.reason : v.backward.reason);
    else v.reason = "causal maps verified in both directions";
    return v;
}

WeylReport weyl_flatness(const Mat& Q, int n) {
    if (n < 4) throw InputError("Weyl tensor vanishes identically for n < 4; flatness is not informative");
    if (Q.rows() != n - 2 || Q.cols() != n - 2) throw InputError("Q must be (n-2) x (n-2)");
    const double scale = std::max(1.0, Q.cwiseAbs().maxCoeff());
    if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw InputError("Q must be symmetric");
    WeylReport r;
    r.lambda = Q.trace() / (n - 2);
    r.components = -Q + r.lambda * Mat::Identity(n - 2, n - 2);
    r.flat = r.components.cwiseAbs().maxCoeff() < 1e-12 * scale;
    return r;
}

const char* to_string(BoundaryKind k) {
    switch (k) {
        case BoundaryKind::NullLine1A: return "NullLine1A";
        case BoundaryKind::SandwichPlanes1B: return "SandwichPlanes1B";
        case BoundaryKind::MarolfRossLine: return "MarolfRossLine";
        case BoundaryKind::Unknown: return "Unknown";
    }
    return "?";
}

BoundaryReport boundary_report(const PlaneWaveSpec& spec) {
    spec.validate();
    for (const auto& row : spec.A)
        for (const auto& e : row)
            if (!e.free_variables().empty()) throw InputError("boundary report needs a constant frequency matrix");
    const int m = spec.fiber_dim();
    const Mat hm = spec.fiber_metric();
    const Mat Linv = Eigen::LLT<Mat>(hm).matrixL().solve(Mat::Identity(m, m));
    BoundaryReport r;
    r.canonical_Q = Linv * spec.frequency(0.0) * Linv.transpose();
    r.canonical_Q = 0.5 * (r.canonical_Q + r.canonical_Q.transpose());
    r.signature = signature(SymMatrix(r.canonical_Q), 1e-12 * std::max(1.0, r.canonical_Q.cwiseAbs().maxCoeff()));
    if (r.signature.zeros > 0) throw InputError("degenerate frequency matrix");
    const double lambda = r.canonical_Q.trace() / m;
    r.conformally_flat = (r.canonical_Q - lambda * Mat::Identity(m, m)).cwiseAbs().maxCoeff() <
                         1e-12 * std::max(1.0, r.canonical_Q.cwiseAbs().maxCoeff());
    if (r.signature.negatives == m) {
        r.kind = BoundaryKind::SandwichPlanes1B;
        r.chain = r.conformally_flat
                      ? "conformal to a region of Minkowski space between two lightlike hyperplanes"
                      : "causal maps both ways to the flat wave with Q = -I (definite, bounded ratio), "
                        "which is conformal to a region between two lightlike hyperplanes";
    } else if (r.signature.positives == m && r.conformally_flat) {
        r.kind = BoundaryKind::NullLine1A;
        r.chain = "conformally flat with Q > 0: the causal boundary is a single null line";
    } else if (r.signature.positives > 0) {
        r.kind = BoundaryKind::MarolfRossLine;
        r.chain = r.signature.negatives == 0
                      ? "causal maps both ways to the flat wave with Q = I: the causal boundary is a single null line"
                      : "a positive eigenvalue: the causal boundary is a single null line";
    } else {
        r.kind = BoundaryKind::Unknown;
        r.chain = "no boundary result for this signature";
    }
    return r;
}

}  // namespace isocausal
