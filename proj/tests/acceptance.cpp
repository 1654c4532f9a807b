// Acceptance runner: one PASS/FAIL line per criterion with its wall time.
// Usage: acceptance <path-to-cli>

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "json.hpp"

#include "isocausal/causal.hpp"
#include "isocausal/discrete.hpp"
#include "isocausal/grw.hpp"
#include "isocausal/mapping.hpp"
#include "isocausal/mpwave.hpp"

using namespace isocausal;
using json = nlohmann::json;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
    bool ok = true;
    std::ostringstream detail;

    void check(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << " [failed: " << what << "]";
        }
    }
};

std::string cli_path;

// Runs the CLI and returns (exit code, parsed stdout).
std::pair<int, json> run_cli(const std::string& args) {
    const std::string cmd = "\"" + cli_path + "\" " + args + " 2>/dev/null";
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return {-1, json()};
    std::string out;
    std::array<char, 4096> buf;
    std::size_t n;
    while ((n = std::fread(buf.data(), 1, buf.size(), p)) > 0) out.append(buf.data(), n);
    const int status = pclose(p);
    const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, json::parse(out, nullptr, false)};
}

GRWSpec grw(const std::string& f, Interval I = {}, bool compact = true) {
    GRWSpec s;
    s.interval = I;
    s.f = ScalarExpr::parse(f);
    s.compact_fiber = compact;
    return s;
}

MetricField field2(Interval it, Interval ix, const std::string& gtt, const std::string& gxx) {
    Chart c;
    c.coords = {"t", "x"};
    c.domain = {it, ix};
    std::vector<std::vector<ScalarExpr>> comps{{ScalarExpr::parse(gtt), ScalarExpr::parse("0")},
                                               {ScalarExpr::parse("0"), ScalarExpr::parse(gxx)}};
    return MetricField(std::move(c), comps, {ScalarExpr::parse("1"), ScalarExpr::parse("0")});
}

PlaneWaveSpec diag_wave(double a, double b) {
    PlaneWaveSpec s;
    s.A = {{ScalarExpr::parse(std::to_string(a)), ScalarExpr::parse("0")},
           {ScalarExpr::parse("0"), ScalarExpr::parse(std::to_string(b))}};
    return s;
}

Mat random_frame(int n, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    Mat A(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) A(i, j) = u(rng) + (i == j ? 1.0 : 0.0);
    return A;
}

std::optional<int> cylinder_evidence(double L) { return cylinder_rank(L).rank; }

Outcome conformal_length() {
    Outcome o;
    const GRWClass c = grw_classify(grw("cosh(t)"));
    o.check(c.type == GRWType::FiniteBand, "library type");
    o.check(std::abs(c.L - kPi) < 1e-8, "library L");
    const auto [code, rep] = run_cli("grw classify --f \"cosh(t)\" --interval -inf inf --fiber sphere");
    o.check(code == 0, "cli exit code");
    const bool parsed = rep.is_object() && rep.contains("result");
    o.check(parsed, "cli report");
    if (parsed) {
        const json& cls = rep["result"]["class"];
        o.check(cls.value("type", "") == "FiniteBand", "cli type");
        o.check(std::abs(cls.value("L", 0.0) - kPi) < 1e-8, "cli L");
    }
    o.detail << " |L-pi| = " << std::abs(c.L - kPi);
    return o;
}

Outcome four_types() {
    Outcome o;
    const std::array<std::pair<const char*, GRWType>, 4> table{{{"1", GRWType::EinsteinStatic},
                                                                {"exp(-t)", GRWType::ExpNeg},
                                                                {"exp(t)", GRWType::ExpPos},
                                                                {"cosh(t)", GRWType::FiniteBand}}};
    for (const auto& [f, expect] : table) {
        const auto start = std::chrono::steady_clock::now();
        const GRWClass c = grw_classify(grw(f));
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        o.check(c.type == expect, std::string("type of ") + f);
        o.check(secs < 1.0, std::string("time of ") + f);
        o.detail << " " << f << "->" << roman(c.type);
    }
    return o;
}

Outcome power_laws() {
    Outcome o;
    const Interval half{0.0, kInf};
    const std::vector<std::string> fs = {"t^0.5", "t", "t^2"};
    int flagged = 0;
    for (std::size_t a = 0; a < fs.size(); ++a)
        for (std::size_t b = a + 1; b < fs.size(); ++b) {
            const auto r = grw_obstruction(grw(fs[a], half, false), grw(fs[b], half, false));
            if (r.related == "no" && (r.first_not_below_second || r.second_not_below_first)) ++flagged;
        }
    o.check(flagged == 3, "three pairs flagged");
    o.detail << " flagged " << flagged << "/3";
    return o;
}

Outcome oracle_agreement() {
    Outcome o;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> ent(-2.0, 2.0);
    int compared = 0, skipped = 0, disagree = 0;
    for (int n = 2; n <= 4; ++n)
        for (int trial = 0; trial < 500; ++trial) {
            Vec d = -Vec::Ones(n);
            d(0) = 1.0;
            const Mat P = random_frame(n, rng);
            const SymMatrix g(Mat(P.transpose() * d.asDiagonal() * P));
            Mat Tm(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = i; j < n; ++j) Tm(i, j) = Tm(j, i) = ent(rng);
            if (trial % 2) Tm = Tm * 0.2 + 2.0 * g.mat();
            const SymMatrix T(Tm);
            const Vec orient = P.inverse() * Vec::Unit(n, 0);
            const DPReport r = classify_dp(g, T, orient);
            if (std::fabs(r.margin) < 1e-6) {
                ++skipped;
                continue;
            }
            const OracleResult orc = null_oracle(g, T, orient, 4096, 42);
            const bool oracle_future = orc.min_value >= -1e-7;
            disagree += oracle_future != (r.classification == DPClass::Future);
            ++compared;
        }
    o.check(disagree == 0, "zero disagreements");
    o.detail << " compared " << compared << ", skipped " << skipped << ", disagreements " << disagree;
    return o;
}

Outcome corner_fixture() {
    Outcome o;
    Mat gm(2, 2);
    gm << 0, -1, -1, 0;
    const SymMatrix g(gm);
    Vec orient(2);
    orient << -1, 1;
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-2.0, 2.0);
    int algebraic = 0;
    for (int i = 0; i < 100; ++i) {
        const double f = counterexample_f(U(rng), U(rng));
        Mat T(2, 2);
        T << 2 * f, -1, -1, 0;
        const DPReport r = classify_dp(g, SymMatrix(T), orient);
        algebraic += f > 0 && r.classification == DPClass::Future && r.segre == Segre::NullEigenvector &&
                     std::abs(r.lambda - f) <= 1e-10 * f;
    }
    o.check(algebraic == 100, "classification at 100 points");

    const Fixture eta = make_fixture("counterexample32:eta");
    const CausalGrid& eg = eta.grid;
    std::vector<std::size_t> R;
    for (std::size_t k = 0; k < eg.size(); ++k) {
        const Vec p = eg.point(k);
        if (eg.live(k) && p(0) < 0.0 && p(1) > 0.0) R.push_back(k);
    }
    auto hits = [&](double u, double v) {
        const NodeSet s = future_set(eg, eg.nearest(u, v), ReachKind::Chronological).nodes;
        std::size_t c = 0;
        for (auto k : R) c += s.test(k);
        return c;
    };
    o.check(!R.empty() && hits(1.0, 0.0) == 0, "R outside I+((1,0))");
    for (int k = 1; k <= 5; ++k) o.check(hits(1.0, -1.0 / k) == R.size(), "R inside I+((1,-1/k))");

    const Fixture G = make_fixture("counterexample32");
    std::uniform_real_distribution<double> P(-1.6, 1.6);
    int closed = 0, probed = 0;
    std::ostringstream open_at;
    while (probed < 20) {
        const std::size_t k = G.grid.nearest(P(rng), P(rng));
        if (!G.grid.live(k)) continue;
        const ClosednessReport r = closedness_probe(G.grid, k);
        if (r.jplus_closed && r.jminus_closed) {
            ++closed;
        } else {
            const Vec x = G.grid.point(k);
            open_at << " (" << x(0) << ", " << x(1) << ")";
        }
        ++probed;
    }
    o.check(closed == 20, "G closed at 20 points");
    const ClosednessReport open = closedness_probe(eg, eg.nearest(1.0, 0.0));
    o.check(!open.jplus_closed, "eta at (1,0) not closed");
    o.detail << " grid " << eg.n0() << "x" << eg.n1() << ", |R| = " << R.size() << ", G closed " << closed
             << "/20" << open_at.str() << ", eta jump " << open.jplus_jump << " cells";
    return o;
}

Outcome stability() {
    Outcome o;
    const Interval all{};
    const MetricField eta = field2(all, all, "1", "-1");
    const auto flat = minkowski_stability(eta, SampleGrid(eta.chart(), 41));
    o.check(flat.bracket.theta_minus == kPi / 4 && flat.bracket.theta_plus == kPi / 4, "flat bracket");
    o.check(flat.isocausal, "flat isocausal");
    // bump supported in the unit disc
    const MetricField g =
        field2(all, all, "1", "-(1 - 0.5*piecewise(t^2 + x^2 < 1, exp(1 - 1/(1 - t^2 - x^2)), 0))");
    const auto rep = minkowski_stability(g, SampleGrid(g.chart(), 41));
    const double lo = rep.bracket.theta_minus, hi = rep.bracket.theta_plus;
    o.check(0.0 < lo && lo <= hi && hi < kPi / 2, "bracket inside (0, pi/2)");
    o.check(rep.isocausal, "isocausal");
    o.check(rep.lower.outcome == MapOutcome::Causal && rep.upper.outcome == MapOutcome::Causal, "both maps causal");
    o.check(rep.lower.min_margin >= 0.0 && rep.upper.min_margin >= 0.0, "margins");
    o.detail << " bracket [" << lo << ", " << hi << "], margins " << rep.lower.min_margin << ", "
             << rep.upper.min_margin;
    return o;
}

Outcome rectangles() {
    Outcome o;
    auto max_j = [](double L) {
        const Fixture f = make_fixture("rect:" + std::to_string(L));
        int j = 0;
        while (chain_obstruction(f.grid, j + 1).achievable) ++j;
        return j;
    };
    const int a = max_j(2.5), b = max_j(1.0), c = max_j(0.5);
    o.check(a == 2, "L = 2.5");
    o.check(b == 1, "L = 1");
    o.check(c == 0, "L = 0.5");
    o.detail << " max j: " << a << ", " << b << ", " << c;
    return o;
}

Outcome cylinders() {
    Outcome o;
    const CylinderRank above = cylinder_rank(kPi + 0.3);
    const CylinderRank at = cylinder_rank(kPi);
    const CylinderRank below = cylinder_rank(kPi - 0.3);
    o.check(above.rank == 2 && above.helix_slope.has_value(), "pi+0.3 timelike covers");
    o.check(at.rank == 1 && !at.geodesic.covers_J && at.geodesic.covers_closure_J, "pi closure only");
    o.check(below.rank == 0 && !below.geodesic.covers_closure_J, "pi-0.3 neither");
    o.detail << " ranks " << above.rank << ", " << at.rank << ", " << below.rank;
    return o;
}

Outcome plane_waves() {
    Outcome o;
    const PolVerdict v = pol_check(diag_wave(-1, -2), diag_wave(-3, -1), default_u_grid());
    o.check(v.isocausal, "isocausal");
    o.check(v.forward.verdict.min_margin >= -1e-9 && v.backward.verdict.min_margin >= -1e-9, "margins");
    o.check(weyl_flatness(Mat::Identity(2, 2) * 2.5, 4).flat, "lambda I flat");
    Mat Q = Mat::Zero(2, 2);
    Q(0, 0) = 1;
    Q(1, 1) = -1;
    o.check(!weyl_flatness(Q, 4).flat, "diag(1,-1) not flat");
    o.check(boundary_report(diag_wave(-1, -2)).kind == BoundaryKind::SandwichPlanes1B, "boundary");
    o.detail << " margins " << v.forward.verdict.min_margin << ", " << v.backward.verdict.min_margin;
    return o;
}

Outcome instability() {
    Outcome o;
    const ProbeReport r = desitter_instability_probe(0.5, 1.0, cylinder_evidence);
    o.check(r.L_minus < kPi && kPi < r.L_plus, "L- < pi < L+");
    o.check(r.error < 1e-8, "quadrature error");
    o.check(std::abs(r.L_zero - kPi) < 1e-8, "L0");
    for (const OrderResult* p : {&r.minus_zero, &r.zero_plus, &r.minus_plus})
        o.check(p->relation == Relation::Precedes && p->strict, "strict pair");
    o.detail << " L- = " << r.L_minus << ", L+ = " << r.L_plus << ", error " << r.error;
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <cli>\n";
        return 1;
    }
    cli_path = argv[1];
    struct Criterion {
        const char* name;
        double budget;  // seconds; 0 means unbounded
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {"de Sitter conformal length", 1.0, conformal_length},
        {"four-type classifier", 4.0, four_types},
        {"power-law obstructions", 0.0, power_laws},
        {"algebraic oracle agreement", 30.0, oracle_agreement},
        {"null-coordinate corner fixture", 60.0, corner_fixture},
        {"Minkowski stability", 0.0, stability},
        {"rectangle chains", 0.0, rectangles},
        {"cylinder trichotomy", 0.0, cylinders},
        {"plane waves", 0.0, plane_waves},
        {"de Sitter instability probe", 0.0, instability},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto& c = criteria[i];
        const auto start = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.ok = false;
            out.detail << " [exception: " << e.what() << "]";
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (c.budget > 0 && secs >= c.budget) out.check(false, "over time budget");
        failed += !out.ok;
        std::printf("%s %2zu %-32s %8.3f s%s\n", out.ok ? "PASS" : "FAIL", i + 1, c.name, secs,
                    out.detail.str().c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed ? 1 : 0;
}
