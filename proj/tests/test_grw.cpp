#include "doctest.h"

#include <chrono>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "isocausal/grw.hpp"

using namespace isocausal;

namespace {

constexpr double kPi = std::numbers::pi;

GRWSpec grw(const std::string& f, Interval I = {}, bool compact = true) {
    GRWSpec s;
    s.interval = I;
    s.f = ScalarExpr::parse(f);
    s.compact_fiber = compact;
    return s;
}

TimeProductSpec product(const std::string& rho, const std::string& h, Interval fiber = {}) {
    TimeProductSpec s;
    s.rho = ScalarExpr::parse(rho);
    s.fiber_coords = {"x"};
    s.fiber_domain = {fiber};
    s.h = {{ScalarExpr::parse(h)}};
    return s;
}

std::string str(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

Vec vec1(double a) {
    Vec v(1);
    v << a;
    return v;
}

// Gudermannian and its inverse.
double gd(double t) { return 2.0 * std::atan(std::tanh(t / 2.0)); }
double gd_inv(double y) { return std::atanh(std::sin(y)); }

}  // namespace

TEST_CASE("conformal length of de Sitter") {
    const auto start = std::chrono::steady_clock::now();
    const IntervalProfile p = conformal_interval(grw("cosh(t)"));
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    CHECK(p.past_finite);
    CHECK(p.future_finite);
    CHECK(std::abs(p.L - kPi) < 1e-8);
    CHECK(p.error < 1e-8);
    CHECK(secs < 1.0);
}

TEST_CASE("endpoint integrals") {
    SUBCASE("constant warping diverges at both ends") {
        const auto p = conformal_interval(grw("1"));
        CHECK(p.past.kind == EndKind::Infinite);
        CHECK(p.future.kind == EndKind::Infinite);
    }
    SUBCASE("power laws on the half line") {
        const Interval half{0.0, kInf};
        const auto a2 = conformal_interval(grw("t^2", half));
        CHECK(a2.past.kind == EndKind::Infinite);
        CHECK(a2.future.kind == EndKind::Finite);
        CHECK(a2.future.value == doctest::Approx(1.0).epsilon(1e-9));  // int_1^inf t^-2

        const auto a1 = conformal_interval(grw("t", half));
        CHECK(a1.past.kind == EndKind::Infinite);
        CHECK(a1.future.kind == EndKind::Infinite);

        const auto ah = conformal_interval(grw("t^0.5", half));
        CHECK(ah.past.kind == EndKind::Finite);
        CHECK(ah.past.value == doctest::Approx(2.0).epsilon(1e-9));  // int_0^1 t^-1/2
        CHECK(ah.future.kind == EndKind::Infinite);
    }
    SUBCASE("slow decay is reported as unknown") {
        const auto p = conformal_interval(grw("t^1.01", {0.0, kInf}));
        CHECK(p.future.kind == EndKind::Unknown);
        CHECK_FALSE(p.future.diagnostics.empty());
        CHECK_THROWS_AS(grw_classify(grw("t^1.01", {0.0, kInf})), NumericalError);
    }
    SUBCASE("non-positive warping is rejected") {
        CHECK_THROWS_AS(conformal_interval(grw("t")), DomainError);
    }
    SUBCASE("anchor must be interior") {
        CHECK_THROWS_AS(conformal_interval(grw("1", {0, 1}), 2.0), InputError);
    }
    SUBCASE("bounded interval with bounded warping") {
        const auto p = conformal_interval(grw("2 + sin(t)", {0, 3}));
        CHECK(p.past_finite);
        CHECK(p.future_finite);
        // closed form of int dt / (2 + sin t)
        auto F = [](double t) {
            return 2.0 / std::sqrt(3.0) * std::atan((2.0 * std::tan(t / 2.0) + 1.0) / std::sqrt(3.0));
        };
        CHECK(p.L == doctest::Approx(F(3.0) - F(0.0)).epsilon(1e-10));
    }
}

TEST_CASE("four-type table") {
    const auto start = std::chrono::steady_clock::now();
    CHECK(grw_classify(grw("1")).type == GRWType::EinsteinStatic);
    CHECK(grw_classify(grw("exp(-t)")).type == GRWType::ExpNeg);
    CHECK(grw_classify(grw("exp(t)")).type == GRWType::ExpPos);
    const GRWClass ds = grw_classify(grw("cosh(t)"));
    CHECK(ds.type == GRWType::FiniteBand);
    CHECK(std::abs(ds.L - kPi) < 1e-8);
    CHECK(ds.to_string().rfind("FiniteBand(3.14159", 0) == 0);
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() < 4.0);
    CHECK_THROWS_AS(grw_classify(grw("1", {}, false)), InputError);
}

TEST_CASE("profiles are translation invariant") {
    for (double shift : {-2.0, 0.7, 5.0}) {
        const auto p = conformal_interval(grw("cosh(t - " + std::to_string(shift) + ")"));
        CHECK(std::abs(p.L - kPi) < 1e-8);
    }
    const auto a = conformal_interval(grw("exp(t)"), 0.0);
    const auto b = conformal_interval(grw("exp(t - 1)"), 1.0);
    CHECK(a.past.kind == b.past.kind);
    CHECK(a.future.value == doctest::Approx(b.future.value).epsilon(1e-12));
}

TEST_CASE("classification ignores a rescaling split between f and the fiber") {
    for (double c : {0.25, 3.0}) {
        GRWSpec s = grw(std::to_string(c) + "*cosh(t)");
        s.diameter = kPi / c;  // h -> h / c^2
        const GRWClass k = grw_classify(s);
        CHECK(k.type == GRWType::FiniteBand);
        CHECK(std::abs(k.L - kPi) < 1e-8);
        GRWSpec e = grw(std::to_string(c) + "*exp(t)");
        e.diameter = kPi / c;
        CHECK(grw_classify(e).type == GRWType::ExpPos);
    }
}

TEST_CASE("classifier lands in exactly one type") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    for (int i = 0; i < 8; ++i) {
        const double a = u(rng), b = u(rng);
        const std::vector<std::pair<std::string, GRWType>> cases = {
            {str(a) + "*cosh(" + str(b) + "*t)", GRWType::FiniteBand},
            {str(a) + "*exp(" + str(b) + "*t)", GRWType::ExpPos},
            {str(a) + "*exp(-" + str(b) + "*t)", GRWType::ExpNeg},
            {str(a) + " + 0.5*" + str(a) + "*sin(" + str(b) + "*t)",
             GRWType::EinsteinStatic},
        };
        for (const auto& [f, type] : cases) {
            const auto p = conformal_interval(grw(f));
            CHECK(p.past.kind != EndKind::Unknown);
            CHECK(p.future.kind != EndKind::Unknown);
            const GRWClass c = class_from_profile(p);
            CHECK(c.type == type);
            if (type == GRWType::FiniteBand) CHECK(c.L == doctest::Approx(kPi / (a * b)).epsilon(1e-9));
        }
    }
}

TEST_CASE("ordering of the four types") {
    const GRWClass i{GRWType::EinsteinStatic, kInf}, ii{GRWType::ExpNeg, kInf}, iii{GRWType::ExpPos, kInf};
    const GRWClass band_pi{GRWType::FiniteBand, kPi}, band1{GRWType::FiniteBand, 1.0},
        band2{GRWType::FiniteBand, 2.0};
    CHECK(grw_order(band_pi, i).relation == Relation::Precedes);
    CHECK(grw_order(i, band_pi).relation == Relation::Follows);
    CHECK(grw_order(band_pi, ii).relation == Relation::Precedes);
    CHECK(grw_order(iii, i).relation == Relation::Precedes);
    CHECK(grw_order(ii, iii).relation == Relation::Incomparable);
    CHECK(grw_order(ii, ii).relation == Relation::Equivalent);

    const OrderResult r = grw_order(band1, band2);
    CHECK(r.relation == Relation::Precedes);
    CHECK_FALSE(r.strict);
    CHECK(grw_order(band1, GRWClass{GRWType::FiniteBand, 1.0 + 1e-8}).relation == Relation::Equivalent);

    // strictness only comes from differing coverage classes
    const BandEvidence ev = [](double L) -> std::optional<int> {
        if (std::abs(L - kPi) < 1e-6) return 1;
        return L > kPi ? 2 : 0;
    };
    CHECK(grw_order(band1, band2, ev).strict == false);
    CHECK(grw_order(band2, band_pi, ev).strict);
    CHECK(grw_order(band2, band_pi, ev).relation == Relation::Precedes);
}

TEST_CASE("explicit mappings between the types") {
    const GRWClass i{GRWType::EinsteinStatic, kInf}, ii{GRWType::ExpNeg, kInf}, iii{GRWType::ExpPos, kInf};
    const double L = 1.5;
    const GRWClass band{GRWType::FiniteBand, L};
    auto verify = [](const GRWClass& a, const GRWClass& b, const ConstructParams& p) {
        const MetricField g1 = grw_representative(a), g2 = grw_representative(b);
        return check_causal_mapping(g1, g2, grw_mapping_construct(a, b, p), SampleGrid(g1.chart(), 41));
    };
    SUBCASE("band to ii and iii") {
        const auto v = verify(band, ii, {});
        CHECK(v.outcome == MapOutcome::Causal);
        CHECK(v.min_margin >= -1e-9);
        CHECK(verify(band, iii, {}).outcome == MapOutcome::Causal);
        // below the threshold A = 2L/pi the map widens cones near t = 0
        CHECK(verify(band, ii, {0.5 * 2 * L / kPi, std::nullopt}).outcome == MapOutcome::NotCausal);
    }
    SUBCASE("ii and iii to i") {
        CHECK(verify(ii, i, {1.0, 2.0}).outcome == MapOutcome::Causal);
        CHECK(verify(iii, i, {1.0, 2.0}).outcome == MapOutcome::Causal);
    }
    SUBCASE("band to i and to a longer band") {
        CHECK(verify(band, i, {}).outcome == MapOutcome::Causal);
        CHECK(verify(band, GRWClass{GRWType::FiniteBand, 2.5}, {}).outcome == MapOutcome::Causal);
    }
    SUBCASE("directions the theorem does not provide") {
        CHECK_THROWS_WITH_AS(grw_mapping_construct(i, band), "direction not provided by the theorem", InputError);
        CHECK_THROWS_AS(grw_mapping_construct(ii, iii), InputError);
        CHECK_THROWS_AS(grw_mapping_construct(GRWClass{GRWType::FiniteBand, 2.5}, band), InputError);
    }
}

TEST_CASE("split mapping") {
    SUBCASE("fiber scaled by four") {
        const auto s1 = product("1", "1"), s2 = product("1", "4");
        const auto r = split_mapping(s1, s2, SampleGrid(s1.chart(), 21));
        CHECK(r.k == doctest::Approx(1.0));
        CHECK(r.N == doctest::Approx(4.0));
        CHECK(r.l == doctest::Approx(2.0));
        CHECK(r.verdict.outcome == MapOutcome::Causal);
        CHECK(r.verdict.min_margin >= 0.0);
    }
    SUBCASE("equal specs give the identity") {
        const auto s = product("2 + sin(x)", "1 + 0.5*cos(t)");
        const auto r = split_mapping(s, s, SampleGrid(s.chart(), 21));
        CHECK(r.l >= 1.0);
        const auto flat = product("1", "1");
        const auto id = split_mapping(flat, flat, SampleGrid(flat.chart(), 21));
        CHECK(id.k == 1.0);
        CHECK(id.N == 1.0);
        CHECK(id.l == 1.0);
        CHECK(id.verdict.outcome == MapOutcome::Causal);
        CHECK(id.verdict.min_margin == 0.0);
    }
    SUBCASE("time-dependent factors use independent times") {
        const auto s1 = product("1", "1"), s2 = product("2 + tanh(t)", "3 + tanh(t)");
        const auto r = split_mapping(s1, s2, SampleGrid(s1.chart(), 21));
        CHECK(r.k == doctest::Approx(1.0).epsilon(1e-6));
        CHECK(r.N == doctest::Approx(4.0).epsilon(1e-6));
        CHECK(r.verdict.outcome == MapOutcome::Causal);
    }
    SUBCASE("vanishing rho ratio") {
        const auto s1 = product("1", "1"), s2 = product("1/(1 + t^2)", "1");
        CHECK_THROWS_WITH_AS(split_mapping(s1, s2, SampleGrid(s1.chart(), 21)),
                             doctest::Contains("condition (i) fails"), DomainError);
    }
    SUBCASE("unbounded fiber ratio") {
        const auto s1 = product("1", "1"), s2 = product("1", "1 + t^2");
        CHECK_THROWS_WITH_AS(split_mapping(s1, s2, SampleGrid(s1.chart(), 21)),
                             doctest::Contains("condition (ii) fails"), DomainError);
    }
    SUBCASE("bounded interval is rejected") {
        auto s = product("1", "1");
        s.interval = {1.0, 2.0};
        CHECK_THROWS_AS(split_mapping(s, s, SampleGrid(s.chart(), 5)), InputError);
    }
}

TEST_CASE("arrival times on the flat product") {
    const auto flat = product("1", "1", {-5, 5});
    ArrivalGrid g;
    g.counts = {201};
    const ArrivalField f = arrival_time(flat, 0.0, vec1(0.3), g);
    CHECK(f.t_plus[f.base_node] == 0.0);
    CHECK(f.t_minus[f.base_node] == 0.0);
    const double x0 = f.node(f.base_node)(0);
    for (std::size_t k = 0; k < f.nodes(); ++k) {
        const double d = std::abs(f.node(k)(0) - x0);
        CHECK(std::abs(f.t_plus[k] - d) <= 2 * f.spacing);
        CHECK(std::abs(f.t_minus[k] - d) <= 2 * f.spacing);
    }
}

TEST_CASE("arrival times in de Sitter on a circle") {
    TimeProductSpec ds = product("1", "cosh(t)^2", {0, 2 * kPi});
    ArrivalGrid g;
    g.counts = {720};
    g.periodic = {true};
    for (double t1 : {-1.0, 0.0, 0.5}) {
        const ArrivalField f = arrival_time(ds, t1, vec1(0.0), g);
        for (std::size_t k = 0; k < f.nodes(); k += 20) {
            double d = f.node(k)(0);
            d = std::min(d, 2 * kPi - d);
            const double y = gd(t1) + d;
            if (y < kPi / 2 - 0.05) {
                CHECK(f.t_plus[k] == doctest::Approx(gd_inv(y) - t1).epsilon(1e-6));
            } else if (y > kPi / 2 + 0.05) {
                CHECK(std::isinf(f.t_plus[k]));
            }
        }
        // the antipode is never reached: gd stays below pi/2
        CHECK(std::isinf(f.t_plus[f.nearest(vec1(kPi))]));
    }
}

TEST_CASE("arrival rejects large fibers") {
    TimeProductSpec s;
    s.fiber_coords = {"x", "y", "z"};
    s.fiber_domain = {{}, {}, {}};
    const auto one = ScalarExpr::constant(1.0), zero = ScalarExpr::constant(0.0);
    s.h = {{one, zero, zero}, {zero, one, zero}, {zero, zero, one}};
    CHECK_THROWS_AS(arrival_time(s, 0.0, Vec::Zero(3), {}), InputError);
}

TEST_CASE("two dimensional fiber arrival is close to Euclidean distance") {
    TimeProductSpec s;
    s.fiber_coords = {"x", "y"};
    s.fiber_domain = {{-2, 2}, {-2, 2}};
    const auto one = ScalarExpr::constant(1.0), zero = ScalarExpr::constant(0.0);
    s.h = {{one, zero}, {zero, one}};
    ArrivalGrid g;
    g.counts = {41, 41};
    const ArrivalField f = arrival_time(s, 0.0, Vec::Zero(2), g);
    for (std::size_t k = 0; k < f.nodes(); k += 37) {
        const double d = f.node(k).norm();
        CHECK(f.t_plus[k] >= d - 1e-9);
        CHECK(f.t_plus[k] <= d * 1.03 + 2 * f.spacing);
    }
}

TEST_CASE("horizons") {
    ArrivalGrid g;
    g.counts = {81};
    SUBCASE("flat product has none") {
        const auto flat = product("1", "1", {-10, 10});
        const auto r = horizon_check(flat, vec1(0.0), g, {-2.0, 0.0, 2.0});
        CHECK(r.no_past_horizon);
        CHECK(r.no_future_horizon);
        CHECK(r.window.find("window") != std::string::npos);
    }
    SUBCASE("de Sitter has both") {
        auto ds = product("1", "cosh(t)^2", {0, 2 * kPi});
        g.periodic = {true};
        const auto r = horizon_check(ds, vec1(0.0), g, {-1.0, 0.0, 1.0});
        CHECK_FALSE(r.no_past_horizon);
        CHECK_FALSE(r.no_future_horizon);
    }
    SUBCASE("exponentially shrinking fiber: future horizon only") {
        auto ex = product("1", "exp(-2*t)", {-10, 10});
        const auto r = horizon_check(ex, vec1(0.0), g, {-2.0, 0.0, 1.0});
        CHECK(r.no_past_horizon);
        CHECK_FALSE(r.no_future_horizon);
    }
}

TEST_CASE("integral obstruction between power laws") {
    const Interval half{0.0, kInf};
    const std::vector<std::string> fs = {"t^0.5", "t", "t^2"};
    int flagged = 0;
    for (std::size_t a = 0; a < fs.size(); ++a)
        for (std::size_t b = a + 1; b < fs.size(); ++b) {
            const auto r = grw_obstruction(grw(fs[a], half, false), grw(fs[b], half, false));
            if (r.related == "no") ++flagged;
            CHECK((r.first_not_below_second || r.second_not_below_first));
        }
    CHECK(flagged == 3);
    const auto r = grw_obstruction(grw("t", half, false), grw("t^2", half, false));
    CHECK(r.first_not_below_second);  // future integral infinite for t, finite for t^2
    CHECK_FALSE(r.second_not_below_first);
}

TEST_CASE("bounded warping functions are isocausal") {
    const auto r = grw_obstruction(grw("1.25 + 0.75*sin(t)"), grw("1 + 0.5*tanh(t)"));
    CHECK(r.related == "isocausal");
    CHECK(grw_obstruction(grw("cosh(t)"), grw("cosh(t)")).related == "isocausal");
    CHECK(grw_obstruction(grw("cosh(t)"), grw("2*cosh(t)")).related == "unknown");
}

TEST_CASE("de Sitter instability probe") {
    const auto r = desitter_instability_probe(0.5, 1.0);
    CHECK(r.L_minus < kPi);
    CHECK(r.L_plus > kPi);
    CHECK(std::abs(r.L_zero - kPi) < 1e-8);
    CHECK(r.error < 1e-8);
    CHECK(r.minus_zero.relation == Relation::Precedes);
    CHECK(r.zero_plus.relation == Relation::Precedes);

    const auto flat = desitter_instability_probe(0.0, 1.0);
    CHECK(std::abs(flat.L_minus - kPi) < 1e-8);
    CHECK(std::abs(flat.L_plus - kPi) < 1e-8);
    CHECK(flat.minus_zero.relation == Relation::Equivalent);

    CHECK_THROWS_AS(desitter_instability_probe(-10.0, 1.0), DomainError);
    CHECK_THROWS_AS(desitter_instability_probe(0.5, 0.0), InputError);
}
