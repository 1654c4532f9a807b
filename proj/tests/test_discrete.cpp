#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "isocausal/discrete.hpp"

using namespace isocausal;

namespace {

constexpr double kPi = std::numbers::pi;

std::size_t count_in(const NodeSet& s, const std::vector<std::size_t>& nodes) {
    std::size_t c = 0;
    for (auto k : nodes) c += s.test(k);
    return c;
}

std::vector<std::size_t> region_r(const CausalGrid& g) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec p = g.point(k);
        if (g.live(k) && p(0) < 0.0 && p(1) > 0.0) out.push_back(k);
    }
    return out;
}

}  // namespace

TEST_CASE("grid axes") {
    const GridAxis a = GridAxis::inclusive(0, 1, 11);
    CHECK(a.size() == 11);
    CHECK(a.h == doctest::Approx(0.1));
    CHECK(a.x.back() == 1.0);
    const GridAxis c = GridAxis::centered(0, 1, 4);
    CHECK(c.x[0] == doctest::Approx(0.125));
    const GridAxis p = GridAxis::periodic_circle(8);
    CHECK(p.periodic);
    CHECK(p.h == doctest::Approx(kPi / 4));
    CHECK_THROWS_AS(GridAxis::inclusive(0, 1, 1), InputError);
    CHECK_THROWS_AS(GridAxis::periodic_circle(2), InputError);
}

TEST_CASE("flat cones sit at plus and minus 45 degrees") {
    const Fixture f = make_fixture("minkowski2");
    CHECK(f.grid.n0() == 101);
    CHECK(f.grid.live_count() == f.grid.size());
    const auto& c = f.grid.cone(f.grid.index(50, 50));
    CHECK(std::max(c[0], c[1]) == doctest::Approx(kPi / 4));
    CHECK(std::min(c[0], c[1]) == doctest::Approx(-kPi / 4));
    CHECK(f.grid.classify(0, 1, 1) == EdgeKind::Null);
    CHECK(f.grid.classify(0, 1, 0) == EdgeKind::Timelike);
    CHECK(f.grid.classify(0, 0, 1) == EdgeKind::Spacelike);
    CHECK(f.grid.classify(0, -1, 0) == EdgeKind::Past);
    CHECK(std::string(to_string(EdgeKind::Null)) == "null");
}

TEST_CASE("excoj cones rotate with t") {
    const Fixture f = make_fixture("excoj");
    CHECK(f.grid.cylinder());
    for (double t : {-2.0, 0.3, 1.2, 2.9}) {
        const auto& c = f.grid.cone(f.grid.nearest(t, 1.0));
        const double t0 = f.grid.point(f.grid.nearest(t, 1.0))(0);
        const double phi = kPi / 2 * std::sin(t0) * std::sin(t0);
        // future null directions are dt and dtheta rotated by phi
        const double a = std::remainder(phi, 2 * kPi), b = std::remainder(phi + kPi / 2, 2 * kPi);
        const bool match = (std::fabs(std::remainder(c[0] - a, 2 * kPi)) < 1e-9 && std::fabs(std::remainder(c[1] - b, 2 * kPi)) < 1e-9) ||
                           (std::fabs(std::remainder(c[0] - b, 2 * kPi)) < 1e-9 && std::fabs(std::remainder(c[1] - a, 2 * kPi)) < 1e-9);
        CHECK(match);
    }
}

TEST_CASE("counterexample cones are spanned by the two fields") {
    const Fixture f = make_fixture("counterexample32");
    for (auto uv : std::vector<std::array<double, 2>>{{0.5, 0.3}, {1.0, 1.5}, {-1.0, -1.0}, {1.5, 0.2}}) {
        const std::size_t k = f.grid.nearest(uv[0], uv[1]);
        const Vec p = f.grid.point(k);
        const double fv = counterexample_f(p(0), p(1));
        const double xi1 = std::atan2(-fv, -1.0), xi2 = kPi / 2;
        const auto& c = f.grid.cone(k);
        const double lo = std::min(c[0], c[1]), hi = std::max(c[0], c[1]);
        CHECK(hi == doctest::Approx(std::max(xi1, xi2)));
        CHECK(lo == doctest::Approx(std::min(xi1, xi2)));
    }
}

TEST_CASE("a degenerate cone at a live node is rejected") {
    Chart c;
    c.coords = {"t", "x"};
    c.domain = {{-1, 1}, {-1, 1}};
    const MetricField m(c, {{ScalarExpr::parse("t"), ScalarExpr::constant(0)}, {ScalarExpr::constant(0), ScalarExpr::constant(-1)}},
                        {ScalarExpr::constant(1), ScalarExpr::constant(0)});
    CHECK_THROWS(CausalGrid(m, GridAxis::inclusive(-1, 1, 5), GridAxis::inclusive(-1, 1, 5)));
}

TEST_CASE("flat reach sets match the analytic cone within one cell") {
    const Fixture f = make_fixture("minkowski2");
    const CausalGrid& g = f.grid;
    const std::size_t p = g.nearest(0.3, 0.5);
    const double h = g.axis(0).h;
    const NodeSet J = future_set(g, p, ReachKind::Causal).nodes;
    const NodeSet I = future_set(g, p, ReachKind::Chronological).nodes;
    const NodeSet Jm = past_set(g, p, ReachKind::Causal).nodes;
    CHECK(J.test(p));
    CHECK_FALSE(I.test(p));
    CHECK(I.subset_of(J));
    int bad = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        const Vec q = g.point(k) - g.point(p);
        const double s = q(0) - std::fabs(q(1));
        if (s > h && !J.test(k)) ++bad;
        if (s < -h && J.test(k)) ++bad;
        if (-q(0) - std::fabs(q(1)) > h && !Jm.test(k)) ++bad;
        if (J.test(k) && Jm.test(k) && k != p) ++bad;
    }
    CHECK(bad == 0);
}

TEST_CASE("chronological sets are inside causal sets on every fixture node sample") {
    for (const char* name : {"excoj", "exnotim", "counterexample32", "stairway:3"}) {
        const Fixture f = make_fixture(name, 0.5);
        std::mt19937_64 rng(42);
        std::uniform_int_distribution<std::size_t> pick(0, f.grid.size() - 1);
        for (int t = 0; t < 6; ++t) {
            std::size_t k = pick(rng);
            while (!f.grid.live(k)) k = pick(rng);
            for (Direction d : {Direction::Future, Direction::Past}) {
                const NodeSet I = reach(f.grid, {k}, ReachKind::Chronological, d).nodes;
                const NodeSet J = reach(f.grid, {k}, ReachKind::Causal, d).nodes;
                CHECK(I.subset_of(J));
                CHECK(J.test(k));
            }
        }
    }
}

TEST_CASE("refinement keeps flat causal verdicts") {
    const Fixture coarse = make_fixture("minkowski2"), fine = make_fixture("minkowski2", 2.0);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    int compared = 0, flips = 0;
    for (int t = 0; t < 40; ++t) {
        const double pt = U(rng) * 0.5, px = U(rng), qt = pt + U(rng) * 0.5, qx = U(rng);
        const auto pc = coarse.grid.nearest(pt, px), qc = coarse.grid.nearest(qt, qx);
        const auto pf = fine.grid.nearest(pt, px), qf = fine.grid.nearest(qt, qx);
        const bool c = future_set(coarse.grid, pc, ReachKind::Causal).nodes.test(qc);
        const bool f = future_set(fine.grid, pf, ReachKind::Causal).nodes.test(qf);
        const Vec d = coarse.grid.point(qc) - coarse.grid.point(pc);
        if (std::fabs(d(0) - std::fabs(d(1))) < 2 * coarse.grid.axis(0).h) continue;
        ++compared;
        if (c && !f) ++flips;
    }
    CHECK(compared > 20);
    CHECK(flips == 0);
}

TEST_CASE("rectangle stretch pushes chronological futures forward") {
    // Phi(t, x) = (L' t / L, x) from R_1 into R_1.5
    const Fixture a = make_fixture("rect:1"), b = make_fixture("rect:1.5");
    std::mt19937_64 rng(42);
    std::uniform_int_distribution<std::size_t> pick(0, a.grid.size() - 1);
    const double ratio = 1.5;
    int outside = 0;
    for (int t = 0; t < 50; ++t) {
        const std::size_t p = pick(rng);
        const NodeSet I = future_set(a.grid, p, ReachKind::Chronological).nodes;
        const Vec pp = a.grid.point(p);
        const NodeSet target = dilate(b.grid, future_set(b.grid, b.grid.nearest(ratio * pp(0), pp(1)), ReachKind::Chronological).nodes, 1);
        for (std::size_t k : I.members()) {
            const Vec q = a.grid.point(k);
            if (!target.test(b.grid.nearest(ratio * q(0), q(1)))) ++outside;
        }
    }
    CHECK(outside == 0);
}

TEST_CASE("rectangle chain criterion") {
    const Fixture r25 = make_fixture("rect:2.5");
    const ChainResult two = chain_obstruction(r25.grid, 2);
    REQUIRE(two.achievable);
    CHECK(two.curves.size() == 2);
    for (const auto& c : two.curves) CHECK(c.null());
    CHECK_FALSE(chain_obstruction(r25.grid, 3).achievable);
    const Fixture r1 = make_fixture("rect:1");
    CHECK(chain_obstruction(r1.grid, 1).achievable);
    CHECK_FALSE(chain_obstruction(r1.grid, 2).achievable);
    const ChainResult half = chain_obstruction(make_fixture("rect:0.5").grid, 1);
    CHECK_FALSE(half.achievable);
    CHECK_FALSE(half.reason.empty());
    CHECK_THROWS_AS(chain_obstruction(r1.grid, 0), InputError);
}

TEST_CASE("cylinder coverage trichotomy") {
    const CylinderRank above = cylinder_rank(kPi + 0.3);
    CHECK(above.rank == 2);
    CHECK(above.helix_slope.has_value());
    const CylinderRank at = cylinder_rank(kPi);
    CHECK(at.rank == 1);
    CHECK_FALSE(at.geodesic.covers_J);
    CHECK(at.geodesic.covers_closure_J);
    const CylinderRank below = cylinder_rank(kPi - 0.3);
    CHECK(below.rank == 0);
    CHECK_FALSE(below.geodesic.covers_J);
    CHECK_FALSE(below.geodesic.covers_closure_J);
}

TEST_CASE("helix on the wide cylinder is timelike and covers") {
    const Fixture f = make_fixture("cyl:3.4415926535897933");
    std::vector<std::size_t> nodes;
    for (int i = 0; i < f.grid.n0(); ++i) nodes.push_back(f.grid.index(i, static_cast<int>(std::lround(0.85 * i)) % f.grid.n1()));
    const PolyCurve helix = make_curve(f.grid, nodes);
    CHECK(helix.timelike(f.grid));
    CHECK(coverage_criterion(f.grid, helix).covers_J);
    const PolyCurve geo = null_curve(f.grid, f.grid.index(0, 0), +1);
    CHECK(geo.null());
    CHECK_FALSE(geo.timelike(f.grid));
}

TEST_CASE("counterexample chronological futures around the deleted corner") {
    const Fixture eta = make_fixture("counterexample32:eta");
    const CausalGrid& g = eta.grid;
    const auto R = region_r(g);
    REQUIRE(R.size() > 1000);
    CHECK(count_in(future_set(g, g.nearest(1.0, 0.0), ReachKind::Chronological).nodes, R) == 0);
    for (int k = 1; k <= 5; ++k)
        CHECK(count_in(future_set(g, g.nearest(1.0, -1.0 / k), ReachKind::Chronological).nodes, R) == R.size());
}

TEST_CASE("closedness of causal sets") {
    const Fixture G = make_fixture("counterexample32");
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> U(-1.6, 1.6);
    int probed = 0;
    while (probed < 20) {
        const std::size_t k = G.grid.nearest(U(rng), U(rng));
        if (!G.grid.live(k)) continue;
        const ClosednessReport r = closedness_probe(G.grid, k);
        CHECK(r.jplus_closed);
        CHECK(r.jminus_closed);
        ++probed;
    }
    const Fixture eta = make_fixture("counterexample32:eta");
    const ClosednessReport open = closedness_probe(eta.grid, eta.grid.nearest(1.0, 0.0));
    CHECK_FALSE(open.jplus_closed);
    CHECK(open.jplus_jump > 25);
    const Fixture flat = make_fixture("minkowski2");
    const ClosednessReport c = closedness_probe(flat.grid, flat.grid.nearest(0.5, 0.5));
    CHECK(c.jplus_closed);
    CHECK(c.jminus_closed);
    CHECK(c.jplus_is_closure_of_iplus);
    CHECK_THROWS_AS(closedness_probe(eta.grid, eta.grid.nearest(-1.0, 1.5)), InputError);
}

TEST_CASE("closedness verdicts do not depend on the bridge") {
    const Fixture a = make_fixture("counterexample32", 0.5, Bridge::BumpIntegral);
    const Fixture b = make_fixture("counterexample32", 0.5, Bridge::Smoothstep);
    for (auto uv : std::vector<std::array<double, 2>>{{0.6, 0.3}, {1.2, 0.5}, {-0.5, -1.0}, {1.0, 0.0}}) {
        const ClosednessReport ra = closedness_probe(a.grid, a.grid.nearest(uv[0], uv[1]));
        const ClosednessReport rb = closedness_probe(b.grid, b.grid.nearest(uv[0], uv[1]));
        CHECK(ra.jplus_closed == rb.jplus_closed);
        CHECK(ra.jminus_closed == rb.jminus_closed);
        CHECK(ra.jplus_closed);
    }
}

TEST_CASE("counterexample warping function branches") {
    CHECK(counterexample_f(-1, 5) == 1.0);
    CHECK(counterexample_f(1, 2) == doctest::Approx(3.0));
    CHECK(counterexample_f(0.5, 0.5) == doctest::Approx(3.0));
    CHECK(counterexample_f(0.5, 0.5 - 1e-9) == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(counterexample_f(2.0, 1.0 + 1e-9) == doctest::Approx(1.0).epsilon(1e-6));  // v = u - 1
    CHECK(counterexample_f(0.8, 1e-9) == doctest::Approx(1.0).epsilon(1e-6));        // v = 0
    for (Bridge b : {Bridge::BumpIntegral, Bridge::Smoothstep}) {
        CHECK(bridge(b, 0.0) == 1.0);
        CHECK(bridge(b, 1.0) == doctest::Approx(0.0));
        CHECK(bridge(b, 0.5) == doctest::Approx(0.5));
        double prev = 1.0;
        for (int i = 1; i <= 50; ++i) {
            const double v = bridge(b, i / 50.0);
            CHECK(v <= prev + 1e-15);
            prev = v;
        }
        CHECK(counterexample_f(0.9, 0.4, b) >= 1.0);
    }
}

TEST_CASE("imprisonment probe") {
    const ImprisonmentReport ex = imprisonment_probe(make_fixture("excoj").grid);
    CHECK(ex.imprisoned);
    CHECK(ex.band > kPi / 2);
    CHECK(ex.band < 3 * kPi / 2 + 0.2);
    CHECK_FALSE(imprisonment_probe(make_fixture("excoj:g1").grid).imprisoned);
    CHECK_FALSE(imprisonment_probe(make_fixture("rect:1").grid).imprisoned);
}

TEST_CASE("exnotim has a past horizon only") {
    const Fixture f = make_fixture("exnotim", 0.5);
    const CausalGrid& g = f.grid;
    std::vector<std::size_t> axis;
    for (int i = 0; i < g.n0(); ++i) axis.push_back(g.nearest(g.axis(0).x[i], 0.0));
    const NodeSet past = reach(g, axis, ReachKind::Chronological, Direction::Past).nodes;
    std::size_t missing = 0;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.point(k)(0) <= 6.0 && !past.test(k)) ++missing;
    CHECK(missing == 0);

    // random future-directed causal walks never see the whole grid
    std::mt19937_64 rng(42);
    const NodeSet all = live_set(g);
    for (int t = 0; t < 10; ++t) {
        std::size_t k = g.index(0, std::uniform_int_distribution<int>(0, g.n1() - 1)(rng));
        std::vector<std::size_t> path{k};
        while (true) {
            std::vector<int> opts;
            for (int o = 0; o < kOffsetCount; ++o)
                if ((g.causal_edges(k) >> o) & 1u) opts.push_back(o);
            if (opts.empty()) break;
            const int o = opts[std::uniform_int_distribution<std::size_t>(0, opts.size() - 1)(rng)];
            k = *g.step(k, kOffsets[o][0], kOffsets[o][1]);
            path.push_back(k);
        }
        const NodeSet fut = reach(g, path, ReachKind::Chronological, Direction::Future).nodes;
        CHECK_FALSE(all.subset_of(fut));
    }
}

TEST_CASE("hypersurface tests") {
    const Fixture flat = make_fixture("minkowski2");
    std::vector<std::size_t> row;
    for (int j = 0; j < flat.grid.n1(); ++j) row.push_back(flat.grid.index(50, j));
    const HypersurfaceReport r = hypersurface_tests(flat.grid, make_curve(flat.grid, row));
    CHECK(r.acausal);
    CHECK(r.achronal);
    CHECK(r.covers);

    std::vector<std::size_t> col;
    for (int i = 0; i < flat.grid.n0(); ++i) col.push_back(flat.grid.index(i, 50));
    const HypersurfaceReport c = hypersurface_tests(flat.grid, make_curve(flat.grid, col));
    CHECK_FALSE(c.acausal);
    CHECK_FALSE(c.achronal);

    const Fixture q = make_fixture("ex42:quadrant");
    REQUIRE(q.hypersurfaces.size() == 1);
    const HypersurfaceReport s = hypersurface_tests(q.grid, q.hypersurfaces[0]);
    CHECK(s.acausal);
    CHECK_FALSE(s.covers);
    CHECK(s.uncovered > 0);

    const Fixture sl = make_fixture("ex42:slits:4");
    REQUIRE(sl.hypersurfaces.size() == 3);
    CHECK(causally_disjoint(sl.grid, sl.hypersurfaces));
    CHECK_FALSE(causally_disjoint(flat.grid, {make_curve(flat.grid, {row[10]}), make_curve(flat.grid, {col[90]})}));
}

TEST_CASE("stairway hypersurfaces") {
    const Fixture f = make_fixture("stairway:3");
    REQUIRE(f.hypersurfaces.size() == 3);
    for (const auto& s : f.hypersurfaces) {
        REQUIRE(s.nodes.size() > 5);
        const HypersurfaceReport r = hypersurface_tests(f.grid, s);
        CHECK(r.acausal);
        CHECK_FALSE(r.covers);
    }
    CHECK(causally_disjoint(f.grid, f.hypersurfaces));
    CHECK_THROWS_AS(make_fixture("stairway:0"), InputError);
}

TEST_CASE("fixture names and grid dumps") {
    CHECK_THROWS_AS(make_fixture("nowhere"), InputError);
    CHECK_THROWS_AS(make_fixture("rect:abc"), InputError);
    CHECK_THROWS_AS(make_fixture("rect:-1"), InputError);
    const Fixture f = make_fixture("ex42:quadrant", 0.1);
    const std::string csv = f.grid.csv();
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "node,x0,x1,cone_angle1,cone_angle2,mask");
    std::size_t rows = 0, masked = 0;
    while (std::getline(in, line)) {
        ++rows;
        masked += line.back() == '1';
    }
    CHECK(rows == f.grid.size());
    CHECK(masked == f.grid.size() - f.grid.live_count());
    CHECK(masked > 0);
}
