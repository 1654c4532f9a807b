#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>

#include "CLI11.hpp"
#include "document.hpp"

using namespace isocausal;
using namespace isocausal::cli;

namespace {

struct Globals {
    std::optional<int> grid;
    std::uint64_t seed = 42;
    std::optional<double> tol;
    std::string out;
    std::string format = "json";
};

struct Outcome {
    json result;
    int code = 0;
    json tolerances = json::object();
    std::optional<std::string> csv;
};

using Handler = std::function<Outcome()>;

json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

json nums(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(num(x));
    return a;
}

Vec to_vec(const std::vector<double>& v) {
    Vec p(static_cast<int>(v.size()));
    for (std::size_t i = 0; i < v.size(); ++i) p(static_cast<int>(i)) = v[i];
    return p;
}

// A point inside the chart when none is given: midpoints of bounded axes,
// one unit inside half-bounded axes, zero otherwise.
Vec default_point(const Chart& c) {
    Vec p = Vec::Zero(c.dim());
    for (int i = 0; i < c.dim(); ++i) {
        const Interval d = i < static_cast<int>(c.domain.size()) ? c.domain[i] : Interval{};
        if (d.bounded()) p(i) = 0.5 * (d.lo + d.hi);
        else if (std::isfinite(d.lo)) p(i) = d.lo + 1.0;
        else if (std::isfinite(d.hi)) p(i) = d.hi - 1.0;
    }
    return p;
}

Vec point_or_default(const std::vector<double>& at, const Chart& c) {
    if (at.empty()) return default_point(c);
    if (static_cast<int>(at.size()) != c.dim()) throw InputError("--at needs " + std::to_string(c.dim()) + " coordinates");
    return to_vec(at);
}

SampleGrid sample_grid(const Globals& g, const Chart& c) {
    if (g.grid) {
        if (*g.grid < 1) throw InputError("--grid must be positive");
        return SampleGrid(c, *g.grid);
    }
    return mp_default_grid(c);
}

SymMatrix tensor_matrix(const std::vector<std::vector<ScalarExpr>>& T, const Chart& c, const Vec& p) {
    const int n = c.dim();
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m(i, j) = CompiledExpr(T[i][j], c.coords)(std::vector<double>(p.data(), p.data() + n));
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, m.cwiseAbs().maxCoeff()))
        throw InputError("tensor must be symmetric");
    return SymMatrix(0.5 * (m + m.transpose()));
}

int map_outcome_code(MapOutcome o) {
    switch (o) {
        case MapOutcome::Causal: return 0;
        case MapOutcome::Inconclusive: return 3;
        default: return 2;
    }
}

// Command handlers.

Outcome dp_check(const Globals& g, const std::string& file, const std::string& tensor_file, const std::vector<double>& at) {
    const MetricDoc md = parse_metric(read_document(file));
    std::optional<std::vector<std::vector<ScalarExpr>>> T = md.tensor;
    if (!tensor_file.empty()) {
        if (T) throw InputError("tensor given both in the document and with --tensor");
        const json tdoc = read_document(tensor_file);
        Fields f(tdoc, "");
        f.require("version");
        f.require("kind");
        f.optional("coords");
        f.optional("domain");
        f.optional("masks");
        f.optional("orientation");
        const json& comps = f.require("components");
        f.finish();
        T.emplace();
        const int n = md.metric.dim();
        if (!comps.is_array() || static_cast<int>(comps.size()) != n) throw InputError("/components: tensor size does not match the metric");
        for (int i = 0; i < n; ++i) {
            const std::string w = "/components/" + std::to_string(i);
            if (!comps[i].is_array() || static_cast<int>(comps[i].size()) != n) throw InputError(w + ": row has the wrong length");
            T->emplace_back();
            for (int j = 0; j < n; ++j) T->back().push_back(expr_at(comps[i][j], w + "/" + std::to_string(j)));
        }
    }
    if (!T) throw InputError("dp-check needs a tensor: a 'tensor' field or --tensor");
    const Chart& c = md.metric.chart();
    const Vec p = point_or_default(at, c);
    const SymMatrix G = md.metric.at(p);
    const Vec o = md.metric.orientation(p);
    const SymMatrix Tm = tensor_matrix(*T, c, p);
    const double tol = g.tol.value_or(1e-9);
    const DPReport r = classify_dp(G, Tm, o, tol);
    const OracleResult orc = null_oracle(G, Tm, o, 4096, g.seed);
    Outcome out;
    out.tolerances = {{"classification", tol}, {"boundary_band", kBoundaryBand}, {"oracle_samples", 4096}};
    json res = {{"point", to_json(p)},
                {"classification", to_string(r.classification)},
                {"segre", to_string(r.segre)},
                {"eigenvalues", nums(r.eigenvalues)},
                {"lambda0", num(r.lambda0)},
                {"spatial", nums(r.spatial)},
                {"lambda", num(r.lambda)},
                {"margin", num(r.margin)},
                {"boundary", r.boundary},
                {"complex_spectrum", r.complex_spectrum},
                {"all_null_canonical", r.all_null_canonical},
                {"oracle", {{"min_value", num(orc.min_value)}, {"diagonal_min", num(orc.diagonal_min)}}}};
    json cn = json::array();
    for (const auto& v : r.canonical_null) cn.push_back(to_json(v));
    res["canonical_null"] = cn;
    if (r.witness) res["witness"] = to_json(*r.witness);
    if (r.witness2) res["witness2"] = to_json(*r.witness2);
    out.result = res;
    out.code = r.classification == DPClass::NotCausal ? 2 : 0;
    return out;
}

Outcome map_check(const Globals& g, const std::vector<std::string>& files) {
    const MetricDoc g1 = parse_metric(read_document(files[0]));
    const MetricDoc g2 = parse_metric(read_document(files[1]));
    const DiffeoSpec phi = parse_diffeo(read_document(files[2]));
    if (phi.dim() != g1.metric.dim() || phi.dim() != g2.metric.dim()) throw InputError("map and metrics disagree in dimension");
    const SampleGrid grid = sample_grid(g, g1.metric.chart());
    const MappingVerdict v = check_causal_mapping(g1.metric, g2.metric, phi, grid);
    Outcome out;
    out.tolerances = {{"boundary_band", kBoundaryBand}, {"samples", grid.size()}};
    out.result = to_json(v);
    out.code = map_outcome_code(v.outcome);
    return out;
}

Outcome cone_angles_cmd(const Globals& g, const std::string& file, const std::vector<double>& at) {
    const MetricDoc md = parse_metric(read_document(file));
    Outcome out;
    if (g.grid) {
        const SampleGrid grid(md.metric.chart(), *g.grid);
        double lo = kInf, hi = -kInf;
        bool exact = true;
        std::size_t used = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const Vec p = grid.point(i);
            if (md.metric.masked(p) || !md.metric.in_domain(p)) continue;
            const ConeAngles a = cone_angles(md.metric, p);
            lo = std::min(lo, a.theta_min);
            hi = std::max(hi, a.theta_max);
            exact = exact && a.exact;
            ++used;
        }
        out.result = {{"theta_min", num(lo)}, {"theta_max", num(hi)}, {"exact", exact}, {"samples", used}};
        return out;
    }
    const Vec p = point_or_default(at, md.metric.chart());
    const ConeAngles a = cone_angles(md.metric, p);
    out.result = {{"point", to_json(p)}, {"theta_min", num(a.theta_min)}, {"theta_max", num(a.theta_max)}, {"exact", a.exact}};
    return out;
}

Outcome stability_cmd(const Globals& g, const std::string& file) {
    const MetricDoc md = parse_metric(read_document(file));
    const SampleGrid grid(md.metric.chart(), g.grid.value_or(41));
    const StabilityReport r = minkowski_stability(md.metric, grid);
    Outcome out;
    out.tolerances = {{"samples", grid.size()}};
    out.result = {{"theta_minus", num(r.bracket.theta_minus)},
                  {"theta_plus", num(r.bracket.theta_plus)},
                  {"extrapolated", r.bracket.extrapolated},
                  {"isocausal", r.isocausal},
                  {"verdict", r.verdict},
                  {"lower", to_json(r.lower)},
                  {"upper", to_json(r.upper)}};
    out.code = r.isocausal ? 0 : (r.verdict.rfind("inconclusive", 0) == 0 ? 3 : 2);
    return out;
}

struct GrwFlags {
    std::string f;
    std::vector<std::string> interval;
    std::string fiber = "sphere";
    std::string time_coord = "t";
    double diameter = 0.0;
};

GRWSpec grw_from_flags(const std::string& f, const std::vector<std::string>& interval, const GrwFlags& flags) {
    if (f.empty()) throw InputError("--f is required without a spec file");
    if (interval.size() != 2) throw InputError("--interval needs two bounds");
    GRWSpec s;
    s.time_coord = flags.time_coord;
    s.f = expr_at(json(f), "--f");
    auto bound = [](const std::string& b) {
        if (b == "inf" || b == "+inf") return kInf;
        if (b == "-inf") return -kInf;
        try {
            std::size_t used = 0;
            const double v = std::stod(b, &used);
            if (used == b.size()) return v;
        } catch (const std::exception&) {
        }
        throw InputError("--interval: bad bound '" + b + "'");
    };
    s.interval = {bound(interval[0]), bound(interval[1])};
    if (!(s.interval.lo < s.interval.hi)) throw InputError("--interval needs lo < hi");
    s.fiber = flags.fiber;
    s.compact_fiber = fiber_is_compact(flags.fiber, "--fiber");
    s.diameter = flags.diameter;
    return s;
}

BandEvidence band_evidence(const Globals& g) {
    const int circle = g.grid.value_or(512);
    return [circle](double L) -> std::optional<int> {
        if (!std::isfinite(L) || !(L > 0.0)) return std::nullopt;
        return cylinder_rank(L, circle).rank;
    };
}

Outcome grw_classify_cmd(const Globals&, const GRWSpec& s) {
    if (!s.compact_fiber) throw InputError("the four-type classification needs a compact fiber");
    const IntervalProfile p = conformal_interval(s);
    const GRWClass c = class_from_profile(p);
    Outcome out;
    out.tolerances = {{"quadrature_rel_tol", QuadratureConfig{}.rel_tol}};
    out.result = {{"class", to_json(c)}, {"profile", to_json(p)}, {"f", s.f.to_string()}};
    return out;
}

Outcome grw_compare_cmd(const Globals& g, const GRWSpec& a, const GRWSpec& b) {
    const ObstructionReport ob = grw_obstruction(a, b);
    Outcome out;
    json res = {{"obstruction",
                 {{"related", ob.related},
                  {"first_not_below_second", ob.first_not_below_second},
                  {"second_not_below_first", ob.second_not_below_first},
                  {"reason", ob.reason},
                  {"first", to_json(ob.p1)},
                  {"second", to_json(ob.p2)}}}};
    bool incomparable = false;
    if (a.compact_fiber && b.compact_fiber) {
        const GRWClass ca = class_from_profile(ob.p1), cb = class_from_profile(ob.p2);
        const OrderResult o = grw_order(ca, cb, band_evidence(g));
        res["first"] = to_json(ca);
        res["second"] = to_json(cb);
        res["order"] = to_json(o);
        incomparable = o.relation == Relation::Incomparable;
    }
    out.result = res;
    out.code = ob.related == "no" || incomparable ? 2 : 0;
    out.tolerances = {{"quadrature_rel_tol", QuadratureConfig{}.rel_tol}, {"band_tolerance", kBandTolerance}};
    return out;
}

Outcome grw_probe_cmd(const Globals& g, double amplitude, double width) {
    const ProbeReport r = desitter_instability_probe(amplitude, width, band_evidence(g));
    Outcome out;
    out.tolerances = {{"quadrature_rel_tol", QuadratureConfig{}.rel_tol}, {"circle_nodes", g.grid.value_or(512)}};
    out.result = {{"L_minus", num(r.L_minus)},
                  {"L_zero", num(r.L_zero)},
                  {"L_plus", num(r.L_plus)},
                  {"error", num(r.error)},
                  {"f_minus", r.f_minus},
                  {"f_plus", r.f_plus},
                  {"classes", {to_json(r.c_minus), to_json(r.c_zero), to_json(r.c_plus)}},
                  {"minus_zero", to_json(r.minus_zero)},
                  {"zero_plus", to_json(r.zero_plus)},
                  {"minus_plus", to_json(r.minus_plus)}};
    return out;
}

ArrivalGrid arrival_grid(const Globals& g, const TimeProductSpec& s, double max_lapse) {
    ArrivalGrid ag;
    ag.counts.assign(static_cast<std::size_t>(s.fiber_dim()), g.grid.value_or(s.fiber_dim() == 1 ? 201 : 41));
    ag.max_lapse = max_lapse;
    return ag;
}

Vec fiber_point(const std::vector<double>& x0, const TimeProductSpec& s) {
    if (x0.empty()) return Vec::Zero(s.fiber_dim());
    if (static_cast<int>(x0.size()) != s.fiber_dim()) throw InputError("--x0 needs one value per fiber coordinate");
    return to_vec(x0);
}

Outcome arrival_cmd(const Globals& g, const std::string& file, std::optional<double> t0, const std::vector<double>& x0,
                    double max_lapse) {
    const TimeProductSpec s = parse_timeproduct(read_document(file));
    const double t = t0.value_or(default_anchor(s.interval));
    const ArrivalField f = arrival_time(s, t, fiber_point(x0, s), arrival_grid(g, s, max_lapse));
    Outcome out;
    json axes = json::array();
    for (const auto& a : f.axes) axes.push_back(nums(a));
    out.result = {{"t0", t},
                  {"axes", axes},
                  {"t_plus", nums(f.t_plus)},
                  {"t_minus", nums(f.t_minus)},
                  {"base_node", f.base_node},
                  {"spacing", f.spacing},
                  {"max_lapse", f.max_lapse}};
    std::ostringstream os;
    os.precision(10);
    os << "node";
    for (int i = 0; i < s.fiber_dim(); ++i) os << ',' << s.fiber_coords[i];
    os << ",t_plus,t_minus\n";
    for (std::size_t i = 0; i < f.nodes(); ++i) {
        const Vec x = f.node(i);
        os << i;
        for (int k = 0; k < x.size(); ++k) os << ',' << x(k);
        os << ',' << f.t_plus[i] << ',' << f.t_minus[i] << '\n';
    }
    out.csv = os.str();
    out.tolerances = {{"max_lapse", max_lapse}};
    return out;
}

Outcome horizon_cmd(const Globals& g, const std::string& file, const std::vector<double>& x0, std::vector<double> times,
                    double max_lapse) {
    const TimeProductSpec s = parse_timeproduct(read_document(file));
    if (times.empty()) times = {default_anchor(s.interval)};
    const HorizonReport r = horizon_check(s, fiber_point(x0, s), arrival_grid(g, s, max_lapse), times);
    Outcome out;
    out.result = {{"no_past_horizon", r.no_past_horizon},
                  {"no_future_horizon", r.no_future_horizon},
                  {"samples", r.samples},
                  {"window", r.window},
                  {"times", nums(times)}};
    out.tolerances = {{"max_lapse", max_lapse}};
    return out;
}

MpWaveSpec as_mp(const json& doc) {
    return document_kind(doc) == "planewave" ? parse_planewave(doc).as_mpwave() : parse_mpwave(doc);
}

json mp_json(const MpResult& r) {
    json j = {{"certified", r.certified}, {"r", num(r.r)},       {"k1", num(r.k1)},
              {"k2", num(r.k2)},          {"a", num(r.a)},       {"extrapolated", r.extrapolated},
              {"reason", r.reason}};
    if (r.certified) {
        json comps = json::array();
        for (const auto& c : r.map.components()) comps.push_back(c.to_string());
        j["map"] = {{"coords", r.map.coords()}, {"components", comps}};
        j["verdict"] = to_json(r.verdict);
    }
    return j;
}

Outcome mpwave_check_cmd(const Globals& g, const std::vector<std::string>& files) {
    const json d1 = read_document(files[0]), d2 = read_document(files[1]);
    Outcome out;
    if (document_kind(d1) == "planewave" && document_kind(d2) == "planewave") {
        const PolVerdict v = pol_check(parse_planewave(d1), parse_planewave(d2), default_u_grid(g.grid.value_or(401)));
        out.result = {{"isocausal", v.isocausal},
                       {"ratio12", num(v.ratio12)},
                       {"ratio21", num(v.ratio21)},
                       {"ratio12_decoupled", num(v.ratio12_decoupled)},
                       {"ratio21_decoupled", num(v.ratio21_decoupled)},
                       {"forward", mp_json(v.forward)},
                       {"backward", mp_json(v.backward)},
                       {"reason", v.reason}};
        out.code = v.isocausal ? 0 : 2;
        out.tolerances = {{"u_samples", g.grid.value_or(401)}};
        return out;
    }
    const MpWaveSpec s1 = as_mp(d1), s2 = as_mp(d2);
    if (s1.fiber_dim() != s2.fiber_dim()) throw InputError("waves have different fibre dimensions");
    const SampleGrid grid = sample_grid(g, s1.chart());
    const MpResult r = mp_causal_check(s1, s2, grid);
    out.result = mp_json(r);
    out.code = r.certified ? map_outcome_code(r.verdict.outcome) : 2;
    out.tolerances = {{"samples", grid.size()}};
    return out;
}

Outcome mpwave_profile_cmd(const Globals& g, const std::string& file) {
    const PlaneWaveSpec s = parse_planewave(read_document(file));
    const FrequencyProfile p = planewave_profile(s, default_u_grid(g.grid.value_or(401)));
    Outcome out;
    json sig = json::array();
    for (const auto& x : p.signature) sig.push_back({x.positives, x.negatives, x.zeros});
    out.result = {{"u", nums(p.u)},
                  {"signature", sig},
                  {"abs_max", nums(p.abs_max)},
                  {"abs_min", nums(p.abs_min)},
                  {"constant_signature", p.constant_signature},
                  {"definiteness", p.definiteness},
                  {"max_sup", num(p.max_sup)},
                  {"min_inf", num(p.min_inf)},
                  {"self_ratio", num(p.self_ratio)}};
    return out;
}

Outcome mpwave_weyl_cmd(const std::string& file, double u) {
    const PlaneWaveSpec s = parse_planewave(read_document(file));
    const Mat h = s.fiber_metric();
    const Eigen::LLT<Mat> llt(h);
    if (llt.info() != Eigen::Success) throw InputError("fibre metric is not positive definite");
    const Mat Linv = llt.matrixL().solve(Mat::Identity(h.rows(), h.cols()));
    const Mat Q = Linv * s.frequency(u) * Linv.transpose();
    const WeylReport w = weyl_flatness(Q, s.fiber_dim() + 2);
    Outcome out;
    out.result = {{"u", u}, {"Q", to_json(Q)}, {"components", to_json(w.components)}, {"flat", w.flat}, {"lambda", num(w.lambda)}};
    out.tolerances = {{"flatness_rel", 1e-12}};
    return out;
}

Outcome mpwave_boundary_cmd(const std::string& file) {
    const BoundaryReport r = boundary_report(parse_planewave(read_document(file)));
    Outcome out;
    out.result = {{"kind", to_string(r.kind)},
                  {"conformally_flat", r.conformally_flat},
                  {"signature", {r.signature.positives, r.signature.negatives, r.signature.zeros}},
                  {"canonical_Q", to_json(r.canonical_Q)},
                  {"chain", r.chain}};
    return out;
}

struct OracleFlags {
    std::string file;
    std::string fixture;
    std::optional<double> scale;
    std::string bridge;
    std::vector<double> at;
    std::string relation;
    std::string direction;
    std::optional<int> j;
};

GridJob oracle_job(const OracleFlags& f) {
    GridJob job;
    if (!f.file.empty()) job = parse_gridjob(read_document(f.file));
    if (!f.fixture.empty()) {
        job.fixture = f.fixture;
        job.metric.reset();
    }
    if (!job.fixture && !job.metric) throw InputError("give --fixture or a gridjob document");
    if (f.scale) job.scale = *f.scale;
    if (!f.bridge.empty()) job.bridge = parse_bridge(f.bridge, "--bridge");
    if (!f.at.empty()) {
        if (f.at.size() != 2) throw InputError("--at needs two coordinates");
        job.node = std::array<double, 2>{f.at[0], f.at[1]};
    }
    if (!f.relation.empty()) job.relation = parse_relation(f.relation, "--relation");
    if (!f.direction.empty()) job.direction = parse_direction(f.direction, "--dir");
    if (f.j) job.j = *f.j;
    return job;
}

Fixture job_fixture(const GridJob& job) {
    if (job.fixture) return make_fixture(*job.fixture, job.scale, job.bridge);
    Fixture f;
    f.name = "custom";
    f.metric = *job.metric;
    f.grid = CausalGrid(f.metric, job.axes[0].second, job.axes[1].second);
    return f;
}

std::size_t job_node(const GridJob& job, const CausalGrid& g) {
    if (!job.node) throw InputError("this command needs a node (--at x0,x1 or \"node\")");
    const std::size_t k = g.nearest((*job.node)[0], (*job.node)[1]);
    if (!g.live(k)) throw InputError("the node nearest to the requested point is removed");
    return k;
}

json node_json(const CausalGrid& g, std::size_t k) { return {{"index", k}, {"point", to_json(g.point(k))}}; }

json grid_summary(const Fixture& f) {
    const CausalGrid& g = f.grid;
    std::size_t causal = 0, timelike = 0;
    for (std::size_t k = 0; k < g.size(); ++k) {
        causal += static_cast<std::size_t>(std::popcount(g.causal_edges(k)));
        timelike += static_cast<std::size_t>(std::popcount(g.timelike_edges(k)));
    }
    return {{"fixture", f.name},     {"n0", g.n0()},           {"n1", g.n1()},
            {"h0", g.axis(0).h},     {"h1", g.axis(1).h},      {"cylinder", g.cylinder()},
            {"nodes", g.size()},     {"live", g.live_count()}, {"causal_edges", causal},
            {"timelike_edges", timelike}, {"hypersurfaces", f.hypersurfaces.size()}};
}

Outcome oracle_build_cmd(const OracleFlags& flags) {
    const GridJob job = oracle_job(flags);
    const Fixture f = job_fixture(job);
    Outcome out;
    json res = grid_summary(f);
    if (f.grid.cylinder()) {
        const ImprisonmentReport r = imprisonment_probe(f.grid);
        res["imprisonment"] = {{"imprisoned", r.imprisoned}, {"band", r.band},     {"band_lo", r.band_lo},
                               {"band_hi", r.band_hi},       {"terminal_band", r.terminal_band},
                               {"probed", r.probed},         {"reason", r.reason}};
    }
    out.result = res;
    out.csv = f.grid.csv();
    return out;
}

Outcome oracle_reach_cmd(const OracleFlags& flags) {
    const GridJob job = oracle_job(flags);
    const Fixture f = job_fixture(job);
    const std::size_t k = job_node(job, f.grid);
    const ReachKind kind = job.relation.value_or(ReachKind::Causal);
    const Direction dir = job.direction.value_or(Direction::Future);
    const ReachSet r = reach(f.grid, {k}, kind, dir);
    Outcome out;
    const auto members = r.nodes.members();
    out.result = {{"generator", node_json(f.grid, k)},
                  {"relation", kind == ReachKind::Causal ? "J" : "I"},
                  {"direction", dir == Direction::Future ? "future" : "past"},
                  {"count", members.size()},
                  {"live", f.grid.live_count()},
                  {"members", members}};
    std::ostringstream os;
    os.precision(10);
    os << "node,x0,x1,member\n";
    for (std::size_t i = 0; i < f.grid.size(); ++i) {
        const Vec p = f.grid.point(i);
        os << i << ',' << p(0) << ',' << p(1) << ',' << (r.nodes.test(i) ? 1 : 0) << '\n';
    }
    out.csv = os.str();
    return out;
}

json curve_json(const CausalGrid& g, const PolyCurve& c) {
    return {{"nodes", c.nodes.size()},
            {"start", node_json(g, c.nodes.front())},
            {"end", node_json(g, c.nodes.back())},
            {"null", c.null()},
            {"causal", c.causal()}};
}

Outcome oracle_chain_cmd(const OracleFlags& flags) {
    const GridJob job = oracle_job(flags);
    const Fixture f = job_fixture(job);
    const int j = job.j.value_or(1);
    const ChainResult r = chain_obstruction(f.grid, j);
    Outcome out;
    json curves = json::array();
    for (const auto& c : r.curves) curves.push_back(curve_json(f.grid, c));
    out.result = {{"j", j}, {"achievable", r.achievable}, {"candidates", r.candidates}, {"reason", r.reason}, {"curves", curves}};
    out.code = r.achievable ? 0 : 2;
    out.tolerances = {{"cell_tolerance", 1}, {"common_past_samples", 9}};
    return out;
}

json coverage_json(const CoverageReport& c) {
    return {{"covers_J", c.covers_J}, {"covers_closure_J", c.covers_closure_J}, {"uncovered", c.uncovered}};
}

Outcome oracle_cover_cmd(const Globals& g, const OracleFlags& flags) {
    const GridJob job = oracle_job(flags);
    Outcome out;
    if (job.fixture && job.fixture->rfind("cyl:", 0) == 0) {
        double L = 0.0;
        try {
            L = std::stod(job.fixture->substr(4));
        } catch (const std::exception&) {
            throw InputError("bad cylinder length in '" + *job.fixture + "'");
        }
        const int circle = g.grid.value_or(static_cast<int>(std::lround(512 * job.scale)));
        const CylinderRank r = cylinder_rank(L, circle);
        out.result = {{"fixture", *job.fixture}, {"rank", r.rank}, {"geodesic", coverage_json(r.geodesic)}};
        out.result["helix_slope"] = r.helix_slope ? json(*r.helix_slope) : json(nullptr);
        out.tolerances = {{"circle_nodes", circle}, {"closure_cells", 1}};
        return out;
    }
    const Fixture f = job_fixture(job);
    if (f.hypersurfaces.empty()) throw InputError("fixture '" + f.name + "' has no distinguished hypersurfaces");
    json list = json::array();
    for (const auto& s : f.hypersurfaces) {
        const HypersurfaceReport r = hypersurface_tests(f.grid, s);
        json e = curve_json(f.grid, s);
        e["acausal"] = r.acausal;
        e["achronal"] = r.achronal;
        e["covers"] = r.covers;
        e["uncovered"] = r.uncovered;
        list.push_back(e);
    }
    out.result = {{"fixture", f.name}, {"hypersurfaces", list}};
    if (f.hypersurfaces.size() > 1) out.result["causally_disjoint"] = causally_disjoint(f.grid, f.hypersurfaces);
    return out;
}

Outcome oracle_closedness_cmd(const OracleFlags& flags) {
    const GridJob job = oracle_job(flags);
    const Fixture f = job_fixture(job);
    const std::size_t k = job_node(job, f.grid);
    const ClosednessReport r = closedness_probe(f.grid, k);
    Outcome out;
    out.result = {{"node", node_json(f.grid, k)},
                  {"jplus_closed", r.jplus_closed},
                  {"jminus_closed", r.jminus_closed},
                  {"jplus_jump_cells", r.jplus_jump},
                  {"jminus_jump_cells", r.jminus_jump},
                  {"jplus_is_closure_of_iplus", r.jplus_is_closure_of_iplus},
                  {"jminus_is_closure_of_iminus", r.jminus_is_closure_of_iminus}};
    out.code = r.jplus_closed && r.jminus_closed ? 0 : 2;
    out.tolerances = {{"neighbour_cells", 2}, {"closure_cells", 1}};
    return out;
}

void emit(const Globals& g, const std::string& text) {
    if (g.out.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream f(g.out);
    if (!f) throw InputError("cannot write '" + g.out + "'");
    f << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"isocausal: causal relations between Lorentzian metrics"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--grid", g.grid, "samples per axis (or circle nodes for cylinder evidence)");
    app.add_option("--seed", g.seed, "random seed")->capture_default_str();
    app.add_option("--tol", g.tol, "classification tolerance");
    app.add_option("--out", g.out, "write the report to this path");
    app.add_option("--format", g.format, "json or csv")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

    Handler handler;
    bool csv_ok = false;
    auto on = [&](CLI::App* sub, Handler h, bool csv = false) {
        sub->callback([&, h, csv] {
            handler = h;
            csv_ok = csv;
        });
    };

    std::string file, tensor_file;
    std::vector<std::string> files;
    std::vector<double> at, x0, times;
    std::optional<double> t0;
    double max_lapse = 50.0, amplitude = 0.5, width = 1.0, u = 0.0;

    auto* dp = app.add_subcommand("dp-check", "dominant-property classification of a tensor at a point");
    dp->add_option("spec", file, "metric document")->required();
    dp->add_option("--tensor", tensor_file, "document whose components give T");
    dp->add_option("--at", at, "point")->delimiter(',');
    on(dp, [&] { return dp_check(g, file, tensor_file, at); });

    auto* mc = app.add_subcommand("map-check", "verify a causal mapping on a sample grid");
    mc->add_option("specs", files, "g1 g2 phi documents")->required()->expected(3);
    on(mc, [&] { return map_check(g, files); });

    auto* ca = app.add_subcommand("cone-angles", "angles between d/dt and the null cone");
    ca->add_option("spec", file)->required();
    ca->add_option("--at", at)->delimiter(',');
    on(ca, [&] { return cone_angles_cmd(g, file, at); });

    auto* st = app.add_subcommand("stability", "flat cone bracket and its mappings");
    st->add_option("spec", file)->required();
    on(st, [&] { return stability_cmd(g, file); });

    auto* grw = app.add_subcommand("grw", "generalized Robertson-Walker analyses");
    grw->require_subcommand(1);
    GrwFlags gf;
    std::string f2;
    std::vector<std::string> interval2;
    auto grw_flags = [&](CLI::App* s) {
        s->add_option("--f", gf.f, "warping function");
        s->add_option("--interval", gf.interval, "time interval bounds")->expected(2);
        s->add_option("--fiber", gf.fiber, "fiber kind")->capture_default_str();
        s->add_option("--time-coord", gf.time_coord)->capture_default_str();
        s->add_option("--diameter", gf.diameter);
    };
    auto* gc = grw->add_subcommand("classify", "four-type classification");
    grw_flags(gc);
    gc->add_option("spec", file);
    on(gc, [&] {
        if (!file.empty() && !gf.f.empty()) throw InputError("give a spec file or --f, not both");
        return grw_classify_cmd(g, file.empty() ? grw_from_flags(gf.f, gf.interval, gf) : parse_grw(read_document(file)));
    });
    auto* gcmp = grw->add_subcommand("compare", "causal order and integral obstruction");
    grw_flags(gcmp);
    gcmp->add_option("--g", f2, "second warping function");
    gcmp->add_option("--interval2", interval2, "second interval (defaults to --interval)")->expected(2);
    gcmp->add_option("specs", files)->expected(0, 2);
    on(gcmp, [&] {
        if (!files.empty()) {
            if (files.size() != 2) throw InputError("compare needs two spec files");
            return grw_compare_cmd(g, parse_grw(read_document(files[0])), parse_grw(read_document(files[1])));
        }
        return grw_compare_cmd(g, grw_from_flags(gf.f, gf.interval, gf),
                               grw_from_flags(f2, interval2.empty() ? gf.interval : interval2, gf));
    });
    auto* gp = grw->add_subcommand("probe-desitter", "bands of raised and lowered de Sitter warpings");
    gp->add_option("--amplitude", amplitude)->capture_default_str();
    gp->add_option("--width", width)->capture_default_str();
    on(gp, [&] { return grw_probe_cmd(g, amplitude, width); });

    auto* ar = app.add_subcommand("arrival", "arrival lapses over the fiber of a time product");
    ar->add_option("spec", file)->required();
    ar->add_option("--t0", t0);
    ar->add_option("--x0", x0)->delimiter(',');
    ar->add_option("--max-lapse", max_lapse)->capture_default_str();
    on(ar, [&] { return arrival_cmd(g, file, t0, x0, max_lapse); }, true);

    auto* hz = app.add_subcommand("horizon", "particle horizon check of a time product");
    hz->add_option("spec", file)->required();
    hz->add_option("--x0", x0)->delimiter(',');
    hz->add_option("--times", times)->delimiter(',');
    hz->add_option("--max-lapse", max_lapse)->capture_default_str();
    on(hz, [&] { return horizon_cmd(g, file, x0, times, max_lapse); });

    auto* mp = app.add_subcommand("mpwave", "mp-wave and plane-wave analyses");
    mp->require_subcommand(1);
    auto* mpc = mp->add_subcommand("check", "scaling map between two waves");
    mpc->add_option("specs", files)->required()->expected(2);
    on(mpc, [&] { return mpwave_check_cmd(g, files); });
    auto* mpp = mp->add_subcommand("profile", "frequency matrix profile");
    mpp->add_option("spec", file)->required();
    on(mpp, [&] { return mpwave_profile_cmd(g, file); });
    auto* mpw = mp->add_subcommand("weyl", "Weyl components of the frequency matrix");
    mpw->add_option("spec", file)->required();
    mpw->add_option("--u", u, "u at which A is evaluated")->capture_default_str();
    on(mpw, [&] { return mpwave_weyl_cmd(file, u); });
    auto* mpb = mp->add_subcommand("boundary", "causal boundary report");
    mpb->add_option("spec", file)->required();
    on(mpb, [&] { return mpwave_boundary_cmd(file); });

    auto* orc = app.add_subcommand("oracle", "discrete two-dimensional causality");
    orc->require_subcommand(1);
    OracleFlags of;
    auto oracle_flags = [&](CLI::App* s) {
        s->add_option("spec", of.file, "gridjob document");
        s->add_option("--fixture", of.fixture);
        s->add_option("--scale", of.scale);
        s->add_option("--bridge", of.bridge);
        s->add_option("--at", of.at)->delimiter(',');
        s->add_option("--relation", of.relation, "I or J");
        s->add_option("--dir", of.direction, "future or past");
        s->add_option("--j", of.j);
    };
    auto* ob = orc->add_subcommand("build", "grid summary or CSV dump");
    oracle_flags(ob);
    on(ob, [&] { return oracle_build_cmd(of); }, true);
    auto* orr = orc->add_subcommand("reach", "future or past set of a node");
    oracle_flags(orr);
    on(orr, [&] { return oracle_reach_cmd(of); }, true);
    auto* och = orc->add_subcommand("chain", "chain obstruction search");
    oracle_flags(och);
    on(och, [&] { return oracle_chain_cmd(of); });
    auto* ocv = orc->add_subcommand("cover", "coverage and hypersurface tests");
    oracle_flags(ocv);
    on(ocv, [&] { return oracle_cover_cmd(g, of); });
    auto* ocl = orc->add_subcommand("closedness", "closedness of causal sets at a node");
    oracle_flags(ocl);
    on(ocl, [&] { return oracle_closedness_cmd(of); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    json command = json::array();
    for (int i = 1; i < argc; ++i) command.push_back(argv[i]);
    const auto start = std::chrono::steady_clock::now();
    json report = {{"command", command}, {"seed", g.seed}};
    int code = 0;
    try {
        if (g.format == "csv" && !csv_ok) throw InputError("--format csv is only available for grid dumps (oracle build, oracle reach, arrival)");
        Outcome o = handler();
        code = o.code;
        if (g.format == "csv") {
            emit(g, *o.csv);
            return code;
        }
        report["result"] = std::move(o.result);
        report["tolerances"] = std::move(o.tolerances);
    } catch (const InputError& e) {
        code = 1;
        report["error"] = {{"type", "input"}, {"message", e.what()}};
    } catch (const DomainError& e) {
        code = 3;
        report["error"] = {{"type", "domain"}, {"message", e.what()}};
    } catch (const NumericalError& e) {
        code = 3;
        report["error"] = {{"type", "numerical"}, {"message", e.what()}};
    }
    if (report.contains("error")) std::cerr << "error: " << report["error"]["message"].get<std::string>() << '\n';
    report["exit_code"] = code;
    report["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        emit(g, report.dump(2) + "\n");
    } catch (const InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return code;
}
