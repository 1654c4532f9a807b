#include "document.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <sstream>

namespace isocausal::cli {

namespace {

const std::set<std::string> kKinds = {"metric", "diffeo", "grw", "timeproduct", "mpwave", "planewave", "gridjob"};

std::string escape(const std::string& key) {
    std::string out;
    for (char c : key) {
        if (c == '~') out += "~0";
        else if (c == '/') out += "~1";
        else out += c;
    }
    return out;
}

[[noreturn]] void fail(const std::string& where, const std::string& what) {
    throw InputError((where.empty() ? "/" : where) + ": " + what);
}

std::string string_at(const json& v, const std::string& where) {
    if (!v.is_string()) fail(where, "expected a string");
    return v.get<std::string>();
}

std::vector<std::string> strings_at(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of strings");
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(string_at(v[i], where + "/" + std::to_string(i)));
    return out;
}

std::vector<ScalarExpr> exprs_at(const json& v, const std::string& where) {
    if (!v.is_array()) fail(where, "expected an array of expressions");
    std::vector<ScalarExpr> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(expr_at(v[i], where + "/" + std::to_string(i)));
    return out;
}

std::vector<std::vector<ScalarExpr>> expr_matrix_at(const json& v, const std::string& where, std::size_t n) {
    if (!v.is_array() || v.size() != n) fail(where, "expected a " + std::to_string(n) + " x " + std::to_string(n) + " array");
    std::vector<std::vector<ScalarExpr>> out;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string w = where + "/" + std::to_string(i);
        out.push_back(exprs_at(v[i], w));
        if (out.back().size() != n) fail(w, "row has the wrong length");
    }
    return out;
}

std::vector<Interval> intervals_at(const json& v, const std::string& where, std::size_t n) {
    if (!v.is_array() || v.size() != n) fail(where, "expected " + std::to_string(n) + " intervals");
    std::vector<Interval> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(interval_at(v[i], where + "/" + std::to_string(i)));
    return out;
}

void check_header(Fields& f) {
    const json& v = f.require("version");
    if (!v.is_number_integer() || v.get<int>() != 1) fail(f.where("version"), "only version 1 is supported");
    f.require("kind");
}

void expect_kind(const json& doc, const std::string& kind) {
    if (document_kind(doc) != kind) fail("/kind", "expected a '" + kind + "' document, got '" + document_kind(doc) + "'");
}

Chart chart_from(Fields& f, std::size_t& n) {
    Chart c;
    c.coords = strings_at(f.require("coords"), f.where("coords"));
    n = c.coords.size();
    if (n == 0) fail(f.where("coords"), "needs at least one coordinate");
    if (const json* d = f.optional("domain")) c.domain = intervals_at(*d, f.where("domain"), n);
    else c.domain.assign(n, Interval{});
    if (const json* m = f.optional("masks")) {
        const auto masks = strings_at(*m, f.where("masks"));
        for (std::size_t i = 0; i < masks.size(); ++i) {
            try {
                c.masks.push_back(ScalarExpr::parse_condition(masks[i]));
            } catch (const InputError& e) {
                fail(f.where("masks") + "/" + std::to_string(i), e.what());
            }
        }
    }
    return c;
}

MetricDoc metric_fields(Fields& f) {
    std::size_t n = 0;
    Chart c = chart_from(f, n);
    MetricDoc out;
    const auto comps = expr_matrix_at(f.require("components"), f.where("components"), n);
    const auto orient = exprs_at(f.require("orientation"), f.where("orientation"));
    if (orient.size() != n) fail(f.where("orientation"), "needs one component per coordinate");
    if (const json* t = f.optional("tensor")) out.tensor = expr_matrix_at(*t, f.where("tensor"), n);
    f.finish();
    out.metric = MetricField(std::move(c), comps, orient);
    return out;
}

GridAxis axis_from(const json& v, const std::string& where, std::string& name) {
    if (!v.is_object()) fail(where, "expected an axis object");
    Fields f(v, where);
    name = string_at(f.require("name"), f.where("name"));
    const std::string layout = f.optional("layout") ? string_at(*f.optional("layout"), f.where("layout")) : "inclusive";
    const json& nv = f.require("n");
    if (!nv.is_number_integer()) fail(f.where("n"), "expected an integer");
    const int n = nv.get<int>();
    GridAxis a;
    if (layout == "periodic") {
        a = GridAxis::periodic_circle(n);
    } else {
        const double lo = number_at(f.require("lo"), f.where("lo")), hi = number_at(f.require("hi"), f.where("hi"));
        if (layout == "inclusive") a = GridAxis::inclusive(lo, hi, n);
        else if (layout == "centered") a = GridAxis::centered(lo, hi, n);
        else fail(f.where("layout"), "expected inclusive, centered or periodic");
    }
    f.finish();
    return a;
}

json num(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

}  // namespace

json read_document(const std::string& path) {
    std::string text;
    if (path == "-") {
        text.assign(std::istreambuf_iterator<char>(std::cin), {});
    } else {
        std::ifstream in(path);
        if (!in) throw InputError("cannot read '" + path + "'");
        text.assign(std::istreambuf_iterator<char>(in), {});
    }
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(path + ": " + e.what());
    }
    if (!doc.is_object()) fail("", "a spec document must be a JSON object");
    if (!doc.contains("version")) fail("/version", "missing required field");
    if (!doc["version"].is_number_integer() || doc["version"].get<int>() != 1) fail("/version", "only version 1 is supported");
    if (!doc.contains("kind")) fail("/kind", "missing required field");
    const std::string kind = string_at(doc["kind"], "/kind");
    if (!kKinds.count(kind)) fail("/kind", "unknown kind '" + kind + "'");
    return doc;
}

std::string document_kind(const json& doc) {
    if (!doc.is_object() || !doc.contains("kind") || !doc["kind"].is_string()) fail("/kind", "missing document kind");
    return doc["kind"].get<std::string>();
}

Fields::Fields(const json& j, std::string pointer) : j_(j), ptr_(std::move(pointer)) {
    if (!j_.is_object()) fail(ptr_, "expected an object");
}

const json& Fields::require(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key)) fail(where(key), "missing required field");
    return j_[key];
}

const json* Fields::optional(const std::string& key) {
    seen_.insert(key);
    if (!j_.contains(key) || j_[key].is_null()) return nullptr;
    return &j_[key];
}

std::string Fields::where(const std::string& key) const { return ptr_ + "/" + escape(key); }

void Fields::finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
        if (!seen_.count(it.key())) fail(where(it.key()), "unknown field");
}

ScalarExpr expr_at(const json& v, const std::string& where) {
    if (v.is_number()) return ScalarExpr::constant(v.get<double>());
    if (!v.is_string()) fail(where, "expected an expression string or a number");
    try {
        return ScalarExpr::parse(v.get<std::string>());
    } catch (const InputError& e) {
        fail(where, e.what());
    }
}

double number_at(const json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const std::string s = v.get<std::string>();
        if (s == "inf" || s == "+inf") return kInf;
        if (s == "-inf") return -kInf;
    }
    fail(where, "expected a number");
}

Interval interval_at(const json& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) fail(where, "expected [lo, hi]");
    Interval I;
    I.lo = v[0].is_null() ? -kInf : number_at(v[0], where + "/0");
    I.hi = v[1].is_null() ? kInf : number_at(v[1], where + "/1");
    if (!(I.lo < I.hi)) fail(where, "needs lo < hi");
    return I;
}

Mat matrix_at(const json& v, const std::string& where) {
    if (!v.is_array() || v.empty()) fail(where, "expected a square numeric matrix");
    const std::size_t n = v.size();
    Mat m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::string w = where + "/" + std::to_string(i);
        if (!v[i].is_array() || v[i].size() != n) fail(w, "row has the wrong length");
        for (std::size_t j = 0; j < n; ++j) m(i, j) = number_at(v[i][j], w + "/" + std::to_string(j));
    }
    return m;
}

MetricDoc parse_metric(const json& doc) {
    expect_kind(doc, "metric");
    Fields f(doc, "");
    check_header(f);
    return metric_fields(f);
}

DiffeoSpec parse_diffeo(const json& doc) {
    expect_kind(doc, "diffeo");
    Fields f(doc, "");
    check_header(f);
    const auto coords = strings_at(f.require("coords"), f.where("coords"));
    const auto comps = exprs_at(f.require("components"), f.where("components"));
    if (comps.size() != coords.size()) fail(f.where("components"), "needs one component per coordinate");
    std::optional<std::vector<std::vector<ScalarExpr>>> jac;
    if (const json* j = f.optional("jacobian")) jac = expr_matrix_at(*j, f.where("jacobian"), coords.size());
    f.finish();
    return DiffeoSpec(coords, comps, jac);
}

bool fiber_is_compact(const std::string& fiber, const std::string& where) {
    static const std::set<std::string> compact = {"sphere", "S1", "Sn", "torus", "compact"};
    static const std::set<std::string> open = {"R", "Rn", "plane", "noncompact"};
    if (compact.count(fiber)) return true;
    if (open.count(fiber)) return false;
    fail(where, "unknown fiber '" + fiber + "'");
}

GRWSpec parse_grw(const json& doc) {
    expect_kind(doc, "grw");
    Fields f(doc, "");
    check_header(f);
    GRWSpec s;
    if (const json* t = f.optional("time_coord")) s.time_coord = string_at(*t, f.where("time_coord"));
    s.f = expr_at(f.require("f"), f.where("f"));
    s.interval = interval_at(f.require("interval"), f.where("interval"));
    s.fiber = f.optional("fiber") ? string_at(*f.optional("fiber"), f.where("fiber")) : "sphere";
    s.compact_fiber = fiber_is_compact(s.fiber, f.where("fiber"));
    if (const json* d = f.optional("diameter")) s.diameter = number_at(*d, f.where("diameter"));
    f.finish();
    return s;
}

TimeProductSpec parse_timeproduct(const json& doc) {
    expect_kind(doc, "timeproduct");
    Fields f(doc, "");
    check_header(f);
    TimeProductSpec s;
    if (const json* t = f.optional("time_coord")) s.time_coord = string_at(*t, f.where("time_coord"));
    s.interval = interval_at(f.require("interval"), f.where("interval"));
    if (const json* r = f.optional("rho")) s.rho = expr_at(*r, f.where("rho"));
    s.fiber_coords = strings_at(f.require("fiber_coords"), f.where("fiber_coords"));
    const std::size_t m = s.fiber_coords.size();
    if (const json* o = f.optional("omega")) s.omega = exprs_at(*o, f.where("omega"));
    if (const json* d = f.optional("fiber_domain")) s.fiber_domain = intervals_at(*d, f.where("fiber_domain"), m);
    s.h = expr_matrix_at(f.require("h"), f.where("h"), m);
    f.finish();
    return s;
}

MpWaveSpec parse_mpwave(const json& doc) {
    expect_kind(doc, "mpwave");
    Fields f(doc, "");
    check_header(f);
    MpWaveSpec s;
    s.fiber_coords = strings_at(f.require("fiber_coords"), f.where("fiber_coords"));
    const std::size_t m = s.fiber_coords.size();
    if (m == 0) fail(f.where("fiber_coords"), "needs at least one fibre coordinate");
    if (const json* d = f.optional("fiber_domain")) s.fiber_domain = intervals_at(*d, f.where("fiber_domain"), m);
    s.H = expr_at(f.require("H"), f.where("H"));
    s.h = expr_matrix_at(f.require("h"), f.where("h"), m);
    f.finish();
    return s;
}

PlaneWaveSpec parse_planewave(const json& doc) {
    expect_kind(doc, "planewave");
    Fields f(doc, "");
    check_header(f);
    PlaneWaveSpec s;
    const json& A = f.require("A");
    if (!A.is_array() || A.empty()) fail(f.where("A"), "expected a square matrix of expressions");
    s.A = expr_matrix_at(A, f.where("A"), A.size());
    if (const json* h = f.optional("h")) s.h = matrix_at(*h, f.where("h"));
    if (const json* l = f.optional("locally_symmetric")) {
        if (!l->is_boolean()) fail(f.where("locally_symmetric"), "expected a boolean");
        s.locally_symmetric = l->get<bool>();
    }
    f.finish();
    s.validate();
    return s;
}

Bridge parse_bridge(const std::string& s, const std::string& where) {
    if (s == "bump") return Bridge::BumpIntegral;
    if (s == "smoothstep") return Bridge::Smoothstep;
    fail(where, "expected bump or smoothstep");
}

ReachKind parse_relation(const std::string& s, const std::string& where) {
    if (s == "I") return ReachKind::Chronological;
    if (s == "J") return ReachKind::Causal;
    fail(where, "expected I or J");
}

Direction parse_direction(const std::string& s, const std::string& where) {
    if (s == "future") return Direction::Future;
    if (s == "past") return Direction::Past;
    fail(where, "expected future or past");
}

GridJob parse_gridjob(const json& doc) {
    expect_kind(doc, "gridjob");
    Fields f(doc, "");
    check_header(f);
    GridJob g;
    if (const json* x = f.optional("fixture")) g.fixture = string_at(*x, f.where("fixture"));
    if (const json* x = f.optional("scale")) g.scale = number_at(*x, f.where("scale"));
    if (const json* x = f.optional("bridge")) g.bridge = parse_bridge(string_at(*x, f.where("bridge")), f.where("bridge"));
    if (const json* x = f.optional("metric")) {
        Fields mf(*x, f.where("metric"));
        MetricDoc md = metric_fields(mf);
        if (md.metric.dim() != 2) fail(f.where("metric"), "grid metrics are two-dimensional");
        g.metric = md.metric;
        const json& axes = f.require("axes");
        if (!axes.is_array() || axes.size() != 2) fail(f.where("axes"), "expected two axis objects");
        for (std::size_t i = 0; i < 2; ++i) {
            std::string name;
            GridAxis a = axis_from(axes[i], f.where("axes") + "/" + std::to_string(i), name);
            if (name != md.metric.chart().coords[i]) fail(f.where("axes") + "/" + std::to_string(i) + "/name", "does not match the metric coordinate");
            g.axes.emplace_back(name, std::move(a));
        }
    }
    if (g.fixture.has_value() == g.metric.has_value()) fail(f.pointer(), "give exactly one of fixture and metric");
    if (const json* x = f.optional("node")) {
        if (!x->is_array() || x->size() != 2) fail(f.where("node"), "expected [x0, x1]");
        g.node = std::array<double, 2>{number_at((*x)[0], f.where("node") + "/0"), number_at((*x)[1], f.where("node") + "/1")};
    }
    if (const json* x = f.optional("relation")) g.relation = parse_relation(string_at(*x, f.where("relation")), f.where("relation"));
    if (const json* x = f.optional("direction"))
        g.direction = parse_direction(string_at(*x, f.where("direction")), f.where("direction"));
    if (const json* x = f.optional("j")) {
        if (!x->is_number_integer()) fail(f.where("j"), "expected an integer");
        g.j = x->get<int>();
    }
    f.finish();
    return g;
}

json to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
    return a;
}

json to_json(const Mat& m) {
    json a = json::array();
    for (int i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(num(m(i, j)));
        a.push_back(row);
    }
    return a;
}

json to_json(const MappingVerdict& v) {
    json j = {{"outcome", to_string(v.outcome)},
              {"samples", v.samples},
              {"skipped", v.skipped},
              {"min_margin", num(v.min_margin)},
              {"boundary_points", v.boundary_points},
              {"reason", v.reason}};
    if (v.witness_point) j["witness_point"] = to_json(*v.witness_point);
    if (v.witness_vector) j["witness_vector"] = to_json(*v.witness_vector);
    j["witness_verified"] = v.witness_verified;
    return j;
}

json to_json(const IntervalProfile& p) {
    auto end = [](const EndIntegral& e) {
        return json{{"kind", to_string(e.kind)}, {"value", num(e.value)}, {"error", num(e.error)}, {"shells", e.shells}};
    };
    return {{"past", end(p.past)}, {"future", end(p.future)}, {"L", num(p.L)}, {"error", num(p.error)}};
}

json to_json(const GRWClass& c) {
    return {{"type", type_name(c.type)}, {"roman", roman(c.type)}, {"L", num(c.L)}, {"label", c.to_string()}};
}

json to_json(const OrderResult& r) {
    return {{"relation", to_string(r.relation)}, {"strict", r.strict}, {"reason", r.reason}};
}

}  // namespace isocausal::cli
