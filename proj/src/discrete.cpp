#include "isocausal/discrete.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>
#include <sstream>

#include "isocausal/parallel.hpp"

namespace isocausal {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

bool bit(std::uint16_t mask, int o) { return (mask >> o) & 1u; }

// Half the widest angular gap between radius-2 lattice directions, atan(1/2) / 2.
constexpr double kNullStepSlack = 0.25;

}  // namespace

const std::array<std::array<int, 2>, kOffsetCount> kOffsets = {{{1, 0},
                                                                 {-1, 0},
                                                                 {0, 1},
                                                                 {0, -1},
                                                                 {1, 1},
                                                                 {1, -1},
                                                                 {-1, 1},
                                                                 {-1, -1},
                                                                 {1, 2},
                                                                 {1, -2},
                                                                 {-1, 2},
                                                                 {-1, -2},
                                                                 {2, 1},
                                                                 {2, -1},
                                                                 {-2, 1},
                                                                 {-2, -1}}};

GridAxis GridAxis::inclusive(double lo, double hi, int n) {
    if (n < 2 || !(hi > lo)) throw InputError("grid axis needs n >= 2 and hi > lo");
    GridAxis a;
    a.h = (hi - lo) / (n - 1);
    for (int k = 0; k < n; ++k) a.x.push_back(k + 1 == n ? hi : lo + k * a.h);
    return a;
}

GridAxis GridAxis::centered(double lo, double hi, int n) {
    if (n < 1 || !(hi > lo)) throw InputError("grid axis needs n >= 1 and hi > lo");
    GridAxis a;
    a.h = (hi - lo) / n;
    for (int k = 0; k < n; ++k) a.x.push_back(lo + (k + 0.5) * a.h);
    return a;
}

GridAxis GridAxis::periodic_circle(int n) {
    if (n < 3) throw InputError("circle needs at least three nodes");
    GridAxis a;
    a.h = kTwoPi / n;
    a.periodic = true;
    for (int k = 0; k < n; ++k) a.x.push_back(k * a.h);
    return a;
}

const char* to_string(EdgeKind k) {
    switch (k) {
        case EdgeKind::Timelike: return "timelike";
        case EdgeKind::Null: return "null";
        case EdgeKind::Spacelike: return "spacelike";
        case EdgeKind::Past: return "past";
    }
    return "?";
}

CausalGrid::CausalGrid(const MetricField& m, GridAxis a0, GridAxis a1) : metric_(m), axes_{std::move(a0), std::move(a1)} {
    if (m.dim() != 2) throw InputError("causal grids are two-dimensional");
    if (axes_[0].periodic) throw InputError("only axis 1 may be periodic");
    if (n0() < 2 || n1() < 2) throw InputError("causal grid needs at least two nodes per axis");
    const std::size_t N = static_cast<std::size_t>(n0()) * static_cast<std::size_t>(n1());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    live_.assign(N, 0);
    cone_.assign(N, {nan, nan});
    g_.assign(N, Mat());
    o_.assign(N, Vec());
    causal_.assign(N, 0);
    timelike_.assign(N, 0);

    for (std::size_t k = 0; k < N; ++k) {
        const Vec p = point(k);
        if (!m.in_domain(p) || m.masked(p)) continue;
        const SymMatrix G = m.at(p);
        const double scale = std::max(1.0, G.mat().cwiseAbs().maxCoeff());
        if (!(G.mat().determinant() < -1e-12 * scale * scale))
            throw DomainError("degenerate cone at (" + num(p(0)) + ", " + num(p(1)) + ")");
        const Vec o = m.orientation(p);
        const Mat F = orthonormal_frame(G, o);
        const Vec a = F.col(0) + F.col(1), b = F.col(0) - F.col(1);
        cone_[k] = {std::atan2(a(1), a(0)), std::atan2(b(1), b(0))};
        g_[k] = G.mat();
        o_[k] = o;
        live_[k] = 1;
    }

    for (std::size_t k = 0; k < N; ++k) {
        if (!live_[k]) continue;
        for (int o = 0; o < kOffsetCount; ++o) {
            const int d0 = kOffsets[o][0], d1 = kOffsets[o][1];
            const auto t = step(k, d0, d1);
            if (!t || !live_[*t]) continue;
            Vec mid = point(k);
            mid(0) += 0.5 * d0 * axes_[0].h;
            mid(1) += 0.5 * d1 * axes_[1].h;
            if (cylinder()) mid(1) = axes_[1].x[0] + std::fmod(mid(1) - axes_[1].x[0] + kTwoPi, kTwoPi);
            if (!metric_.in_domain(mid) || metric_.masked(mid)) continue;
            const EdgeKind a = classify(k, d0, d1), b = classify(*t, d0, d1);
            const bool ca = a == EdgeKind::Timelike || a == EdgeKind::Null;
            const bool cb = b == EdgeKind::Timelike || b == EdgeKind::Null;
            if (ca && cb) causal_[k] |= static_cast<std::uint16_t>(1u << o);
            if (a == EdgeKind::Timelike && b == EdgeKind::Timelike) timelike_[k] |= static_cast<std::uint16_t>(1u << o);
        }
    }
}

std::size_t CausalGrid::index(int i, int j) const {
    return static_cast<std::size_t>(i) * static_cast<std::size_t>(n1()) + static_cast<std::size_t>(j);
}

Vec CausalGrid::point(std::size_t k) const {
    Vec p(2);
    p << axes_[0].x[row(k)], axes_[1].x[col(k)];
    return p;
}

std::size_t CausalGrid::nearest(double x0, double x1) const {
    const int i = std::clamp(static_cast<int>(std::lround((x0 - axes_[0].x[0]) / axes_[0].h)), 0, n0() - 1);
    int j = static_cast<int>(std::lround((x1 - axes_[1].x[0]) / axes_[1].h));
    j = cylinder() ? ((j % n1()) + n1()) % n1() : std::clamp(j, 0, n1() - 1);
    return index(i, j);
}

std::optional<std::size_t> CausalGrid::step(std::size_t k, int d0, int d1) const {
    const int i = row(k) + d0;
    int j = col(k) + d1;
    if (i < 0 || i >= n0()) return std::nullopt;
    if (cylinder()) j = ((j % n1()) + n1()) % n1();
    else if (j < 0 || j >= n1()) return std::nullopt;
    return index(i, j);
}

std::size_t CausalGrid::live_count() const { return static_cast<std::size_t>(std::count(live_.begin(), live_.end(), 1)); }

EdgeKind CausalGrid::classify(std::size_t k, int d0, int d1) const {
    if (!live_[k]) throw InputError("edge classification at a removed node");
    Vec d(2);
    d << d0 * axes_[0].h, d1 * axes_[1].h;
    const Mat& G = g_[k];
    const double q = d.dot(G * d);
    const double s = d.dot(G * o_[k]);
    const double scale = G.cwiseAbs().maxCoeff() * d.squaredNorm();
    if (std::fabs(q) <= 1e-9 * scale) return s > 0.0 ? EdgeKind::Null : EdgeKind::Past;
    if (q > 0.0) return s > 0.0 ? EdgeKind::Timelike : EdgeKind::Past;
    return EdgeKind::Spacelike;
}

std::string CausalGrid::csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "node,x0,x1,cone_angle1,cone_angle2,mask\n";
    for (std::size_t k = 0; k < size(); ++k) {
        const Vec p = point(k);
        os << k << ',' << p(0) << ',' << p(1) << ',';
        if (live_[k]) os << cone_[k][0] << ',' << cone_[k][1] << ",0\n";
        else os << ",,1\n";
    }
    return os.str();
}

std::size_t NodeSet::count() const {
    std::size_t c = 0;
    for (auto w : bits_) c += static_cast<std::size_t>(std::popcount(w));
    return c;
}

NodeSet& NodeSet::operator|=(const NodeSet& o) {
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= o.bits_[i];
    return *this;
}

NodeSet& NodeSet::operator&=(const NodeSet& o) {
    for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= o.bits_[i];
    return *this;
}

bool NodeSet::subset_of(const NodeSet& o) const {
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i] & ~o.bits_[i]) return false;
    return true;
}

std::vector<std::size_t> NodeSet::members() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        std::uint64_t w = bits_[i];
        while (w) {
            out.push_back(i * 64 + static_cast<std::size_t>(std::countr_zero(w)));
            w &= w - 1;
        }
    }
    return out;
}

namespace {

// Breadth-first search over (node, used-a-timelike-edge). With `strict` the
// generators are not members unless reached again through an edge.
NodeSet search(const CausalGrid& g, const std::vector<std::size_t>& from, ReachKind kind, Direction dir, bool strict) {
    const std::size_t N = g.size();
    const bool chrono = kind == ReachKind::Chronological;
    std::vector<std::uint8_t> seen(N, 0);
    std::vector<std::size_t> queue;
    auto push = [&](std::size_t k, int t) {
        const std::uint8_t b = static_cast<std::uint8_t>(1u << t);
        if (seen[k] & b) return;
        seen[k] |= b;
        queue.push_back(k * 2 + static_cast<std::size_t>(t));
    };
    auto expand = [&](std::size_t k, int t) {
        for (int o = 0; o < kOffsetCount; ++o) {
            const int d0 = kOffsets[o][0], d1 = kOffsets[o][1];
            if (dir == Direction::Future) {
                if (!bit(g.causal_edges(k), o)) continue;
                const int nt = chrono ? (t | static_cast<int>(bit(g.timelike_edges(k), o))) : 0;
                push(*g.step(k, d0, d1), nt);
            } else {
                const auto src = g.step(k, -d0, -d1);
                if (!src || !g.live(*src) || !bit(g.causal_edges(*src), o)) continue;
                const int nt = chrono ? (t | static_cast<int>(bit(g.timelike_edges(*src), o))) : 0;
                push(*src, nt);
            }
        }
    };
    for (std::size_t f : from) {
        if (f >= N || !g.live(f)) throw InputError("reach generator is not a live node");
        if (strict) expand(f, 0);
        else push(f, 0);
    }
    for (std::size_t q = 0; q < queue.size(); ++q) expand(queue[q] >> 1, static_cast<int>(queue[q] & 1));
    NodeSet out(N);
    const std::uint8_t want = chrono ? 2 : 1;
    for (std::size_t k = 0; k < N; ++k)
        if (seen[k] & want) out.set(k);
    return out;
}

std::array<int, 2> lattice_delta(const CausalGrid& g, std::size_t a, std::size_t b) {
    const int di = g.row(b) - g.row(a);
    int dj = g.col(b) - g.col(a);
    if (g.cylinder()) {
        const int n = g.n1();
        dj = ((dj % n) + n) % n;
        if (dj >= (n + 1) / 2) dj -= n;
    }
    return {di, dj};
}

EdgeKind segment_kind(const CausalGrid& g, std::size_t a, std::size_t b) {
    const auto d = lattice_delta(g, a, b);
    const EdgeKind ka = g.classify(a, d[0], d[1]), kb = g.classify(b, d[0], d[1]);
    if (ka == EdgeKind::Past || kb == EdgeKind::Past) return EdgeKind::Past;
    if (ka == EdgeKind::Spacelike || kb == EdgeKind::Spacelike) return EdgeKind::Spacelike;
    if (ka == EdgeKind::Timelike && kb == EdgeKind::Timelike) return EdgeKind::Timelike;
    return EdgeKind::Null;
}

NodeSet union_with(NodeSet s, const std::vector<std::size_t>& nodes) {
    for (auto n : nodes) s.set(n);
    return s;
}

}  // namespace

ReachSet reach(const CausalGrid& g, const std::vector<std::size_t>& from, ReachKind kind, Direction dir) {
    ReachSet r;
    r.nodes = search(g, from, kind, dir, false);
    r.generators = from;
    r.kind = kind;
    r.dir = dir;
    return r;
}

ReachSet future_set(const CausalGrid& g, std::size_t node, ReachKind kind) {
    return reach(g, {node}, kind, Direction::Future);
}

ReachSet past_set(const CausalGrid& g, std::size_t node, ReachKind kind) {
    return reach(g, {node}, kind, Direction::Past);
}

NodeSet dilate(const CausalGrid& g, const NodeSet& s, int cells) {
    NodeSet out(g.size());
    for (std::size_t k : s.members())
        for (int di = -cells; di <= cells; ++di)
            for (int dj = -cells; dj <= cells; ++dj) {
                const auto t = g.step(k, di, dj);
                if (t && g.live(*t)) out.set(*t);
            }
    return out;
}

NodeSet live_set(const CausalGrid& g) {
    NodeSet s(g.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        if (g.live(k)) s.set(k);
    return s;
}

bool PolyCurve::causal() const {
    if (segments.empty()) return false;
    return std::all_of(segments.begin(), segments.end(),
                       [](EdgeKind k) { return k == EdgeKind::Timelike || k == EdgeKind::Null; });
}

bool PolyCurve::null() const {
    if (segments.empty()) return false;
    return std::all_of(segments.begin(), segments.end(), [](EdgeKind k) { return k == EdgeKind::Null; });
}

bool PolyCurve::timelike(const CausalGrid& g, int window) const {
    if (!causal()) return false;
    const std::size_t n = nodes.size();
    const std::size_t w = static_cast<std::size_t>(std::max(1, window));
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const std::size_t j = std::min(i + w, n - 1);
        if (segment_kind(g, nodes[i], nodes[j]) != EdgeKind::Timelike) return false;
        if (j == n - 1) break;
    }
    return true;
}

PolyCurve make_curve(const CausalGrid& g, const std::vector<std::size_t>& nodes) {
    PolyCurve c;
    c.nodes = nodes;
    for (auto n : nodes)
        if (n >= g.size() || !g.live(n)) throw InputError("curve node is not a live grid node");
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i) c.segments.push_back(segment_kind(g, nodes[i], nodes[i + 1]));
    return c;
}

PolyCurve null_curve(const CausalGrid& g, std::size_t start, int sense) {
    if (start >= g.size() || !g.live(start)) throw InputError("curve start is not a live node");
    std::vector<std::size_t> nodes{start};
    std::vector<std::uint8_t> visited(g.size(), 0);
    visited[start] = 1;
    std::size_t k = start;
    const double h0 = g.axis(0).h, h1 = g.axis(1).h;
    while (true) {
        const auto& c = g.cone(k);
        const double target = sense * std::sin(c[0]) >= sense * std::sin(c[1]) ? c[0] : c[1];
        int best = -1;
        double best_d = kInf;
        for (int o = 0; o < kOffsetCount; ++o) {
            if (!bit(g.causal_edges(k), o)) continue;
            const double ang = std::atan2(kOffsets[o][1] * h1, kOffsets[o][0] * h0);
            const double d = std::fabs(std::remainder(ang - target, kTwoPi));
            if (d < best_d) {
                best_d = d;
                best = o;
            }
        }
        if (best < 0 || best_d > kNullStepSlack) break;
        const std::size_t next = *g.step(k, kOffsets[best][0], kOffsets[best][1]);
        if (visited[next]) break;
        visited[next] = 1;
        nodes.push_back(next);
        k = next;
    }
    return make_curve(g, nodes);
}

ImprisonmentReport imprisonment_probe(const CausalGrid& g) {
    ImprisonmentReport rep;
    const int n0 = g.n0(), n1 = g.n1();
    const int lo = n0 / 3, hi = std::max(lo + 1, 2 * n0 / 3);
    const int rs = std::max(1, (hi - lo) / 24), cs = std::max(1, n1 / 8);
    const auto& t = g.axis(0).x;
    rep.imprisoned = true;
    for (int i = lo; i < hi; i += rs)
        for (int j = 0; j < n1; j += cs) {
            const std::size_t k = g.index(i, j);
            if (!g.live(k)) continue;
            ++rep.probed;
            int rmin = n0, rmax = -1;
            for (std::size_t m : future_set(g, k, ReachKind::Causal).nodes.members()) {
                rmin = std::min(rmin, g.row(m));
                rmax = std::max(rmax, g.row(m));
            }
            if (rmin == 0 || rmax == n0 - 1) {
                rep.imprisoned = false;
                rep.reason = "forward reach from (" + num(t[i]) + ", " + num(g.axis(1).x[j]) + ") reaches the grid edge";
                return rep;
            }
            if (t[rmax] - t[rmin] > rep.band) {
                rep.band = t[rmax] - t[rmin];
                rep.band_lo = t[rmin];
                rep.band_hi = t[rmax];
            }
        }
    if (rep.probed == 0) {
        rep.imprisoned = false;
        rep.reason = "no live node in the probed rows";
        return rep;
    }

    // terminal strongly connected sets (Tarjan, iterative)
    const std::size_t N = g.size();
    std::vector<int> index(N, -1), low(N, 0), comp(N, -1);
    std::vector<std::uint8_t> on_stack(N, 0);
    std::vector<std::size_t> stack;
    int counter = 0, ncomp = 0;
    struct Frame {
        std::size_t v;
        int o;
    };
    for (std::size_t s = 0; s < N; ++s) {
        if (!g.live(s) || index[s] >= 0) continue;
        std::vector<Frame> calls{{s, 0}};
        index[s] = low[s] = counter++;
        stack.push_back(s);
        on_stack[s] = 1;
        while (!calls.empty()) {
            const std::size_t v = calls.back().v;
            if (calls.back().o < kOffsetCount) {
                const int o = calls.back().o++;
                if (!bit(g.causal_edges(v), o)) continue;
                const std::size_t w = *g.step(v, kOffsets[o][0], kOffsets[o][1]);
                if (index[w] < 0) {
                    index[w] = low[w] = counter++;
                    stack.push_back(w);
                    on_stack[w] = 1;
                    calls.push_back({w, 0});
                } else if (on_stack[w]) {
                    low[v] = std::min(low[v], index[w]);
                }
                continue;
            }
            if (low[v] == index[v]) {
                std::size_t w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = 0;
                    comp[w] = ncomp;
                } while (w != v);
                ++ncomp;
            }
            calls.pop_back();
            if (!calls.empty()) low[calls.back().v] = std::min(low[calls.back().v], low[v]);
        }
    }
    std::vector<int> cmin(ncomp, n0), cmax(ncomp, -1), csize(ncomp, 0);
    std::vector<std::uint8_t> terminal(ncomp, 1);
    for (std::size_t v = 0; v < N; ++v) {
        if (comp[v] < 0) continue;
        const int c = comp[v];
        cmin[c] = std::min(cmin[c], g.row(v));
        cmax[c] = std::max(cmax[c], g.row(v));
        ++csize[c];
        for (int o = 0; o < kOffsetCount; ++o)
            if (bit(g.causal_edges(v), o) && comp[*g.step(v, kOffsets[o][0], kOffsets[o][1])] != c) terminal[c] = 0;
    }
    for (int c = 0; c < ncomp; ++c)
        if (terminal[c] && csize[c] > 1 && cmin[c] > 0 && cmax[c] < n0 - 1)
            rep.terminal_band = std::max(rep.terminal_band, t[cmax[c]] - t[cmin[c]]);
    rep.reason = "every probed forward reach set stays inside the grid rows";
    return rep;
}

ChainResult chain_obstruction(const CausalGrid& g, int j) {
    if (j < 1) throw InputError("chain length must be at least 1");
    if (g.cylinder()) throw InputError("chain search needs a rectangle-like grid");
    ChainResult res;
    const NodeSet all = live_set(g);
    auto covers = [&](const PolyCurve& c) {
        NodeSet u = search(g, c.nodes, ReachKind::Chronological, Direction::Future, false);
        u |= search(g, c.nodes, ReachKind::Chronological, Direction::Past, false);
        return all.subset_of(union_with(std::move(u), c.nodes));
    };
    // lower inside the common chronological past of sampled nodes of upper
    auto below = [&](const PolyCurve& lower, const PolyCurve& upper) {
        NodeSet common = all;
        const std::size_t n = upper.nodes.size();
        const std::size_t samples = std::min<std::size_t>(n, 9);
        for (std::size_t s = 0; s < samples; ++s) {
            const std::size_t i = samples == 1 ? 0 : s * (n - 1) / (samples - 1);
            common &= search(g, {upper.nodes[i]}, ReachKind::Chronological, Direction::Past, false);
        }
        return std::all_of(lower.nodes.begin(), lower.nodes.end(), [&](std::size_t k) { return common.test(k); });
    };

    std::string failure;
    for (int first : {+1, -1}) {
        std::vector<PolyCurve> curves;
        int row_min = 0;
        bool ok = true;
        for (int i = 0; i < j && ok; ++i) {
            const int sense = i % 2 == 0 ? first : -first;
            const int col = sense > 0 ? 0 : g.n1() - 1;
            bool placed = false, below_ok = curves.empty();
            for (int r = row_min; r < g.n0() && !placed; ++r) {
                const std::size_t k = g.index(r, col);
                if (!g.live(k)) continue;
                PolyCurve c = null_curve(g, k, sense);
                ++res.candidates;
                if (c.nodes.size() < 2) continue;
                if (!below_ok) {
                    if (!below(curves.back(), c)) continue;
                    below_ok = true;  // later starts stay in the common future
                }
                if (!covers(c)) continue;
                row_min = g.row(c.nodes.back());
                curves.push_back(std::move(c));
                placed = true;
            }
            if (!placed) {
                ok = false;
                failure = "no placement found for curve " + std::to_string(i + 1) + " of " + std::to_string(j);
            }
        }
        if (ok) {
            res.achievable = true;
            res.curves = std::move(curves);
            res.reason = "found " + std::to_string(j) + " zig-zag null curves";
            return res;
        }
    }
    res.reason = failure;
    return res;
}

HypersurfaceReport hypersurface_tests(const CausalGrid& g, const PolyCurve& S) {
    if (S.nodes.empty()) throw InputError("empty hypersurface");
    HypersurfaceReport r;
    auto hits = [&](const NodeSet& s) {
        return std::any_of(S.nodes.begin(), S.nodes.end(), [&](std::size_t k) { return s.test(k); });
    };
    r.acausal = !hits(search(g, S.nodes, ReachKind::Causal, Direction::Future, true));
    r.achronal = !hits(search(g, S.nodes, ReachKind::Chronological, Direction::Future, true));
    NodeSet u = search(g, S.nodes, ReachKind::Chronological, Direction::Future, false);
    u |= search(g, S.nodes, ReachKind::Chronological, Direction::Past, false);
    u = union_with(std::move(u), S.nodes);
    const NodeSet all = live_set(g);
    NodeSet covered = all;
    covered &= u;
    r.uncovered = all.count() - covered.count();
    r.covers = r.uncovered == 0;
    return r;
}

bool causally_disjoint(const CausalGrid& g, const std::vector<PolyCurve>& sets) {
    for (std::size_t i = 0; i < sets.size(); ++i) {
        const NodeSet f = search(g, sets[i].nodes, ReachKind::Causal, Direction::Future, false);
        for (std::size_t j = 0; j < sets.size(); ++j) {
            if (i == j) continue;
            for (auto k : sets[j].nodes)
                if (f.test(k)) return false;
        }
    }
    return true;
}

CoverageReport coverage_criterion(const CausalGrid& g, const PolyCurve& curve) {
    if (curve.nodes.empty()) throw InputError("empty curve");
    CoverageReport r;
    NodeSet u = search(g, curve.nodes, ReachKind::Causal, Direction::Future, false);
    u |= search(g, curve.nodes, ReachKind::Causal, Direction::Past, false);
    const NodeSet all = live_set(g);
    NodeSet covered = all;
    covered &= u;
    r.uncovered = all.count() - covered.count();
    r.covers_J = r.uncovered == 0;
    r.covers_closure_J = all.subset_of(dilate(g, u, 1));
    return r;
}

namespace {

// Unit future null directions at x, or nothing when x is outside the
// spacetime (off the box, outside the domain or masked) or the cone there
// cannot be resolved.
std::optional<std::array<Vec, 2>> null_pair(const CausalGrid& g, Vec x) {
    const GridAxis& a0 = g.axis(0);
    const GridAxis& a1 = g.axis(1);
    if (x(0) < a0.x.front() || x(0) > a0.x.back()) return std::nullopt;
    if (g.cylinder()) x(1) = a1.x[0] + std::fmod(std::fmod(x(1) - a1.x[0], kTwoPi) + kTwoPi, kTwoPi);
    else if (x(1) < a1.x.front() || x(1) > a1.x.back()) return std::nullopt;
    const MetricField& m = g.metric();
    if (!m.in_domain(x) || m.masked(x) || !g.live(g.nearest(x(0), x(1)))) return std::nullopt;
    try {
        const Mat F = orthonormal_frame(m.at(x), m.orientation(x));
        return std::array<Vec, 2>{(F.col(0) + F.col(1)).normalized(), (F.col(0) - F.col(1)).normalized()};
    } catch (const DomainError&) {
        return std::nullopt;  // cones too ill-conditioned to follow, e.g. near a blow-up
    } catch (const NumericalError&) {
        return std::nullopt;
    }
}

// Follows the null generator leaving `start` along `dir` (already future or
// past as wanted) by midpoint steps, choosing the null branch closest to the
// current heading. Stops on leaving the spacetime or after `cap` length.
std::vector<Vec> trace_generator(const CausalGrid& g, Vec x, Vec dir, double sign, double ds, double cap) {
    std::vector<Vec> pts{x};
    auto heading = [&](const Vec& at, const Vec& prev) -> std::optional<Vec> {
        const auto pair = null_pair(g, at);
        if (!pair) return std::nullopt;
        const Vec a = sign * (*pair)[0], b = sign * (*pair)[1];
        return a.dot(prev) >= b.dot(prev) ? a : b;
    };
    for (double s = 0.0; s < cap; s += ds) {
        const auto d0 = heading(x, dir);
        if (!d0) break;
        const auto d1 = heading(x + 0.5 * ds * *d0, *d0);
        if (!d1) break;
        const Vec next = x + ds * *d1;
        if (!null_pair(g, next)) break;
        x = next;
        dir = *d1;
        pts.push_back(x);
    }
    return pts;
}

// Distance in cells (axis-scaled Euclidean) from a traced reference curve.
// Exact within kExactCells; beyond that the Chebyshev node distance.
class TraceDistance {
public:
    TraceDistance(const CausalGrid& g, std::vector<Vec> pts) : g_(g), pts_(std::move(pts)), bucket_(g.size()) {
        for (std::size_t i = 0; i < pts_.size(); ++i) bucket_[g.nearest(pts_[i](0), pts_[i](1))].push_back(i);
        far_.assign(g.size(), -1);
        std::vector<std::size_t> queue;
        for (std::size_t k = 0; k < g.size(); ++k)
            if (!bucket_[k].empty()) {
                far_[k] = 0;
                queue.push_back(k);
            }
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const std::size_t k = queue[head];
            for (int di = -1; di <= 1; ++di)
                for (int dj = -1; dj <= 1; ++dj) {
                    const auto t = g.step(k, di, dj);
                    if (t && far_[*t] < 0) {
                        far_[*t] = far_[k] + 1;
                        queue.push_back(*t);
                    }
                }
        }
    }

    double operator()(const Vec& y) const {
        const std::size_t k = g_.nearest(y(0), y(1));
        if (far_[k] < 0) return kInf;
        if (far_[k] > kExactCells) return far_[k];
        double best = kInf;
        for (int r = 0; r <= kExactCells + 1 && r <= best + 1.0; ++r)
            for (int di = -r; di <= r; ++di)
                for (int dj = -r; dj <= r; ++dj) {
                    if (std::max(std::abs(di), std::abs(dj)) != r) continue;
                    const auto t = g_.step(k, di, dj);
                    if (!t) continue;
                    for (std::size_t i : bucket_[*t]) best = std::min(best, cells(y, pts_[i]));
                }
        return best;
    }

private:
    static constexpr int kExactCells = 16;

    double cells(const Vec& a, const Vec& b) const {
        const double d0 = (a(0) - b(0)) / g_.axis(0).h;
        double d1 = a(1) - b(1);
        if (g_.cylinder()) d1 = std::remainder(d1, kTwoPi);
        d1 /= g_.axis(1).h;
        return std::hypot(d0, d1);
    }

    const CausalGrid& g_;
    std::vector<Vec> pts_;
    std::vector<std::vector<std::size_t>> bucket_;
    std::vector<int> far_;
};

// Chebyshev distance in cells to the nearest dead node.
std::vector<int> dead_distance(const CausalGrid& g) {
    std::vector<int> d(g.size(), -1);
    std::vector<std::size_t> queue;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (!g.live(k)) {
            d[k] = 0;
            queue.push_back(k);
        }
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const std::size_t k = queue[head];
        for (int di = -1; di <= 1; ++di)
            for (int dj = -1; dj <= 1; ++dj) {
                const auto t = g.step(k, di, dj);
                if (t && d[*t] < 0) {
                    d[*t] = d[k] + 1;
                    queue.push_back(*t);
                }
            }
    }
    return d;
}

// Start shifts in cells: the small one sits below the resolution of deleted
// sets and measures how fast generators spread; the large one crosses them.
constexpr double kFineShift = 0.125;
constexpr double kCoarseShift = 0.75;
constexpr double kProbeStep = 0.25;  // tracing step, in cells
constexpr double kJumpCells = 2.0;
// Generators may spread up to this multiple of their start shift. Points that
// close to a deleted node can converge into it as the shift shrinks, so they
// are not evidence of a jump; one more cell covers the mask resolution.
constexpr double kSpread = 8.0;
const int kHoleCells = 1 + static_cast<int>(std::ceil(kSpread * kCoarseShift));

}  // namespace

ClosednessReport closedness_probe(const CausalGrid& g, std::size_t p) {
    if (p >= g.size() || !g.live(p)) throw InputError("closedness probe needs a live node");
    const double h0 = g.axis(0).h, h1 = g.axis(1).h;
    const double ds = kProbeStep * std::min(h0, h1);
    const double span0 = g.axis(0).x.back() - g.axis(0).x.front();
    const double span1 = g.cylinder() ? kTwoPi : g.axis(1).x.back() - g.axis(1).x.front();
    const double cap = 4.0 * (span0 + span1);
    const Vec x = g.point(p);

    auto shifted = [&](int k, double cells) {
        const double a = k * std::numbers::pi / 4.0;
        Vec s = x;
        s(0) += cells * h0 * std::cos(a);
        s(1) += cells * h1 * std::sin(a);
        return s;
    };

    const std::vector<int> dead = dead_distance(g);
    ClosednessReport r;
    for (Direction dir : {Direction::Future, Direction::Past}) {
        const double sign = dir == Direction::Future ? 1.0 : -1.0;
        auto generators = [&](const Vec& s) {
            std::vector<Vec> pts;
            if (const auto pair = null_pair(g, s))
                for (const Vec& n : *pair) {
                    const auto t = trace_generator(g, s, sign * n, sign, ds, cap);
                    pts.insert(pts.end(), t.begin(), t.end());
                }
            return pts;
        };
        const TraceDistance dist(g, generators(x));
        auto deviation = [&](const Vec& s) {
            double worst = 0.0;
            for (const Vec& y : generators(s))
                if (const int d = dead[g.nearest(y(0), y(1))]; d < 0 || d > kHoleCells) worst = std::max(worst, dist(y));
            return worst;
        };

        // Per direction: deviation at the coarse shift beyond twice the linear
        // extrapolation of the fine one.
        std::array<double, 8> excess{};
        parallel_chunks(8, 8, [&](std::size_t b, std::size_t e, std::size_t) {
            for (std::size_t k = b; k < e; ++k) {
                const double fine = deviation(shifted(static_cast<int>(k), kFineShift));
                const double coarse = deviation(shifted(static_cast<int>(k), kCoarseShift));
                excess[k] = coarse - 2.0 * (kCoarseShift / kFineShift) * fine;
            }
        });
        const double jump = std::max(0.0, *std::max_element(excess.begin(), excess.end()));

        const NodeSet J = search(g, {p}, ReachKind::Causal, dir, false);
        const NodeSet I = search(g, {p}, ReachKind::Chronological, dir, false);
        const bool closure = J.subset_of(dilate(g, I, 1));
        if (dir == Direction::Future) {
            r.jplus_jump = jump;
            r.jplus_closed = jump <= kJumpCells;
            r.jplus_is_closure_of_iplus = closure;
        } else {
            r.jminus_jump = jump;
            r.jminus_closed = jump <= kJumpCells;
            r.jminus_is_closure_of_iminus = closure;
        }
    }
    return r;
}

double bridge(Bridge b, double s) {
    s = std::clamp(s, 0.0, 1.0);
    if (b == Bridge::Smoothstep) return 1.0 - s * s * (3.0 - 2.0 * s);
    // 1 - (integral of exp(-1/(x(1-x))) over [0, s]) / (same over [0, 1])
    auto bump = [](double x) { return x <= 0.0 || x >= 1.0 ? 0.0 : std::exp(-1.0 / (x * (1.0 - x))); };
    auto simpson = [&](double a, double c, int n) {
        const double h = (c - a) / n;
        double acc = bump(a) + bump(c);
        for (int i = 1; i < n; ++i) acc += bump(a + i * h) * (i % 2 ? 4.0 : 2.0);
        return acc * h / 3.0;
    };
    static const double total = simpson(0.0, 1.0, 2000);
    if (s == 0.0) return 1.0;
    return std::clamp(1.0 - simpson(0.0, s, 400) / total, 0.0, 1.0);
}

double counterexample_f(double u, double v, Bridge b) {
    if (u <= 0.0 || v <= 0.0 || v <= u - 1.0) return 1.0;
    if (v >= u) return (1.0 + v) / u;
    // s = l/L measured along the line through (u, v) and (0, -1): with Q on
    // u = v and S on the u axis, l/L = 1 - v / v_Q, v_Q = u / (1 - u + v).
    const double s = std::clamp(1.0 - v * (1.0 - u + v) / u, 0.0, 1.0);
    return ((1.0 + v) / u - 1.0) * bridge(b, s * s) + 1.0;
}

namespace {

MetricField metric2(const std::vector<std::string>& coords, const std::vector<Interval>& domain,
                    const std::vector<std::string>& masks, const std::string& g00, const std::string& g01,
                    const std::string& g11, const std::string& o0, const std::string& o1,
                    const FunctionTable* fns = nullptr) {
    Chart c;
    c.coords = coords;
    c.domain = domain;
    for (const auto& m : masks) c.masks.push_back(ScalarExpr::parse_condition(m, fns));
    const ScalarExpr a = ScalarExpr::parse(g00, fns), b = ScalarExpr::parse(g01, fns), d = ScalarExpr::parse(g11, fns);
    return MetricField(c, {{a, b}, {b, d}}, {ScalarExpr::parse(o0, fns), ScalarExpr::parse(o1, fns)});
}

std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto p = s.find(':', start);
        out.push_back(s.substr(start, p == std::string::npos ? std::string::npos : p - start));
        if (p == std::string::npos) break;
        start = p + 1;
    }
    return out;
}

double parse_number(const std::string& name, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size() && std::isfinite(v)) return v;
    } catch (const std::exception&) {
    }
    throw InputError("fixture '" + name + "': bad parameter '" + s + "'");
}

int scaled(int base, double scale) { return std::max(3, static_cast<int>(std::lround(base * scale))); }

// Live nodes of one row with axis-1 coordinate inside (a, b), in column order.
PolyCurve row_segment(const CausalGrid& g, double x0, double a, double b) {
    const int i = g.row(g.nearest(x0, g.axis(1).x[0]));
    std::vector<std::size_t> nodes;
    for (int j = 0; j < g.n1(); ++j) {
        const double x = g.axis(1).x[j];
        const std::size_t k = g.index(i, j);
        if (x > a && x < b && g.live(k)) nodes.push_back(k);
    }
    return make_curve(g, nodes);
}

CausalGrid cylinder_grid(const MetricField& m, double t_lo, double t_hi, int circle) {
    const double h = kTwoPi / circle;
    const int n0 = static_cast<int>(std::floor((t_hi - t_lo) / h + 1e-9));
    if (n0 < 2) throw InputError("cylinder too short for the circle resolution");
    return CausalGrid(m, GridAxis::centered(t_lo, t_lo + n0 * h, n0), GridAxis::periodic_circle(circle));
}

}  // namespace

Fixture make_fixture(const std::string& name, double scale, Bridge bridge_choice) {
    if (!(scale > 0.0)) throw InputError("fixture scale must be positive");
    const auto parts = split(name);
    const std::string& kind = parts[0];
    auto param = [&](std::size_t i) {
        if (parts.size() <= i) throw InputError("fixture '" + name + "' needs a parameter");
        return parse_number(name, parts[i]);
    };
    const double pi = std::numbers::pi;
    Fixture f;
    f.name = name;
    if (kind == "minkowski2" && parts.size() == 1) {
        f.metric = metric2({"t", "x"}, {{0, 1}, {0, 1}}, {}, "1", "0", "-1", "1", "0");
        const int n = scaled(100, scale) + 1;
        f.grid = CausalGrid(f.metric, GridAxis::inclusive(0, 1, n), GridAxis::inclusive(0, 1, n));
    } else if (kind == "rect" && parts.size() == 2) {
        const double L = param(1);
        if (!(L > 0.0)) throw InputError("rectangle length must be positive");
        const int n1 = scaled(201, scale);
        const double h = 1.0 / n1;
        const int n0 = static_cast<int>(std::floor(L / h + 1e-9));
        if (n0 < 2) throw InputError("rectangle too short for the resolution");
        f.metric = metric2({"t", "x"}, {{0, L}, {0, 1}}, {}, "1", "0", "-1", "1", "0");
        f.grid = CausalGrid(f.metric, GridAxis::centered(0, n0 * h, n0), GridAxis::centered(0, 1, n1));
    } else if (kind == "cyl" && parts.size() == 2) {
        const double L = param(1);
        if (!(L > 0.0)) throw InputError("cylinder length must be positive");
        f.metric = metric2({"t", "theta"}, {{0, L}, {0, 2 * pi}}, {}, "1", "0", "-1", "1", "0");
        f.grid = cylinder_grid(f.metric, 0.0, L, scaled(512, scale));
    } else if (kind == "stairway" && parts.size() == 2) {
        const double md = param(1);
        const int m = static_cast<int>(md);
        if (m < 1 || m != md) throw InputError("stairway needs a positive integer m");
        const std::string ms = std::to_string(m);
        f.metric = metric2({"u", "v"}, {{0, 1}, {0, 1}}, {"ceil(" + ms + " * u) + ceil(" + ms + " * v) > " + ms + " + 1"},
                           "0", "1", "0", "1", "1");
        const int n = scaled(201, scale);
        f.grid = CausalGrid(f.metric, GridAxis::centered(0, 1, n), GridAxis::centered(0, 1, n));
        // S'_a: anti-diagonal cut of the outer corner of step cell (a, m + 1 - a)
        const double h = 1.0 / n, delta = 0.5 / m;
        for (int a = 1; a <= m; ++a) {
            const int b = m + 1 - a;
            const double cu = static_cast<double>(a) / m, cv = static_cast<double>(b) / m;
            const int diag = static_cast<int>(std::lround((cu + cv - delta) / h - 1.0));  // i + j
            std::vector<std::size_t> nodes;
            for (int i = 0; i < n; ++i) {
                const double u = f.grid.axis(0).x[i];
                const int j = diag - i;
                if (j < 0 || j >= n) continue;
                const double v = f.grid.axis(1).x[j];
                const std::size_t k = f.grid.index(i, j);
                if (u < cu && v < cv && u > cu - delta && v > cv - delta && f.grid.live(k)) nodes.push_back(k);
            }
            f.hypersurfaces.push_back(make_curve(f.grid, nodes));
        }
    } else if (kind == "excoj" && parts.size() <= 2) {
        const bool g1 = parts.size() == 2;
        if (g1 && parts[1] != "g1") throw InputError("unknown fixture '" + name + "'");
        const std::string phi = "(pi / 2) * sin(t)^2";
        if (g1)
            f.metric = metric2({"t", "theta"}, {{-pi, 2 * pi}, {0, 2 * pi}}, {}, "1", "0", "-1", "1", "0");
        else
            f.metric = metric2({"t", "theta"}, {{-pi, 2 * pi}, {0, 2 * pi}}, {}, "-sin(2 * " + phi + ")",
                               "cos(2 * " + phi + ")", "sin(2 * " + phi + ")", "cos(" + phi + ") - sin(" + phi + ")",
                               "sin(" + phi + ") + cos(" + phi + ")");
        f.grid = cylinder_grid(f.metric, -pi, 2 * pi, scaled(128, scale));
    } else if (kind == "exnotim" && parts.size() == 1) {
        const int n1 = scaled(200, scale) + 1;
        const double h = 4.0 / (n1 - 1);
        const int n0 = static_cast<int>(std::lround(8.0 / h)) + 1;
        f.metric = metric2({"t", "x"}, {{0, 8}, {-2, 2}}, {}, "1 - x^2", "-x", "-1", "1", "-x");
        f.grid = CausalGrid(f.metric, GridAxis::inclusive(0, 8, n0), GridAxis::inclusive(-2, 2, n1));
    } else if (kind == "counterexample32" && parts.size() <= 2) {
        const bool eta = parts.size() == 2;
        if (eta && parts[1] != "eta") throw InputError("unknown fixture '" + name + "'");
        FunctionTable fns;
        fns["f"] = ExternalFunction{2, [bridge_choice](const double* a) { return counterexample_f(a[0], a[1], bridge_choice); }};
        const std::vector<std::string> mask{"u <= 0 and v >= -u"};
        if (eta)
            f.metric = metric2({"u", "v"}, {{-2, 2}, {-2, 2}}, mask, "0", "-1", "0", "-1", "1");
        else
            f.metric = metric2({"u", "v"}, {{-2, 2}, {-2, 2}}, mask, "2 * f(u, v)", "-1", "0", "-1", "1 - f(u, v)", &fns);
        const int n = scaled(200, scale) + 1;
        f.grid = CausalGrid(f.metric, GridAxis::inclusive(-2, 2, n), GridAxis::inclusive(-2, 2, n));
    } else if (kind == "ex42" && parts.size() >= 2 && parts[1] == "quadrant" && parts.size() == 2) {
        f.metric = metric2({"t", "x"}, {{-2, 2}, {-2, 2}}, {"t <= 0 and x >= 0"}, "1", "0", "-1", "1", "0");
        const int n = scaled(200, scale) + 1;
        f.grid = CausalGrid(f.metric, GridAxis::inclusive(-2, 2, n), GridAxis::inclusive(-2, 2, n));
        f.hypersurfaces.push_back(row_segment(f.grid, -1.0, -kInf, 0.0));
    } else if (kind == "ex42" && parts.size() == 3 && parts[1] == "slits") {
        const double md = param(2);
        const int m = static_cast<int>(md);
        if (m < 1 || m != md) throw InputError("slits need a positive integer m");
        const double a = 0.5;
        std::string mask;
        for (int j = 0; j < m; ++j)
            mask += (j ? " or " : "") + std::string("(x >= ") + std::to_string(j) + " and x <= " + std::to_string(j) + " + " +
                    num(a) + " and t <= 0)";
        f.metric = metric2({"t", "x"}, {{-2, 2}, {-1, static_cast<double>(m)}}, {mask}, "1", "0", "-1", "1", "0");
        const double h = 0.02 / scale;
        const int n1 = static_cast<int>(std::lround((m + 1) / h)) + 1;
        const int n0 = static_cast<int>(std::lround(4.0 / h)) + 1;
        f.grid = CausalGrid(f.metric, GridAxis::inclusive(-2, 2, n0), GridAxis::inclusive(-1, m, n1));
        for (int j = 1; j < m; ++j) f.hypersurfaces.push_back(row_segment(f.grid, -1.0, j - 1 + a, j));
    } else {
        throw InputError("unknown fixture '" + name + "'");
    }
    return f;
}

CylinderRank cylinder_rank(double L, int circle_nodes) {
    if (!(L > 0.0)) throw InputError("cylinder length must be positive");
    const MetricField m = metric2({"t", "theta"}, {{0, L}, {0, kTwoPi}}, {}, "1", "0", "-1", "1", "0");
    CylinderRank out;
    const double h = kTwoPi / circle_nodes;
    if (std::floor(L / h + 1e-9) < 2) return out;
    const CausalGrid g = cylinder_grid(m, 0.0, L, circle_nodes);
    out.geodesic = coverage_criterion(g, null_curve(g, g.index(0, 0), +1));
    for (double c : {0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.975}) {
        std::vector<std::size_t> nodes;
        for (int i = 0; i < g.n0(); ++i) nodes.push_back(g.index(i, static_cast<int>(std::lround(c * i)) % g.n1()));
        const PolyCurve helix = make_curve(g, nodes);
        if (!helix.timelike(g)) continue;
        if (coverage_criterion(g, helix).covers_J) {
            out.rank = 2;
            out.helix_slope = c;
            return out;
        }
    }
    out.rank = out.geodesic.covers_closure_J ? 1 : 0;
    return out;
}

}  // namespace isocausal
