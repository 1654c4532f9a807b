#include "isocausal/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <set>

namespace isocausal {

namespace {

enum Kind { kNum, kVar, kNeg, kAdd, kSub, kMul, kDiv, kPow, kCall, kCmp, kAnd, kOr, kNot, kPiecewise };
enum Cmp { kLt, kLe, kEq, kGe, kGt };

enum Fn {
    fSin, fCos, fTan, fAsin, fAcos, fAtan, fSinh, fCosh, fTanh, fAsinh, fAcosh, fAtanh,
    fExp, fLog, fSqrt, fAbs, fSign, fFloor, fCeil, fMin, fMax, fAtan2, fPow, fExternal
};

struct Builtin {
    const char* name;
    Fn fn;
    int arity;  // -1: variadic (>= 2)
};

constexpr Builtin kBuiltins[] = {
    {"sin", fSin, 1},     {"cos", fCos, 1},     {"tan", fTan, 1},     {"asin", fAsin, 1},
    {"acos", fAcos, 1},   {"atan", fAtan, 1},   {"sinh", fSinh, 1},   {"cosh", fCosh, 1},
    {"tanh", fTanh, 1},   {"asinh", fAsinh, 1}, {"acosh", fAcosh, 1}, {"atanh", fAtanh, 1},
    {"exp", fExp, 1},     {"log", fLog, 1},     {"ln", fLog, 1},      {"sqrt", fSqrt, 1},
    {"abs", fAbs, 1},     {"sign", fSign, 1},   {"min", fMin, -1},    {"max", fMax, -1},
    {"atan2", fAtan2, 2}, {"pow", fPow, 2},   {"floor", fFloor, 1}, {"ceil", fCeil, 1},
};

const Builtin* find_builtin(std::string_view name) {
    for (const auto& b : kBuiltins)
        if (name == b.name) return &b;
    return nullptr;
}

const char* fn_name(int fn) {
    for (const auto& b : kBuiltins)
        if (b.fn == fn) return b.name;
    return "?";
}

}  // namespace

struct ScalarExpr::Node {
    int kind = kNum;
    int op = 0;  // Cmp for kCmp, Fn for kCall
    double value = 0.0;
    std::string name;  // variable or external function name
    std::shared_ptr<const ExternalFunction> ext;
    std::vector<std::shared_ptr<const Node>> kids;
};

using NodePtr = std::shared_ptr<const ScalarExpr::Node>;

namespace {

NodePtr make(int kind, std::vector<NodePtr> kids, int op = 0) {
    auto n = std::make_shared<ScalarExpr::Node>();
    n->kind = kind;
    n->op = op;
    n->kids = std::move(kids);
    return n;
}

NodePtr make_num(double v) {
    auto n = std::make_shared<ScalarExpr::Node>();
    n->kind = kNum;
    n->value = v;
    return n;
}

bool is_bool(const NodePtr& n) {
    return n->kind == kCmp || n->kind == kAnd || n->kind == kOr || n->kind == kNot;
}

class Parser {
public:
    Parser(std::string_view s, const FunctionTable* extra) : s_(s), extra_(extra) {}

    NodePtr parse_all() {
        NodePtr n = parse_or();
        skip_ws();
        if (pos_ != s_.size()) throw ParseError("unexpected '" + std::string(1, s_[pos_]) + "'", pos_);
        return n;
    }

private:
    void skip_ws() {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool eat(std::string_view tok) {
        skip_ws();
        if (s_.substr(pos_, tok.size()) == tok) {
            pos_ += tok.size();
            return true;
        }
        return false;
    }

    bool eat_word(std::string_view w) {
        skip_ws();
        if (s_.substr(pos_, w.size()) != w) return false;
        std::size_t e = pos_ + w.size();
        if (e < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[e])) || s_[e] == '_')) return false;
        pos_ = e;
        return true;
    }

    void need_real(const NodePtr& n, std::size_t at) {
        if (is_bool(n)) throw ParseError("condition used where a number is expected", at);
    }
    void need_bool(const NodePtr& n, std::size_t at) {
        if (!is_bool(n)) throw ParseError("number used where a condition is expected", at);
    }

    NodePtr parse_or() {
        std::size_t at = pos_;
        NodePtr lhs = parse_and();
        for (;;) {
            std::size_t op = pos_;
            if (eat_word("or") || eat("||")) {
                need_bool(lhs, at);
                NodePtr rhs = parse_and();
                need_bool(rhs, op);
                lhs = make(kOr, {lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_and() {
        std::size_t at = pos_;
        NodePtr lhs = parse_not();
        for (;;) {
            std::size_t op = pos_;
            if (eat_word("and") || eat("&&")) {
                need_bool(lhs, at);
                NodePtr rhs = parse_not();
                need_bool(rhs, op);
                lhs = make(kAnd, {lhs, rhs});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_not() {
        std::size_t at = pos_;
        if (eat_word("not") || (peek_bang() && eat("!"))) {
            NodePtr x = parse_not();
            need_bool(x, at);
            return make(kNot, {x});
        }
        return parse_cmp();
    }

    bool peek_bang() {
        skip_ws();
        return pos_ + 1 <= s_.size() && s_.substr(pos_, 1) == "!" && s_.substr(pos_, 2) != "!=";
    }

    NodePtr parse_cmp() {
        std::size_t at = pos_;
        NodePtr lhs = parse_add();
        skip_ws();
        std::size_t op_at = pos_;
        int op = -1;
        if (eat("<=") || eat("≤")) op = kLe;
        else if (eat(">=") || eat("≥")) op = kGe;
        else if (eat("==")) op = kEq;
        else if (eat("<")) op = kLt;
        else if (eat(">")) op = kGt;
        else if (eat("=")) op = kEq;
        if (op < 0) return lhs;
        need_real(lhs, at);
        NodePtr rhs = parse_add();
        need_real(rhs, op_at);
        return make(kCmp, {lhs, rhs}, op);
    }

    NodePtr parse_add() {
        std::size_t at = pos_;
        NodePtr lhs = parse_mul();
        for (;;) {
            skip_ws();
            std::size_t op = pos_;
            int k = -1;
            if (eat("+")) k = kAdd;
            else if (eat("-")) k = kSub;
            if (k < 0) return lhs;
            need_real(lhs, at);
            NodePtr rhs = parse_mul();
            need_real(rhs, op);
            lhs = make(k, {lhs, rhs});
        }
    }

    NodePtr parse_mul() {
        std::size_t at = pos_;
        NodePtr lhs = parse_unary();
        for (;;) {
            skip_ws();
            std::size_t op = pos_;
            int k = -1;
            if (s_.substr(pos_, 2) == "**") return lhs;  // handled in power
            if (eat("*")) k = kMul;
            else if (eat("/")) k = kDiv;
            if (k < 0) return lhs;
            need_real(lhs, at);
            NodePtr rhs = parse_unary();
            need_real(rhs, op);
            lhs = make(k, {lhs, rhs});
        }
    }

    NodePtr parse_unary() {
        std::size_t at = pos_;
        if (eat("-")) {
            NodePtr x = parse_unary();
            need_real(x, at);
            return make(kNeg, {x});
        }
        if (eat("+")) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        std::size_t at = pos_;
        NodePtr base = parse_primary();
        skip_ws();
        std::size_t op = pos_;
        if (eat("^") || eat("**")) {
            need_real(base, at);
            NodePtr ex = parse_unary();  // right associative, allows 2^-1
            need_real(ex, op);
            return make(kPow, {base, ex});
        }
        return base;
    }

    NodePtr parse_primary() {
        skip_ws();
        if (pos_ >= s_.size()) throw ParseError("unexpected end of expression", pos_);
        char c = s_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr n = parse_or();
            if (!eat(")")) throw ParseError("expected ')'", pos_);
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        throw ParseError("unexpected '" + std::string(1, c) + "'", pos_);
    }

    NodePtr parse_number() {
        std::size_t start = pos_;
        std::size_t e = pos_;
        while (e < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[e])) || s_[e] == '.')) ++e;
        if (e < s_.size() && (s_[e] == 'e' || s_[e] == 'E')) {
            std::size_t k = e + 1;
            if (k < s_.size() && (s_[k] == '+' || s_[k] == '-')) ++k;
            if (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) {
                while (k < s_.size() && std::isdigit(static_cast<unsigned char>(s_[k]))) ++k;
                e = k;
            }
        }
        double v = 0.0;
        auto res = std::from_chars(s_.data() + start, s_.data() + e, v);
        if (res.ec != std::errc() || res.ptr != s_.data() + e) throw ParseError("malformed number", start);
        pos_ = e;
        return make_num(v);
    }

    NodePtr parse_identifier() {
        std::size_t start = pos_;
        std::size_t e = pos_;
        while (e < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[e])) || s_[e] == '_')) ++e;
        std::string name(s_.substr(start, e - start));
        pos_ = e;
        skip_ws();
        bool call = pos_ < s_.size() && s_[pos_] == '(';
        if (!call) {
            if (name == "pi") return make_num(std::numbers::pi);
            if (name == "and" || name == "or" || name == "not")
                throw ParseError("misplaced '" + name + "'", start);
            auto n = std::make_shared<ScalarExpr::Node>();
            n->kind = kVar;
            n->name = name;
            return n;
        }
        ++pos_;
        std::vector<NodePtr> args;
        std::vector<std::size_t> at;
        skip_ws();
        if (!(pos_ < s_.size() && s_[pos_] == ')')) {
            for (;;) {
                skip_ws();
                at.push_back(pos_);
                args.push_back(parse_or());
                if (eat(",")) continue;
                break;
            }
        }
        if (!eat(")")) throw ParseError("expected ')' or ','", pos_);

        if (name == "piecewise") {
            if (args.size() < 2) throw ParseError("piecewise needs at least one (condition, value) pair", start);
            for (std::size_t i = 0; i < args.size(); ++i) {
                bool cond_slot = (i % 2 == 0) && i + 1 < args.size();
                if (cond_slot) need_bool(args[i], at[i]);
                else need_real(args[i], at[i]);
            }
            return make(kPiecewise, std::move(args));
        }
        for (std::size_t i = 0; i < args.size(); ++i) need_real(args[i], at[i]);
        if (const Builtin* b = find_builtin(name)) {
            bool ok = b->arity < 0 ? args.size() >= 2 : static_cast<int>(args.size()) == b->arity;
            if (!ok) throw ParseError("wrong number of arguments to " + name, start);
            return make(kCall, std::move(args), b->fn);
        }
        if (extra_) {
            auto it = extra_->find(name);
            if (it != extra_->end()) {
                if (static_cast<int>(args.size()) != it->second.arity)
                    throw ParseError("wrong number of arguments to " + name, start);
                auto n = std::make_shared<ScalarExpr::Node>();
                n->kind = kCall;
                n->op = fExternal;
                n->name = name;
                n->ext = std::make_shared<ExternalFunction>(it->second);
                n->kids = std::move(args);
                return n;
            }
        }
        throw ParseError("unknown function '" + name + "'", start);
    }

    std::string_view s_;
    const FunctionTable* extra_;
    std::size_t pos_ = 0;
};

void collect_vars(const ScalarExpr::Node& n, std::set<std::string>& out) {
    if (n.kind == kVar) out.insert(n.name);
    for (const auto& k : n.kids) collect_vars(*k, out);
}

int precedence(const ScalarExpr::Node& n) {
    switch (n.kind) {
        case kOr: return 1;
        case kAnd: return 2;
        case kNot: return 3;
        case kCmp: return 4;
        case kAdd: case kSub: return 5;
        case kMul: case kDiv: return 6;
        case kNeg: return 7;
        case kPow: return 8;
        default: return 9;
    }
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    std::string s = buf;
    // keep the shortest representation that round-trips
    for (int p = 1; p <= 17; ++p) {
        std::snprintf(buf, sizeof buf, "%.*g", p, v);
        double back = 0.0;
        std::from_chars(buf, buf + std::char_traits<char>::length(buf), back);
        if (back == v) {
            s = buf;
            break;
        }
    }
    return s;
}

std::string print(const ScalarExpr::Node& n);

std::string wrap(const ScalarExpr::Node& child, int parent_prec, bool strict) {
    int p = precedence(child);
    std::string s = print(child);
    bool negative_literal = child.kind == kNum && child.value < 0;
    if (p < parent_prec || (strict && p == parent_prec) || negative_literal) return "(" + s + ")";
    return s;
}

std::string print(const ScalarExpr::Node& n) {
    static const char* cmp[] = {"<", "<=", "==", ">=", ">"};
    switch (n.kind) {
        case kNum: return format_number(n.value);
        case kVar: return n.name;
        case kNeg: return "-" + wrap(*n.kids[0], 7, false);
        case kAdd: return wrap(*n.kids[0], 5, false) + " + " + wrap(*n.kids[1], 5, false);
        case kSub: return wrap(*n.kids[0], 5, false) + " - " + wrap(*n.kids[1], 5, true);
        case kMul: return wrap(*n.kids[0], 6, false) + "*" + wrap(*n.kids[1], 6, false);
        case kDiv: return wrap(*n.kids[0], 6, false) + "/" + wrap(*n.kids[1], 6, true);
        case kPow: return wrap(*n.kids[0], 8, true) + "^" + wrap(*n.kids[1], 7, false);
        case kCmp: return wrap(*n.kids[0], 5, false) + " " + cmp[n.op] + " " + wrap(*n.kids[1], 5, false);
        case kAnd: return wrap(*n.kids[0], 2, false) + " and " + wrap(*n.kids[1], 2, true);
        case kOr: return wrap(*n.kids[0], 1, false) + " or " + wrap(*n.kids[1], 1, true);
        case kNot: return "not " + wrap(*n.kids[0], 3, false);
        case kCall:
        case kPiecewise: {
            std::string s = n.kind == kPiecewise ? "piecewise" : (n.op == fExternal ? n.name : fn_name(n.op));
            s += "(";
            for (std::size_t i = 0; i < n.kids.size(); ++i) {
                if (i) s += ", ";
                s += print(*n.kids[i]);
            }
            return s + ")";
        }
    }
    return "?";
}

NodePtr subst(const NodePtr& n, const std::map<std::string, ScalarExpr, std::less<>>& repl) {
    if (n->kind == kVar) {
        auto it = repl.find(n->name);
        return it == repl.end() ? n : it->second.root();
    }
    if (n->kids.empty()) return n;
    auto copy = std::make_shared<ScalarExpr::Node>(*n);
    for (auto& k : copy->kids) k = subst(k, repl);
    return copy;
}

double checked(double v, const char* what) {
    if (!std::isfinite(v)) throw DomainError(std::string("non-finite value in ") + what);
    return v;
}

double apply_fn(int fn, const double* a, int n) {
    double x = a[0];
    switch (fn) {
        case fSin: return std::sin(x);
        case fCos: return std::cos(x);
        case fTan: return checked(std::tan(x), "tan");
        case fAsin:
            if (x < -1.0 || x > 1.0) throw DomainError("asin argument outside [-1,1]");
            return std::asin(x);
        case fAcos:
            if (x < -1.0 || x > 1.0) throw DomainError("acos argument outside [-1,1]");
            return std::acos(x);
        case fAtan: return std::atan(x);
        case fSinh: return checked(std::sinh(x), "sinh");
        case fCosh: return checked(std::cosh(x), "cosh");
        case fTanh: return std::tanh(x);
        case fAsinh: return std::asinh(x);
        case fAcosh:
            if (x < 1.0) throw DomainError("acosh argument below 1");
            return std::acosh(x);
        case fAtanh:
            if (!(std::fabs(x) < 1.0)) throw DomainError("atanh argument outside (-1,1)");
            return std::atanh(x);
        case fExp: return checked(std::exp(x), "exp");
        case fLog:
            if (!(x > 0.0)) throw DomainError("log of a non-positive number");
            return std::log(x);
        case fSqrt:
            if (x < 0.0) throw DomainError("sqrt of a negative number");
            return std::sqrt(x);
        case fAbs: return std::fabs(x);
        case fSign: return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
        case fFloor: return std::floor(x);
        case fCeil: return std::ceil(x);
        case fMin: return *std::min_element(a, a + n);
        case fMax: return *std::max_element(a, a + n);
        case fAtan2: return std::atan2(a[0], a[1]);
        case fPow: break;
    }
    return 0.0;
}

double power(double b, double e) {
    if (b == 0.0 && e < 0.0) throw DomainError("zero raised to a negative power");
    if (b < 0.0 && e != std::floor(e)) throw DomainError("negative base with non-integer exponent");
    if (e == 2.0) return b * b;
    return checked(std::pow(b, e), "power");
}

}  // namespace

ScalarExpr::ScalarExpr() : root_(make_num(0.0)) {}

ScalarExpr ScalarExpr::parse(std::string_view text, const FunctionTable* extra) {
    Parser p(text, extra);
    NodePtr n = p.parse_all();
    if (is_bool(n)) throw ParseError("expected a numeric expression, found a condition", 0);
    return ScalarExpr(n);
}

ScalarExpr ScalarExpr::parse_condition(std::string_view text, const FunctionTable* extra) {
    Parser p(text, extra);
    NodePtr n = p.parse_all();
    if (!is_bool(n)) throw ParseError("expected a condition", 0);
    return ScalarExpr(n);
}

ScalarExpr ScalarExpr::constant(double v) { return ScalarExpr(make_num(v)); }

ScalarExpr ScalarExpr::variable(std::string name) {
    auto n = std::make_shared<Node>();
    n->kind = kVar;
    n->name = std::move(name);
    return ScalarExpr(n);
}

bool ScalarExpr::is_condition() const { return is_bool(root_); }
bool ScalarExpr::is_constant() const { return root_->kind == kNum; }

std::vector<std::string> ScalarExpr::free_variables() const {
    std::set<std::string> s;
    collect_vars(*root_, s);
    return {s.begin(), s.end()};
}

std::string ScalarExpr::to_string() const { return print(*root_); }

ScalarExpr ScalarExpr::substitute(const std::map<std::string, ScalarExpr, std::less<>>& repl) const {
    return ScalarExpr(subst(root_, repl));
}

double ScalarExpr::eval(const std::map<std::string, double, std::less<>>& env) const {
    std::vector<std::string> names;
    std::vector<double> vals;
    for (const auto& [k, v] : env) {
        names.push_back(k);
        vals.push_back(v);
    }
    CompiledExpr c(*this, names);
    return is_condition() ? (c.test(vals) ? 1.0 : 0.0) : c(vals);
}

ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr(make(kAdd, {a.root_, b.root_})); }
ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr(make(kSub, {a.root_, b.root_})); }
ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr(make(kMul, {a.root_, b.root_})); }
ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b) { return ScalarExpr(make(kDiv, {a.root_, b.root_})); }
ScalarExpr operator-(const ScalarExpr& a) { return ScalarExpr(make(kNeg, {a.root_})); }

CompiledExpr::CompiledExpr(const ScalarExpr& e, const std::vector<std::string>& slots) {
    root_ = flatten(*e.root(), slots);
    condition_ = e.is_condition();
}

int CompiledExpr::flatten(const ScalarExpr::Node& n, const std::vector<std::string>& slots) {
    Op op;
    op.kind = n.kind;
    op.fn = n.op;
    op.value = n.value;
    if (n.kind == kVar) {
        auto it = std::find(slots.begin(), slots.end(), n.name);
        if (it == slots.end()) throw InputError("unbound variable '" + n.name + "'");
        op.slot = static_cast<int>(it - slots.begin());
    }
    if (n.kind == kCall || n.kind == kDiv || n.kind == kPow || n.kind == kPiecewise) {
        op.text = static_cast<int>(text_.size());
        text_.push_back(print(n));
    }
    if (n.ext) {
        keep_.push_back(n.ext);
        op.ext = n.ext.get();
    }
    std::vector<int> kids;
    for (const auto& k : n.kids) kids.push_back(flatten(*k, slots));
    op.first = static_cast<int>(kids_.size());
    op.count = static_cast<int>(kids.size());
    kids_.insert(kids_.end(), kids.begin(), kids.end());
    ops_.push_back(op);
    return static_cast<int>(ops_.size()) - 1;
}

double CompiledExpr::eval(int i, const double* x) const {
    const Op& op = ops_[i];
    if (op.text < 0) return eval_op(op, x);
    try {
        return eval_op(op, x);
    } catch (const DomainError& e) {
        std::string msg = e.what();
        if (msg.find(" in '") != std::string::npos) throw;
        throw DomainError(msg + " in '" + text_[op.text] + "'");
    }
}

double CompiledExpr::eval_op(const Op& op, const double* x) const {
    const int* k = kids_.data() + op.first;
    switch (op.kind) {
        case kNum: return op.value;
        case kVar: return x[op.slot];
        case kNeg: return -eval(k[0], x);
        case kAdd: return eval(k[0], x) + eval(k[1], x);
        case kSub: return eval(k[0], x) - eval(k[1], x);
        case kMul: return eval(k[0], x) * eval(k[1], x);
        case kDiv: {
            double num = eval(k[0], x);
            double den = eval(k[1], x);
            if (den == 0.0) throw DomainError("division by zero");
            return checked(num / den, "division");
        }
        case kPow: return power(eval(k[0], x), eval(k[1], x));
        case kCall: {
            double args[8];
            std::vector<double> big;
            double* a = args;
            if (op.count > 8) {
                big.resize(op.count);
                a = big.data();
            }
            for (int j = 0; j < op.count; ++j) a[j] = eval(k[j], x);
            if (op.fn == fExternal) return checked(op.ext->fn(a), "external function");
            if (op.fn == fPow) return power(a[0], a[1]);
            return apply_fn(op.fn, a, op.count);
        }
        case kCmp: {
            double l = eval(k[0], x);
            double r = eval(k[1], x);
            switch (op.fn) {
                case kLt: return l < r;
                case kLe: return l <= r;
                case kEq: return l == r;
                case kGe: return l >= r;
                default: return l > r;
            }
        }
        case kAnd: return eval(k[0], x) != 0.0 && eval(k[1], x) != 0.0;
        case kOr: return eval(k[0], x) != 0.0 || eval(k[1], x) != 0.0;
        case kNot: return eval(k[0], x) == 0.0;
        case kPiecewise: {
            int j = 0;
            for (; j + 1 < op.count; j += 2)
                if (eval(k[j], x) != 0.0) return eval(k[j + 1], x);
            if (j < op.count) return eval(k[j], x);
            throw DomainError("no piecewise branch matches");
        }
    }
    return 0.0;
}

double CompiledExpr::operator()(std::span<const double> x) const {
    if (condition_) throw InputError("condition evaluated as a number");
    return eval(root_, x.data());
}

bool CompiledExpr::test(std::span<const double> x) const {
    if (!condition_) throw InputError("number evaluated as a condition");
    return eval(root_, x.data()) != 0.0;
}

CompiledExpr::Derivative CompiledExpr::diff_fd(std::span<const double> x, std::size_t slot, double h) const {
    if (slot >= x.size()) throw InputError("derivative slot out of range");
    if (h <= 0.0) h = 1e-5 * std::max(1.0, std::fabs(x[slot]));
    std::vector<double> p(x.begin(), x.end());
    double x0 = p[slot];
    double f0 = (*this)(p);
    p[slot] = x0 + h;
    double fp = (*this)(p);
    p[slot] = x0 - h;
    double fm = (*this)(p);
    Derivative d;
    d.value = (fp - fm) / (2.0 * h);
    double right = (fp - f0) / h;
    double left = (f0 - fm) / h;
    d.nonsmooth = std::fabs(right - left) > std::sqrt(h) * (1.0 + std::fabs(right) + std::fabs(left));
    return d;
}

}  // namespace isocausal
