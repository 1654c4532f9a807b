#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "isocausal/errors.hpp"

namespace isocausal {

// A native function callable from expressions, e.g. a fixture warping factor.
struct ExternalFunction {
    int arity = 1;
    std::function<double(const double*)> fn;
};
using FunctionTable = std::map<std::string, ExternalFunction, std::less<>>;

// Immutable scalar expression tree. Cheap to copy.
//
// Grammar: numbers, identifiers, + - * / ^ (also **), unary minus, calls to
// the usual elementary functions, min/max/atan2/pow, and
// piecewise(cond, value, cond, value, ..., default). Conditions are built
// from < <= = == >= > (and the unicode forms) joined by and/or/not.
class ScalarExpr {
public:
    struct Node;

    ScalarExpr();
    static ScalarExpr parse(std::string_view text, const FunctionTable* extra = nullptr);
    // Same grammar, but the result must be a condition (used for masks).
    static ScalarExpr parse_condition(std::string_view text, const FunctionTable* extra = nullptr);
    static ScalarExpr constant(double v);
    static ScalarExpr variable(std::string name);

    bool is_condition() const;
    bool is_constant() const;
    std::vector<std::string> free_variables() const;
    std::string to_string() const;

    ScalarExpr substitute(const std::map<std::string, ScalarExpr, std::less<>>& repl) const;

    // Slow path by-name evaluation; compile for anything hot.
    double eval(const std::map<std::string, double, std::less<>>& env) const;

    friend ScalarExpr operator+(const ScalarExpr& a, const ScalarExpr& b);
    friend ScalarExpr operator-(const ScalarExpr& a, const ScalarExpr& b);
    friend ScalarExpr operator*(const ScalarExpr& a, const ScalarExpr& b);
    friend ScalarExpr operator/(const ScalarExpr& a, const ScalarExpr& b);
    friend ScalarExpr operator-(const ScalarExpr& a);

    const std::shared_ptr<const Node>& root() const { return root_; }

private:
    explicit ScalarExpr(std::shared_ptr<const Node> n) : root_(std::move(n)) {}
    std::shared_ptr<const Node> root_;
};

// An expression with its variables resolved to argument slots.
class CompiledExpr {
public:
    CompiledExpr() = default;
    // Throws InputError if the expression uses a variable not in `slots`.
    CompiledExpr(const ScalarExpr& e, const std::vector<std::string>& slots);

    double operator()(std::span<const double> x) const;
    bool test(std::span<const double> x) const;
    struct Derivative {
        double value = 0.0;
        bool nonsmooth = false;  // one-sided differences disagree
    };
    // Central difference in one slot. h <= 0 uses 1e-5 * max(1, |x|).
    Derivative diff_fd(std::span<const double> x, std::size_t slot, double h = 0.0) const;

    bool valid() const { return !ops_.empty(); }
    bool is_condition() const { return condition_; }

    struct Op {
        int kind = 0;
        int fn = 0;
        int slot = -1;
        double value = 0.0;
        int first = 0;  // index into kids_
        int count = 0;
        int text = -1;
        const ExternalFunction* ext = nullptr;
    };

private:
    int flatten(const ScalarExpr::Node& n, const std::vector<std::string>& slots);
    double eval(int i, const double* x) const;
    double eval_op(const Op& op, const double* x) const;

    std::vector<Op> ops_;
    std::vector<int> kids_;
    std::vector<std::string> text_;  // source of ops that can raise domain errors
    std::vector<std::shared_ptr<const ExternalFunction>> keep_;
    int root_ = -1;
    bool condition_ = false;
};

}  // namespace isocausal
