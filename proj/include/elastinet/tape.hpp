#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "elastinet/util.hpp"

namespace elastinet {

// Scalar expression-graph engine. A Tape owns an append-only DAG of scalar
// nodes in topological order. Forward sweeps evaluate node values in order;
// one reverse sweep propagates adjoints, giving gradients of a scalar with
// respect to every variable it reaches.
//
// The key contract is nesting: input_derivative() does not return a detached
// number — it appends a tangent subgraph to the same tape and returns its root,
// so a loss assembled from such derivatives can itself be differentiated with
// respect to parameters by a single reverse sweep.

enum class Op : std::uint8_t {
    Fma,  // a*b + c, emitted by the builders for dense layers; hottest op first
    Mul,
    Add,
    Tanh,
    Relu,
    Pow,   // operand ^ fixed real exponent
    Sqrt,
    Sign,  // -1/0/+1, derivative 0 everywhere (subgradient at 0 is 0)
    Abs,   // d|x|/dx at 0 taken as 0
    Max,   // ties propagate half the adjoint to each operand
    Sin,
    Cos,
    Const,
    Var,
};

const char* op_name(Op op);

using NodeId = std::int32_t;
constexpr NodeId kNoNode = -1;

class Tape {
public:
    // -- graph construction -------------------------------------------------
    NodeId constant(double v);  // interned: equal bit patterns share a node
    NodeId variable(const std::string& name);

    NodeId add(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId fma(NodeId a, NodeId b, NodeId c);  // a*b + c
    NodeId tanh(NodeId a);
    NodeId relu(NodeId a);
    NodeId pow(NodeId a, double exponent);
    NodeId sqrt(NodeId a);
    NodeId sign(NodeId a);
    NodeId abs(NodeId a);
    NodeId max(NodeId a, NodeId b);
    NodeId sin(NodeId a);
    NodeId cos(NodeId a);

    // Sugar lowered onto the ops above.
    NodeId neg(NodeId a) { return mul(a, constant(-1.0)); }
    NodeId sub(NodeId a, NodeId b) { return fma(b, constant(-1.0), a); }
    NodeId div(NodeId a, NodeId b) { return mul(a, pow(b, -1.0)); }
    NodeId square(NodeId a) { return mul(a, a); }

    void mark_output(const std::string& name, NodeId node);

    // -- checked, name-based operations --------------------------------------
    // Binds every variable, runs a checked forward sweep (non-finite
    // intermediates raise an Error carrying the node id), returns the marked
    // outputs.
    std::map<std::string, double> evaluate(const std::map<std::string, double>& bindings);

    // Appends d(output)/d(wrt) as a tangent subgraph and returns its root.
    // Construction is restricted to nodes that both depend on `wrt` and feed
    // `output`; everything outside that cone contributes a structural zero.
    NodeId input_derivative(NodeId output, const std::string& wrt);

    // Gradient of a scalar node with respect to the named variables: bind,
    // forward, one reverse sweep. Parameters the loss never touches get 0.
    std::map<std::string, double> parameter_gradient(NodeId loss,
                                                     const std::vector<std::string>& params,
                                                     const std::map<std::string, double>& bindings);

    // -- fast path (training loop) ------------------------------------------
    // The loop binds values by node id, sweeps, reads values/adjoints, with no
    // maps or checks per point. Non-finiteness is detected at the endpoints by
    // the caller and diagnosed with find_nonfinite().
    void set_value(NodeId var, double v);
    double value(NodeId n) const { return val_[static_cast<std::size_t>(n)]; }
    void forward_from(NodeId first);
    void forward() { forward_from(0); }
    NodeId find_nonfinite(NodeId upto) const;  // first non-finite node or kNoNode

    void zero_adjoints(NodeId from, NodeId to);  // [from, to)
    void seed_adjoint(NodeId n, double v) { adj_[static_cast<std::size_t>(n)] += v; }
    void reverse(NodeId top);  // sweep top..0; seeds must be set beforehand
    double adjoint(NodeId n) const { return adj_[static_cast<std::size_t>(n)]; }

    // -- introspection --------------------------------------------------------
    NodeId size() const { return static_cast<NodeId>(op_.size()); }
    Op op(NodeId n) const { return op_[static_cast<std::size_t>(n)]; }
    bool is_variable(NodeId n) const { return op(n) == Op::Var; }
    NodeId find_variable(const std::string& name) const;  // kNoNode if absent
    const std::vector<NodeId>& variables() const { return var_nodes_; }
    const std::string& variable_name(NodeId n) const;

private:
    NodeId push(Op op, NodeId a, NodeId b, NodeId c, double expo = 0.0);
    void bind_all(const std::map<std::string, double>& bindings);
    NodeId tangent_of(NodeId n, const std::vector<NodeId>& tan);

    std::vector<Op> op_;
    std::vector<NodeId> a_, b_, c_;
    std::vector<double> expo_;  // exponent, meaningful for Pow nodes only
    std::vector<double> val_;
    std::vector<double> adj_;

    std::vector<NodeId> var_nodes_;
    std::unordered_map<std::string, NodeId> var_by_name_;
    std::vector<std::string> var_names_;  // parallel to var_nodes_
    std::unordered_map<std::uint64_t, NodeId> const_pool_;
    std::vector<std::pair<std::string, NodeId>> outputs_;
};

// Thin value wrapper so physics code reads like the math it implements.
struct Expr {
    Tape* t = nullptr;
    NodeId id = kNoNode;
    Expr() = default;
    Expr(Tape& tape, NodeId n) : t(&tape), id(n) {}
};

inline Expr operator+(Expr a, Expr b) { return {*a.t, a.t->add(a.id, b.id)}; }
inline Expr operator-(Expr a, Expr b) { return {*a.t, a.t->sub(a.id, b.id)}; }
inline Expr operator*(Expr a, Expr b) { return {*a.t, a.t->mul(a.id, b.id)}; }
inline Expr operator/(Expr a, Expr b) { return {*a.t, a.t->div(a.id, b.id)}; }
inline Expr operator-(Expr a) { return {*a.t, a.t->neg(a.id)}; }
inline Expr operator+(double a, Expr b) { return {*b.t, b.t->add(b.t->constant(a), b.id)}; }
inline Expr operator+(Expr a, double b) { return b + a; }
inline Expr operator-(double a, Expr b) { return {*b.t, b.t->sub(b.t->constant(a), b.id)}; }
inline Expr operator-(Expr a, double b) { return {*a.t, a.t->sub(a.id, a.t->constant(b))}; }
inline Expr operator*(double a, Expr b) { return {*b.t, b.t->mul(b.t->constant(a), b.id)}; }
inline Expr operator*(Expr a, double b) { return b * a; }
inline Expr operator/(Expr a, double b) { return {*a.t, a.t->mul(a.id, a.t->constant(1.0 / b))}; }

}  // namespace elastinet
