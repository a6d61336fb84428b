#include "elastinet/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace elastinet {

const char* op_name(Op op) {
    switch (op) {
        case Op::Fma: return "fma";
        case Op::Mul: return "mul";
        case Op::Add: return "add";
        case Op::Tanh: return "tanh";
        case Op::Relu: return "relu";
        case Op::Pow: return "power";
        case Op::Sqrt: return "sqrt";
        case Op::Sign: return "sign";
        case Op::Abs: return "abs";
        case Op::Max: return "max";
        case Op::Sin: return "sin";
        case Op::Cos: return "cos";
        case Op::Const: return "constant";
        case Op::Var: return "variable";
    }
    return "?";
}

namespace {
inline double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }
}  // namespace

NodeId Tape::push(Op op, NodeId a, NodeId b, NodeId c, double expo) {
    const NodeId id = static_cast<NodeId>(op_.size());
    op_.push_back(op);
    a_.push_back(a);
    b_.push_back(b);
    c_.push_back(c);
    expo_.push_back(expo);
    val_.push_back(0.0);
    adj_.push_back(0.0);
    return id;
}

NodeId Tape::constant(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    if (auto it = const_pool_.find(bits); it != const_pool_.end()) return it->second;
    const NodeId id = push(Op::Const, kNoNode, kNoNode, kNoNode);
    val_[static_cast<std::size_t>(id)] = v;
    const_pool_.emplace(bits, id);
    return id;
}

NodeId Tape::variable(const std::string& name) {
    if (name.empty()) raise("variable name must be nonempty");
    if (var_by_name_.count(name)) raise("variable '" + name + "' already exists");
    const NodeId id = push(Op::Var, kNoNode, kNoNode, kNoNode);
    var_by_name_.emplace(name, id);
    var_nodes_.push_back(id);
    var_names_.push_back(name);
    return id;
}

NodeId Tape::find_variable(const std::string& name) const {
    auto it = var_by_name_.find(name);
    return it == var_by_name_.end() ? kNoNode : it->second;
}

const std::string& Tape::variable_name(NodeId n) const {
    auto it = std::lower_bound(var_nodes_.begin(), var_nodes_.end(), n);
    if (it == var_nodes_.end() || *it != n) raise("node is not a variable", n);
    return var_names_[static_cast<std::size_t>(it - var_nodes_.begin())];
}

// Builders fold constants and strip identities so tangent subgraphs stay small.
#define EN_ISCONST(n) (op_[static_cast<std::size_t>(n)] == Op::Const)
#define EN_CVAL(n) (val_[static_cast<std::size_t>(n)])

NodeId Tape::add(NodeId a, NodeId b) {
    if (EN_ISCONST(a) && EN_ISCONST(b)) return constant(EN_CVAL(a) + EN_CVAL(b));
    if (EN_ISCONST(a) && EN_CVAL(a) == 0.0) return b;
    if (EN_ISCONST(b) && EN_CVAL(b) == 0.0) return a;
    return push(Op::Add, a, b, kNoNode);
}

NodeId Tape::mul(NodeId a, NodeId b) {
    if (EN_ISCONST(a) && EN_ISCONST(b)) return constant(EN_CVAL(a) * EN_CVAL(b));
    if (EN_ISCONST(a)) {
        if (EN_CVAL(a) == 1.0) return b;
        if (EN_CVAL(a) == 0.0) return constant(0.0);
    }
    if (EN_ISCONST(b)) {
        if (EN_CVAL(b) == 1.0) return a;
        if (EN_CVAL(b) == 0.0) return constant(0.0);
    }
    return push(Op::Mul, a, b, kNoNode);
}

NodeId Tape::fma(NodeId a, NodeId b, NodeId c) {
    if (EN_ISCONST(a) && EN_ISCONST(b)) return add(constant(EN_CVAL(a) * EN_CVAL(b)), c);
    if ((EN_ISCONST(a) && EN_CVAL(a) == 0.0) || (EN_ISCONST(b) && EN_CVAL(b) == 0.0)) return c;
    if (EN_ISCONST(a) && EN_CVAL(a) == 1.0) return add(b, c);
    if (EN_ISCONST(b) && EN_CVAL(b) == 1.0) return add(a, c);
    if (EN_ISCONST(c) && EN_CVAL(c) == 0.0) return mul(a, b);
    return push(Op::Fma, a, b, c);
}

NodeId Tape::tanh(NodeId a) {
    if (EN_ISCONST(a)) return constant(std::tanh(EN_CVAL(a)));
    return push(Op::Tanh, a, kNoNode, kNoNode);
}

NodeId Tape::relu(NodeId a) {
    if (EN_ISCONST(a)) return constant(EN_CVAL(a) > 0.0 ? EN_CVAL(a) : 0.0);
    return push(Op::Relu, a, kNoNode, kNoNode);
}

NodeId Tape::pow(NodeId a, double exponent) {
    if (exponent == 1.0) return a;
    if (exponent == 0.0) return constant(1.0);
    if (EN_ISCONST(a)) return constant(std::pow(EN_CVAL(a), exponent));
    return push(Op::Pow, a, kNoNode, kNoNode, exponent);
}

NodeId Tape::sqrt(NodeId a) {
    if (EN_ISCONST(a)) return constant(std::sqrt(EN_CVAL(a)));
    return push(Op::Sqrt, a, kNoNode, kNoNode);
}

NodeId Tape::sign(NodeId a) {
    if (EN_ISCONST(a)) return constant(sgn(EN_CVAL(a)));
    return push(Op::Sign, a, kNoNode, kNoNode);
}

NodeId Tape::abs(NodeId a) {
    if (EN_ISCONST(a)) return constant(std::abs(EN_CVAL(a)));
    return push(Op::Abs, a, kNoNode, kNoNode);
}

NodeId Tape::max(NodeId a, NodeId b) {
    if (a == b) return a;
    if (EN_ISCONST(a) && EN_ISCONST(b)) return constant(std::max(EN_CVAL(a), EN_CVAL(b)));
    return push(Op::Max, a, b, kNoNode);
}

NodeId Tape::sin(NodeId a) {
    if (EN_ISCONST(a)) return constant(std::sin(EN_CVAL(a)));
    return push(Op::Sin, a, kNoNode, kNoNode);
}

NodeId Tape::cos(NodeId a) {
    if (EN_ISCONST(a)) return constant(std::cos(EN_CVAL(a)));
    return push(Op::Cos, a, kNoNode, kNoNode);
}

#undef EN_ISCONST
#undef EN_CVAL

void Tape::mark_output(const std::string& name, NodeId node) {
    outputs_.emplace_back(name, node);
}

void Tape::set_value(NodeId var, double v) {
    val_[static_cast<std::size_t>(var)] = v;
}

void Tape::forward_from(NodeId first) {
    const Op* op = op_.data();
    const NodeId *a = a_.data(), *b = b_.data(), *c = c_.data();
    const double* e = expo_.data();
    double* v = val_.data();
    const NodeId n = size();
    for (NodeId i = first; i < n; ++i) {
        switch (op[i]) {
            case Op::Fma: v[i] = v[a[i]] * v[b[i]] + v[c[i]]; break;
            case Op::Mul: v[i] = v[a[i]] * v[b[i]]; break;
            case Op::Add: v[i] = v[a[i]] + v[b[i]]; break;
            case Op::Tanh: v[i] = std::tanh(v[a[i]]); break;
            case Op::Relu: v[i] = v[a[i]] > 0.0 ? v[a[i]] : 0.0; break;
            case Op::Pow:
                v[i] = e[i] == 2.0 ? v[a[i]] * v[a[i]]
                       : e[i] == -1.0 ? 1.0 / v[a[i]]
                                      : std::pow(v[a[i]], e[i]);
                break;
            case Op::Sqrt: v[i] = std::sqrt(v[a[i]]); break;
            case Op::Sign: v[i] = sgn(v[a[i]]); break;
            case Op::Abs: v[i] = std::abs(v[a[i]]); break;
            case Op::Max: v[i] = std::max(v[a[i]], v[b[i]]); break;
            case Op::Sin: v[i] = std::sin(v[a[i]]); break;
            case Op::Cos: v[i] = std::cos(v[a[i]]); break;
            case Op::Const:
            case Op::Var: break;
        }
    }
}

NodeId Tape::find_nonfinite(NodeId upto) const {
    for (NodeId i = 0; i <= upto; ++i)
        if (!std::isfinite(val_[static_cast<std::size_t>(i)])) return i;
    return kNoNode;
}

void Tape::zero_adjoints(NodeId from, NodeId to) {
    if (to <= from) return;
    std::memset(adj_.data() + from, 0, static_cast<std::size_t>(to - from) * sizeof(double));
}

void Tape::reverse(NodeId top) {
    const Op* op = op_.data();
    const NodeId *a = a_.data(), *b = b_.data(), *c = c_.data();
    const double* e = expo_.data();
    const double* v = val_.data();
    double* adj = adj_.data();
    for (NodeId i = top; i >= 0; --i) {
        const double ad = adj[i];
        if (ad == 0.0) continue;
        switch (op[i]) {
            case Op::Fma:
                adj[a[i]] += ad * v[b[i]];
                adj[b[i]] += ad * v[a[i]];
                adj[c[i]] += ad;
                break;
            case Op::Mul:
                adj[a[i]] += ad * v[b[i]];
                adj[b[i]] += ad * v[a[i]];
                break;
            case Op::Add:
                adj[a[i]] += ad;
                adj[b[i]] += ad;
                break;
            case Op::Tanh: adj[a[i]] += ad * (1.0 - v[i] * v[i]); break;
            case Op::Relu:
                if (v[a[i]] > 0.0) adj[a[i]] += ad;
                break;
            case Op::Pow:
                adj[a[i]] += e[i] == 2.0 ? ad * 2.0 * v[a[i]]
                                         : ad * e[i] * std::pow(v[a[i]], e[i] - 1.0);
                break;
            case Op::Sqrt:
                if (v[a[i]] > 0.0) adj[a[i]] += ad * 0.5 / v[i];
                break;
            case Op::Sign: break;
            case Op::Abs: adj[a[i]] += ad * sgn(v[a[i]]); break;
            case Op::Max:
                if (v[a[i]] > v[b[i]]) adj[a[i]] += ad;
                else if (v[b[i]] > v[a[i]]) adj[b[i]] += ad;
                else {
                    adj[a[i]] += 0.5 * ad;
                    adj[b[i]] += 0.5 * ad;
                }
                break;
            case Op::Sin: adj[a[i]] += ad * std::cos(v[a[i]]); break;
            case Op::Cos: adj[a[i]] -= ad * std::sin(v[a[i]]); break;
            case Op::Const:
            case Op::Var: break;
        }
    }
}

void Tape::bind_all(const std::map<std::string, double>& bindings) {
    for (const auto& [name, v] : bindings) {
        const NodeId n = find_variable(name);
        if (n == kNoNode) raise("unknown variable '" + name + "'");
        set_value(n, v);
    }
    if (bindings.size() != var_nodes_.size())
        for (const auto& name : var_names_)
            if (!bindings.count(name)) raise("unbound variable '" + name + "'");
}

std::map<std::string, double> Tape::evaluate(const std::map<std::string, double>& bindings) {
    bind_all(bindings);
    forward();
    if (const NodeId bad = find_nonfinite(size() - 1); bad != kNoNode)
        raise(std::string("non-finite value in ") + op_name(op(bad)) + " node " +
                  std::to_string(bad),
              bad);
    std::map<std::string, double> out;
    for (const auto& [name, node] : outputs_) out[name] = value(node);
    return out;
}

// Tangent of node n given the tangents of everything before it. kNoNode marks
// a structural zero; builders prune them so dead branches emit no nodes.
NodeId Tape::tangent_of(NodeId n, const std::vector<NodeId>& tan) {
    const std::size_t i = static_cast<std::size_t>(n);
    const NodeId na = a_[i], nb = b_[i], nc = c_[i];
    const NodeId ta = na == kNoNode ? kNoNode : tan[static_cast<std::size_t>(na)];
    const NodeId tb = nb == kNoNode ? kNoNode : tan[static_cast<std::size_t>(nb)];
    const NodeId tc = nc == kNoNode ? kNoNode : tan[static_cast<std::size_t>(nc)];
    switch (op_[i]) {
        case Op::Add:
            if (ta == kNoNode) return tb;
            if (tb == kNoNode) return ta;
            return add(ta, tb);
        case Op::Mul:
            if (ta != kNoNode && tb != kNoNode) return fma(ta, nb, mul(na, tb));
            if (ta != kNoNode) return mul(ta, nb);
            if (tb != kNoNode) return mul(na, tb);
            return kNoNode;
        case Op::Fma: {
            NodeId m = kNoNode;
            if (ta != kNoNode && tb != kNoNode) m = fma(ta, nb, mul(na, tb));
            else if (ta != kNoNode) m = mul(ta, nb);
            else if (tb != kNoNode) m = mul(na, tb);
            if (m == kNoNode) return tc;
            if (tc == kNoNode) return m;
            return add(m, tc);
        }
        case Op::Tanh: {
            if (ta == kNoNode) return kNoNode;
            const NodeId g = fma(mul(n, n), constant(-1.0), constant(1.0));  // 1 - tanh^2
            return mul(g, ta);
        }
        case Op::Relu:
            if (ta == kNoNode) return kNoNode;
            return mul(relu(sign(na)), ta);  // step with relu'(0) = 0
        case Op::Pow: {
            if (ta == kNoNode) return kNoNode;
            const NodeId g = mul(constant(expo_[i]), pow(na, expo_[i] - 1.0));
            return mul(g, ta);
        }
        case Op::Sqrt:
            if (ta == kNoNode) return kNoNode;
            return mul(mul(constant(0.5), pow(na, -0.5)), ta);
        case Op::Sign: return kNoNode;
        case Op::Abs:
            if (ta == kNoNode) return kNoNode;
            return mul(sign(na), ta);
        case Op::Max: {
            if (ta == kNoNode && tb == kNoNode) return kNoNode;
            const NodeId w = sign(sub(na, nb));  // +1 / 0 / -1; ties weight each side 1/2
            const NodeId wa = fma(w, constant(0.5), constant(0.5));
            const NodeId wb = fma(w, constant(-0.5), constant(0.5));
            if (ta != kNoNode && tb != kNoNode) return fma(wa, ta, mul(wb, tb));
            if (ta != kNoNode) return mul(wa, ta);
            return mul(wb, tb);
        }
        case Op::Sin:
            if (ta == kNoNode) return kNoNode;
            return mul(cos(na), ta);
        case Op::Cos:
            if (ta == kNoNode) return kNoNode;
            return mul(mul(sin(na), constant(-1.0)), ta);
        case Op::Const:
        case Op::Var: return kNoNode;
    }
    return kNoNode;
}

NodeId Tape::input_derivative(NodeId output, const std::string& wrt) {
    const NodeId w = find_variable(wrt);
    if (w == kNoNode) raise("input_derivative: '" + wrt + "' is not a variable");
    if (output < 0 || output >= size()) raise("input_derivative: output node out of range");
    if (w > output) return constant(0.0);

    const std::size_t n = static_cast<std::size_t>(output) + 1;
    // Dependency cone: nodes that transitively read `wrt` AND feed `output`.
    std::vector<std::uint8_t> dep(n, 0), anc(n, 0);
    dep[static_cast<std::size_t>(w)] = 1;
    for (std::size_t i = static_cast<std::size_t>(w) + 1; i < n; ++i) {
        const NodeId na = a_[i], nb = b_[i], nc = c_[i];
        dep[i] = (na != kNoNode && dep[static_cast<std::size_t>(na)]) ||
                 (nb != kNoNode && dep[static_cast<std::size_t>(nb)]) ||
                 (nc != kNoNode && dep[static_cast<std::size_t>(nc)]);
    }
    anc[n - 1] = 1;
    for (NodeId i = output; i >= 0; --i) {
        if (!anc[static_cast<std::size_t>(i)]) continue;
        const std::size_t k = static_cast<std::size_t>(i);
        if (a_[k] != kNoNode) anc[static_cast<std::size_t>(a_[k])] = 1;
        if (b_[k] != kNoNode) anc[static_cast<std::size_t>(b_[k])] = 1;
        if (c_[k] != kNoNode) anc[static_cast<std::size_t>(c_[k])] = 1;
    }

    std::vector<NodeId> tan(n, kNoNode);
    tan[static_cast<std::size_t>(w)] = constant(1.0);
    for (NodeId i = w + 1; i <= output; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        if (dep[k] && anc[k]) tan[k] = tangent_of(i, tan);
    }
    const NodeId r = tan[n - 1];
    return r == kNoNode ? constant(0.0) : r;
}

std::map<std::string, double> Tape::parameter_gradient(
    NodeId loss, const std::vector<std::string>& params,
    const std::map<std::string, double>& bindings) {
    if (loss < 0 || loss >= size()) raise("parameter_gradient: loss node out of range");
    bind_all(bindings);
    forward();
    if (const NodeId bad = find_nonfinite(loss); bad != kNoNode)
        raise(std::string("non-finite value in ") + op_name(op(bad)) + " node " +
                  std::to_string(bad),
              bad);
    zero_adjoints(0, size());
    seed_adjoint(loss, 1.0);
    reverse(loss);
    std::map<std::string, double> grad;
    for (const auto& p : params) {
        const NodeId n = find_variable(p);
        if (n == kNoNode) raise("parameter_gradient: unknown parameter '" + p + "'");
        grad[p] = adjoint(n);
    }
    return grad;
}

}  // namespace elastinet
