#include "elastinet/plasticity.hpp"

#include "elastinet/util.hpp"

namespace elastinet {

namespace {

// s:s with the symmetric off-diagonal counted twice.
NodeId self_contraction(Tape& t, const std::array<NodeId, 4>& v) {
    NodeId acc = t.square(v[0]);
    acc = t.fma(v[1], v[1], acc);
    acc = t.fma(v[2], v[2], acc);
    const NodeId xy2 = t.square(v[3]);
    return t.fma(t.constant(2.0), xy2, acc);
}

}  // namespace

std::array<NodeId, 4> deviatoric(Tape& t, const std::array<NodeId, 4>& v) {
    const NodeId third = t.mul(t.add(t.add(v[0], v[1]), v[2]), t.constant(1.0 / 3.0));
    return {t.sub(v[0], third), t.sub(v[1], third), t.sub(v[2], third), v[3]};
}

NodeId equivalent_stress(Tape& t, const std::array<NodeId, 4>& s) {
    return t.sqrt(t.mul(t.constant(1.5), self_contraction(t, s)));
}

NodeId equivalent_strain(Tape& t, const std::array<NodeId, 4>& e) {
    return t.sqrt(t.mul(t.constant(2.0 / 3.0), self_contraction(t, e)));
}

NodeId plastic_multiplier_formula(Tape& t, NodeId ebar, NodeId sigma_y, NodeId mu) {
    // Catch a non-positive modulus where it is knowable now (a baked-in
    // constant or an already-bound variable); computed mu nodes are the
    // caller's responsibility.
    if ((t.op(mu) == Op::Const || t.is_variable(mu)) && t.value(mu) <= 0.0)
        raise("mu must be positive");
    return t.sub(ebar, t.div(sigma_y, t.mul(t.constant(3.0), mu)));
}

std::array<NodeId, 3> kkt_penalties(Tape& t, NodeId ebar_p, NodeId F) {
    const NodeId one = t.constant(1.0);
    const NodeId positivity = t.mul(t.sub(one, t.sign(ebar_p)), t.abs(ebar_p));
    const NodeId negativity = t.mul(t.add(one, t.sign(F)), t.abs(F));
    const NodeId complementarity = t.abs(t.mul(ebar_p, F));
    return {positivity, negativity, complementarity};
}

std::array<NodeId, 4> guarded_flow_direction(Tape& t, const std::array<NodeId, 4>& s, NodeId q,
                                             double q_min) {
    const NodeId qm = t.constant(q_min);
    // 1 when q > q_min, 0 otherwise (sign(0) = 0 keeps the boundary off)
    const NodeId gate = t.relu(t.sign(t.sub(q, qm)));
    const NodeId inv = t.pow(t.max(q, qm), -1.0);
    std::array<NodeId, 4> dir;
    for (int i = 0; i < 4; ++i) dir[i] = t.mul(gate, t.mul(s[i], inv));
    return dir;
}

}  // namespace elastinet
