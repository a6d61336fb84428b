#include "elastinet/analytic.hpp"

#include <cmath>
#include <numbers>

namespace elastinet {

namespace {
constexpr double pi = std::numbers::pi;
}

std::pair<double, double> exact_displacement(double x, double y, double Q) {
    const double ux = std::cos(2.0 * pi * x) * std::sin(pi * y);
    const double uy = std::sin(pi * x) * Q * y * y * y * y / 4.0;
    return {ux, uy};
}

std::array<double, 3> exact_stress(double x, double y, double lambda, double mu, double Q) {
    const double exx = -2.0 * pi * std::sin(2.0 * pi * x) * std::sin(pi * y);
    const double eyy = std::sin(pi * x) * Q * y * y * y;
    const double exy =
        0.5 * (pi * std::cos(2.0 * pi * x) * std::cos(pi * y) + pi * std::cos(pi * x) * Q * y * y * y * y / 4.0);
    return {(lambda + 2.0 * mu) * exx + lambda * eyy, (lambda + 2.0 * mu) * eyy + lambda * exx,
            2.0 * mu * exy};
}

std::pair<double, double> exact_body_force(double x, double y, double lambda, double mu,
                                           double Q) {
    const double c2x = std::cos(2.0 * pi * x), s2x = std::sin(2.0 * pi * x);
    const double cx = std::cos(pi * x), sx = std::sin(pi * x);
    const double sy = std::sin(pi * y), cy = std::cos(pi * y);
    const double fx = lambda * (4.0 * pi * pi * c2x * sy - pi * cx * Q * y * y * y) +
                      mu * (9.0 * pi * pi * c2x * sy - pi * cx * Q * y * y * y);
    const double fy =
        lambda * (-3.0 * sx * Q * y * y + 2.0 * pi * pi * s2x * cy) +
        mu * (-6.0 * sx * Q * y * y + 2.0 * pi * pi * s2x * cy + pi * pi * sx * Q * y * y * y * y / 4.0);
    return {fx, fy};
}

std::array<NodeId, 5> emit_exact_fields(Tape& t, NodeId x, NodeId y, double lambda, double mu,
                                        double Q) {
    const NodeId c2x = t.cos(t.mul(t.constant(2.0 * pi), x));
    const NodeId s2x = t.sin(t.mul(t.constant(2.0 * pi), x));
    const NodeId cx = t.cos(t.mul(t.constant(pi), x));
    const NodeId sx = t.sin(t.mul(t.constant(pi), x));
    const NodeId sy = t.sin(t.mul(t.constant(pi), y));
    const NodeId cy = t.cos(t.mul(t.constant(pi), y));
    const NodeId y3 = t.pow(y, 3.0);
    const NodeId y4 = t.pow(y, 4.0);

    const NodeId ux = t.mul(c2x, sy);
    const NodeId uy = t.mul(sx, t.mul(t.constant(Q / 4.0), y4));

    const NodeId exx = t.mul(t.constant(-2.0 * pi), t.mul(s2x, sy));
    const NodeId eyy = t.mul(sx, t.mul(t.constant(Q), y3));
    const NodeId exy = t.mul(
        t.constant(0.5 * pi),
        t.add(t.mul(c2x, cy), t.mul(cx, t.mul(t.constant(Q / 4.0), y4))));

    const NodeId sxx = t.fma(t.constant(lambda + 2.0 * mu), exx, t.mul(t.constant(lambda), eyy));
    const NodeId syy = t.fma(t.constant(lambda + 2.0 * mu), eyy, t.mul(t.constant(lambda), exx));
    const NodeId sxy = t.mul(t.constant(2.0 * mu), exy);
    return {ux, uy, sxx, syy, sxy};
}

}  // namespace elastinet
