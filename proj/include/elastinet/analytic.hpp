#pragma once

#include <array>
#include <utility>

#include "elastinet/tape.hpp"

namespace elastinet {

// Manufactured plane-strain solution on the unit square:
//   u_x = cos(2 pi x) sin(pi y),  u_y = sin(pi x) Q y^4 / 4,
// with body forces chosen so the momentum balance sigma_ij,j + f_i = 0 holds
// exactly (f_i = -sigma_ij,j of the closed-form stress).

std::pair<double, double> exact_displacement(double x, double y, double Q);

// Plane-strain stress of the exact displacement: (sxx, syy, sxy).
std::array<double, 3> exact_stress(double x, double y, double lambda, double mu, double Q);

std::pair<double, double> exact_body_force(double x, double y, double lambda, double mu,
                                           double Q);

// The same displacement and stress emitted as graph nodes, so loss code can be
// exercised with "networks" frozen at the exact solution. Outputs ordered
// (ux, uy, sxx, syy, sxy).
std::array<NodeId, 5> emit_exact_fields(Tape& t, NodeId x, NodeId y, double lambda, double mu,
                                        double Q);

}  // namespace elastinet
