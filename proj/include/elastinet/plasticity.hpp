#pragma once

#include <array>

#include "elastinet/tape.hpp"

namespace elastinet {

// Graph-level von Mises building blocks. Symmetric tensors are passed as the
// four plane-strain-relevant components, ordered (xx, yy, zz, xy); the xy
// entry counts twice in every contraction.

// Subtract trace/3 from the diagonal; the result has zero trace.
std::array<NodeId, 4> deviatoric(Tape& t, const std::array<NodeId, 4>& v);

// q = sqrt(3/2 s:s) for a deviatoric stress s.
NodeId equivalent_stress(Tape& t, const std::array<NodeId, 4>& s);

// ebar = sqrt(2/3 e:e) for a deviatoric strain e.
NodeId equivalent_strain(Tape& t, const std::array<NodeId, 4>& e);

// The signed plastic multiplier ebar - sigma_y / (3 mu). Positivity is left to
// the KKT penalties; no clipping happens here.
NodeId plastic_multiplier_formula(Tape& t, NodeId ebar, NodeId sigma_y, NodeId mu);

// The three KKT residuals for (ebar_p >= 0, F <= 0, ebar_p F = 0):
//   (1 - sign(ebar_p)) |ebar_p|,  (1 + sign(F)) |F|,  |ebar_p F|.
// Each is squared and averaged by the loss assembler like any other residual.
std::array<NodeId, 3> kkt_penalties(Tape& t, NodeId ebar_p, NodeId F);

// s_ij / q with the 0/0 at the stress-free origin resolved to 0: the divisor
// is clamped to q_min and the whole ratio gated off when q <= q_min.
std::array<NodeId, 4> guarded_flow_direction(Tape& t, const std::array<NodeId, 4>& s, NodeId q,
                                             double q_min);

}  // namespace elastinet
