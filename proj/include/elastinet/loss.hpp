#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "elastinet/dataset.hpp"
#include "elastinet/material.hpp"
#include "elastinet/network.hpp"
#include "elastinet/tape.hpp"

namespace elastinet {

// Per-term mean-of-squares breakdown of the composite loss. `total` is the
// unweighted sum of the terms.
struct LossReport {
    std::vector<std::pair<std::string, double>> terms;
    double total = 0.0;

    double term(const std::string& name) const;  // raises on unknown name
};

struct LossOptions {
    ProblemKind problem = ProblemKind::Elastic;
    // mu arrives as a per-point input column instead of a material constant
    // (surrogate training over a family of materials)
    bool surrogate_mu = false;
    // Associative von Mises flow gives e^p = (3/2) ebar_p s/q; the alternative
    // 2/3 coefficient is selectable for comparison runs.
    double flow_coefficient = 1.5;
    // Replace the consistency gap ebar - sigma_y/(3 mu) by its positive part,
    // so purely elastic states are not penalized. Off by default.
    bool clipped_consistency = false;
};

// Emits the field graphs at a point given the input nodes (x, y[, mu]).
// Outputs are keyed by field name and must be in the same normalized units as
// the observations they will be compared against.
using FieldEmitter =
    std::function<std::map<std::string, NodeId>(Tape&, const std::vector<NodeId>&)>;

// Fields pinned to the manufactured elastic solution (raw physical units).
FieldEmitter exact_field_emitter(double lambda, double mu, double Q);

// Homogeneous plane-strain state: affine displacements realizing the given
// total strain, constant stresses. `sig` is physical (xx, yy, zz, xy); the
// record's scales convert everything to normalized units.
FieldEmitter homogeneous_state_emitter(double exx, double eyy, double exy,
                                       const std::array<double, 4>& sig,
                                       const NormalizationRecord& record);

// The composite data + physics loss, assembled once as a single expression
// graph with per-point inputs (coordinates, observations, forces) as rebound
// variables. Evaluating or differentiating a batch is then a sweep per point
// over the same graph; trainable-parameter adjoints accumulate across the
// batch in one reverse pass per point.
//
// All internal algebra runs in normalized units: stresses and sigma_y are
// divided by the record's shared stress scale S, lambda and mu likewise (so
// the stored parameter values are lambda/S, mu/S), displacements by their own
// column scales. Physics residuals are the physical residuals divided by S.
// With an empty record every scale is 1 and the loss is the textbook one.
class LossProgram {
public:
    LossProgram(const FieldModel& model, const MaterialParams& material,
                const NormalizationRecord& record, LossOptions options = {});
    // Diagnostic program with fields supplied by an emitter instead of
    // networks (no weight parameters; material gradients still available).
    LossProgram(const FieldEmitter& fields, const MaterialParams& material,
                const NormalizationRecord& record, LossOptions options = {});

    const std::vector<std::string>& term_names() const { return names_; }

    LossReport evaluate(const Dataset& data);
    LossReport evaluate(const Dataset& data, std::span<const std::size_t> rows);

    // Mean per-point loss over the rows; fills `grad` with its gradient with
    // respect to parameters(). Raises on non-finite values, naming the node.
    double batch_gradient(const Dataset& data, std::span<const std::size_t> rows,
                          std::vector<double>& grad);

    // Parameter vector: network weights in flatten order, then the trainable
    // material values (normalized units), in the order lambda, mu, sigma_y.
    std::vector<double> parameters() const;
    void set_parameters(std::span<const double> theta);
    std::size_t parameter_count() const { return theta_nodes_.size(); }
    std::size_t weight_count() const { return weight_nodes_.size(); }
    // tape variable name of parameters()[i] (for optimizer diagnostics)
    const std::string& parameter_name(std::size_t i) const;

    // Index into parameters() of each trainable material value; -1 when fixed.
    int lambda_index() const { return lambda_index_; }
    int mu_index() const { return mu_index_; }
    int sigma_y_index() const { return sigma_y_index_; }

    double stress_scale() const { return S_; }
    // Material at the current parameter values, scaled back to physical units.
    MaterialParams physical_material() const;

    Tape& tape() { return t_; }

private:
    void build(const FieldModel* model, const FieldEmitter* fields);
    void bind_columns(const Dataset& data);
    void sweep_point(std::size_t r);

    Tape t_;
    LossOptions opts_;
    MaterialParams mat_;
    NormalizationRecord rec_;
    double S_ = 1.0;

    NodeId x_ = kNoNode, y_ = kNoNode, mu_in_ = kNoNode;
    NodeId fx_ = kNoNode, fy_ = kNoNode;
    NodeId lambda_node_ = kNoNode, mu_node_ = kNoNode, sigma_y_node_ = kNoNode;
    NodeId first_dynamic_ = kNoNode;
    NodeId point_loss_ = kNoNode;

    std::vector<NodeId> weight_nodes_;   // flatten order
    std::vector<NodeId> theta_nodes_;    // weights + trainable material
    int lambda_index_ = -1, mu_index_ = -1, sigma_y_index_ = -1;

    std::vector<std::string> names_;     // term names, report order
    std::vector<NodeId> residuals_;      // parallel to names_

    std::vector<std::string> obs_fields_;  // observed columns in report order
    std::vector<NodeId> obs_nodes_;

    // per-call binding plan: variable node, source column, multiplier
    struct Bind {
        NodeId var;
        const std::vector<double>* column;
        double factor;
    };
    std::vector<Bind> binds_;
};

// One-shot conveniences: build a program against the batch's own
// normalization record and report the loss.
LossReport elastic_loss(const FieldModel& model, const MaterialParams& params,
                        const Dataset& batch);
LossReport plasticity_loss(const FieldModel& model, const MaterialParams& params,
                           const Dataset& batch);

}  // namespace elastinet
