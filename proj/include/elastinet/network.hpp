#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "elastinet/tape.hpp"

namespace elastinet {

enum class Activation { Tanh, Relu, Linear };

Activation activation_from_string(const std::string& s);
const char* activation_name(Activation a);

// Architecture knob set: `layers` counts affine transformations, so a 5x20
// network has 4 hidden tanh layers of width 20 plus a linear output layer.
struct NetworkArch {
    int layers = 5;
    int neurons = 20;
    Activation activation = Activation::Tanh;
    enum class Mode { Independent, SingleShared } mode = Mode::Independent;
};

struct EmittedNet {
    std::vector<NodeId> outputs;
    std::vector<NodeId> params;  // same order as flatten(); empty for constant emission
};

// Plain dense feed-forward network. Weights live here as numbers; emit()
// instantiates the forward pass on a tape, either with weights as named
// variables (trainable) or as baked-in constants (frozen evaluation).
struct DenseNetwork {
    std::vector<int> widths;                       // d_x, hidden..., d_y
    std::vector<std::vector<double>> W;            // per layer, row-major [out][in]
    std::vector<std::vector<double>> b;            // per layer
    std::vector<Activation> activations;           // per layer; last is Linear

    int d_x() const { return widths.front(); }
    int d_y() const { return widths.back(); }
    int layers() const { return static_cast<int>(W.size()); }
    std::size_t parameter_count() const;

    std::vector<double> flatten() const;
    void unflatten(std::span<const double> theta);

    // Forward pass on the tape. A nonempty var_prefix makes every weight and
    // bias a variable named "<prefix>W<l>_<i>_<j>" / "<prefix>b<l>_<i>" with
    // its current value bound; variables of those names that already exist on
    // the tape are reused (rebound), so callers may pre-create them to control
    // node-id layout.
    EmittedNet emit(Tape& t, const std::vector<NodeId>& inputs,
                    const std::string& var_prefix = "") const;

    // The variable names emit() uses, in flatten() order.
    std::vector<std::string> parameter_names(const std::string& prefix) const;

    // Plain double-precision forward pass (no tape), for fast field evaluation.
    std::vector<double> forward_values(std::span<const double> x) const;
};

DenseNetwork init_network(const NetworkArch& arch, int d_x, int d_y, std::uint64_t seed);

// Closed form the tests pin: L layers of width n between d_x inputs and d_y
// outputs (valid for L >= 2).
std::size_t dense_parameter_count(int layers, int neurons, int d_x, int d_y);

// One network per physical field (independent mode) or a single shared network
// with one output per field.
struct FieldModel {
    std::vector<std::string> fields;
    std::vector<std::string> inputs;  // x, y and optionally mu
    NetworkArch arch;
    std::vector<DenseNetwork> nets;

    bool independent() const { return arch.mode == NetworkArch::Mode::Independent; }
    std::size_t parameter_count() const;
    std::vector<double> flatten() const;
    void unflatten(std::span<const double> theta);

    // Field values at a point, one per entry of `fields`.
    std::vector<double> forward_values(std::span<const double> x) const;
};

FieldModel build_field_model(const std::vector<std::string>& fields, const NetworkArch& arch,
                             const std::vector<std::string>& inputs, std::uint64_t seed);

}  // namespace elastinet
