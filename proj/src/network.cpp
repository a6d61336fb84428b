#include "elastinet/network.hpp"

#include <cmath>

namespace elastinet {

Activation activation_from_string(const std::string& s) {
    if (s == "tanh") return Activation::Tanh;
    if (s == "relu") return Activation::Relu;
    if (s == "linear") return Activation::Linear;
    raise("unknown activation '" + s + "' (expected tanh, relu or linear)");
}

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Relu: return "relu";
        case Activation::Linear: return "linear";
    }
    return "?";
}

std::size_t DenseNetwork::parameter_count() const {
    std::size_t n = 0;
    for (int l = 0; l < layers(); ++l) n += W[l].size() + b[l].size();
    return n;
}

std::vector<double> DenseNetwork::flatten() const {
    std::vector<double> theta;
    theta.reserve(parameter_count());
    for (int l = 0; l < layers(); ++l) {
        theta.insert(theta.end(), W[l].begin(), W[l].end());
        theta.insert(theta.end(), b[l].begin(), b[l].end());
    }
    return theta;
}

void DenseNetwork::unflatten(std::span<const double> theta) {
    if (theta.size() != parameter_count())
        raise("unflatten: expected " + std::to_string(parameter_count()) + " parameters, got " +
              std::to_string(theta.size()));
    std::size_t k = 0;
    for (int l = 0; l < layers(); ++l) {
        for (auto& w : W[l]) w = theta[k++];
        for (auto& v : b[l]) v = theta[k++];
    }
}

EmittedNet DenseNetwork::emit(Tape& t, const std::vector<NodeId>& inputs,
                              const std::string& var_prefix) const {
    if (static_cast<int>(inputs.size()) != d_x())
        raise("forward: network expects " + std::to_string(d_x()) + " inputs, got " +
              std::to_string(inputs.size()));
    EmittedNet out;
    const bool trainable = !var_prefix.empty();
    const auto named_var = [&t](const std::string& name, double v) {
        NodeId n = t.find_variable(name);
        if (n == kNoNode) n = t.variable(name);
        t.set_value(n, v);
        return n;
    };

    std::vector<NodeId> z = inputs;
    for (int l = 0; l < layers(); ++l) {
        const int nin = widths[l], nout = widths[l + 1];
        std::vector<NodeId> next(nout);
        for (int i = 0; i < nout; ++i) {
            NodeId acc;
            if (trainable) {
                acc = named_var(var_prefix + "b" + std::to_string(l) + "_" + std::to_string(i),
                                b[l][static_cast<std::size_t>(i)]);
            } else {
                acc = t.constant(b[l][static_cast<std::size_t>(i)]);
            }
            for (int j = 0; j < nin; ++j) {
                const double wv = W[l][static_cast<std::size_t>(i * nin + j)];
                const NodeId wn =
                    trainable ? named_var(var_prefix + "W" + std::to_string(l) + "_" +
                                              std::to_string(i) + "_" + std::to_string(j),
                                          wv)
                              : t.constant(wv);
                acc = t.fma(wn, z[static_cast<std::size_t>(j)], acc);
            }
            switch (activations[static_cast<std::size_t>(l)]) {
                case Activation::Tanh: next[static_cast<std::size_t>(i)] = t.tanh(acc); break;
                case Activation::Relu: next[static_cast<std::size_t>(i)] = t.relu(acc); break;
                case Activation::Linear: next[static_cast<std::size_t>(i)] = acc; break;
            }
        }
        z = std::move(next);
    }
    out.outputs = std::move(z);

    if (trainable) {
        out.params.reserve(parameter_count());
        for (const std::string& name : parameter_names(var_prefix))
            out.params.push_back(t.find_variable(name));
    }
    return out;
}

std::vector<std::string> DenseNetwork::parameter_names(const std::string& prefix) const {
    // flatten() order: per layer all of W row-major, then b.
    std::vector<std::string> names;
    names.reserve(parameter_count());
    for (int l = 0; l < layers(); ++l) {
        for (int i = 0; i < widths[l + 1]; ++i)
            for (int j = 0; j < widths[l]; ++j)
                names.push_back(prefix + "W" + std::to_string(l) + "_" + std::to_string(i) + "_" +
                                std::to_string(j));
        for (int i = 0; i < widths[l + 1]; ++i)
            names.push_back(prefix + "b" + std::to_string(l) + "_" + std::to_string(i));
    }
    return names;
}

std::vector<double> DenseNetwork::forward_values(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != d_x())
        raise("forward: network expects " + std::to_string(d_x()) + " inputs, got " +
              std::to_string(x.size()));
    std::vector<double> z(x.begin(), x.end()), next;
    for (int l = 0; l < layers(); ++l) {
        const int nin = widths[l], nout = widths[l + 1];
        next.assign(static_cast<std::size_t>(nout), 0.0);
        for (int i = 0; i < nout; ++i) {
            double acc = b[l][static_cast<std::size_t>(i)];
            for (int j = 0; j < nin; ++j)
                acc += W[l][static_cast<std::size_t>(i * nin + j)] * z[static_cast<std::size_t>(j)];
            switch (activations[static_cast<std::size_t>(l)]) {
                case Activation::Tanh: acc = std::tanh(acc); break;
                case Activation::Relu: acc = acc > 0.0 ? acc : 0.0; break;
                case Activation::Linear: break;
            }
            next[static_cast<std::size_t>(i)] = acc;
        }
        z = next;
    }
    return z;
}

DenseNetwork init_network(const NetworkArch& arch, int d_x, int d_y, std::uint64_t seed) {
    if (arch.layers < 1) raise("init_network: layers must be >= 1");
    if (arch.neurons < 1) raise("init_network: neurons per layer must be >= 1");
    if (d_x < 1 || d_y < 1) raise("init_network: zero-width input or output layer");

    DenseNetwork net;
    net.widths.push_back(d_x);
    for (int l = 0; l < arch.layers - 1; ++l) net.widths.push_back(arch.neurons);
    net.widths.push_back(d_y);

    Rng rng(seed);
    for (int l = 0; l < arch.layers; ++l) {
        const int nin = net.widths[static_cast<std::size_t>(l)];
        const int nout = net.widths[static_cast<std::size_t>(l + 1)];
        const double bound = std::sqrt(6.0 / (nin + nout));  // Glorot uniform
        std::vector<double> w(static_cast<std::size_t>(nin) * static_cast<std::size_t>(nout));
        for (auto& v : w) v = rng.uniform(-bound, bound);
        net.W.push_back(std::move(w));
        net.b.emplace_back(static_cast<std::size_t>(nout), 0.0);
        net.activations.push_back(l == arch.layers - 1 ? Activation::Linear : arch.activation);
    }
    return net;
}

std::size_t dense_parameter_count(int layers, int neurons, int d_x, int d_y) {
    const auto L = static_cast<std::size_t>(layers), n = static_cast<std::size_t>(neurons);
    const auto dx = static_cast<std::size_t>(d_x), dy = static_cast<std::size_t>(d_y);
    return (dx * n + n) + (L - 2) * (n * n + n) + (n * dy + dy);
}

std::size_t FieldModel::parameter_count() const {
    std::size_t n = 0;
    for (const auto& net : nets) n += net.parameter_count();
    return n;
}

std::vector<double> FieldModel::flatten() const {
    std::vector<double> theta;
    theta.reserve(parameter_count());
    for (const auto& net : nets) {
        const auto part = net.flatten();
        theta.insert(theta.end(), part.begin(), part.end());
    }
    return theta;
}

void FieldModel::unflatten(std::span<const double> theta) {
    if (theta.size() != parameter_count())
        raise("unflatten: expected " + std::to_string(parameter_count()) + " parameters, got " +
              std::to_string(theta.size()));
    std::size_t off = 0;
    for (auto& net : nets) {
        net.unflatten(theta.subspan(off, net.parameter_count()));
        off += net.parameter_count();
    }
}

std::vector<double> FieldModel::forward_values(std::span<const double> x) const {
    std::vector<double> out;
    if (independent()) {
        out.reserve(fields.size());
        for (const auto& net : nets) out.push_back(net.forward_values(x)[0]);
    } else {
        out = nets[0].forward_values(x);
    }
    return out;
}

FieldModel build_field_model(const std::vector<std::string>& fields, const NetworkArch& arch,
                             const std::vector<std::string>& inputs, std::uint64_t seed) {
    if (fields.empty()) raise("build_field_model: empty field list");
    for (std::size_t i = 0; i < fields.size(); ++i)
        for (std::size_t j = i + 1; j < fields.size(); ++j)
            if (fields[i] == fields[j]) raise("build_field_model: duplicate field '" + fields[i] + "'");

    FieldModel model;
    model.fields = fields;
    model.inputs = inputs;
    model.arch = arch;
    const int d_x = static_cast<int>(inputs.size());
    if (arch.mode == NetworkArch::Mode::Independent) {
        for (std::size_t i = 0; i < fields.size(); ++i)
            model.nets.push_back(init_network(arch, d_x, 1, seed + i));
    } else {
        model.nets.push_back(init_network(arch, d_x, static_cast<int>(fields.size()), seed));
    }
    return model;
}

}  // namespace elastinet
