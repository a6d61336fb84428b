#include "elastinet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "elastinet/util.hpp"

namespace elastinet {

namespace {

using json = nlohmann::json;

std::string widths_string(const std::vector<int>& w) {
    std::string s = "[";
    for (std::size_t i = 0; i < w.size(); ++i) s += (i ? ", " : "") + std::to_string(w[i]);
    return s + "]";
}

const char* mode_name(NetworkArch::Mode m) {
    return m == NetworkArch::Mode::Independent ? "independent" : "shared";
}

NetworkArch::Mode mode_from_string(const std::string& s) {
    if (s == "independent") return NetworkArch::Mode::Independent;
    if (s == "shared") return NetworkArch::Mode::SingleShared;
    raise("unknown network mode '" + s + "'");
}

std::vector<std::string> fields_for(const Dataset& data) {
    return data.problem == ProblemKind::Plastic
               ? std::vector<std::string>{"ux", "uy", "sxx", "syy", "szz", "sxy"}
               : std::vector<std::string>{"ux", "uy", "sxx", "syy", "sxy"};
}

// The mode decides which material values train; the dataset decides which
// exist. Surrogate models read mu per point, so it can never be trainable.
MaterialParams effective_material(MaterialParams mat, const TrainingConfig& cfg,
                                  const Dataset& data, bool surrogate) {
    if (cfg.mode == TrainMode::Identify) {
        mat.lambda_trainable = true;
        mat.mu_trainable = !surrogate;
        mat.sigma_y_trainable = data.problem == ProblemKind::Plastic && mat.sigma_y.has_value();
    } else {
        mat.lambda_trainable = mat.mu_trainable = mat.sigma_y_trainable = false;
    }
    return mat;
}

LossOptions loss_options(const TrainingConfig& cfg, const Dataset& data, bool surrogate) {
    LossOptions opts;
    opts.problem = data.problem;
    opts.surrogate_mu = surrogate;
    opts.flow_coefficient = cfg.flow_coefficient;
    opts.clipped_consistency = cfg.clipped_consistency;
    return opts;
}

// The core loop shared by train/retrain/train_surrogate. `model` and `mat`
// arrive ready (weights initialized, trainable flags resolved).
TrainResult run_training(FieldModel model, const MaterialParams& mat, const Dataset& data,
                         const TrainingConfig& cfg, AdamState adam) {
    LossProgram prog(model, mat, data.normalization, loss_options(cfg, data, model.inputs.size() == 3));

    std::vector<double> theta = prog.parameters();
    if (adam.m.size() != theta.size()) {
        adam.m.assign(theta.size(), 0.0);
        adam.v.assign(theta.size(), 0.0);
        adam.t = 0;
    }
    std::vector<std::string> names(theta.size());
    for (std::size_t i = 0; i < names.size(); ++i) names[i] = prog.parameter_name(i);

    std::vector<std::size_t> order(data.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::vector<std::size_t> all = order;

    TrainingHistory hist;
    hist.term_names = prog.term_names();
    hist.initial_loss = prog.evaluate(data, all).total;

    double best_loss = hist.initial_loss;
    int best_epoch = 0;
    std::vector<double> best_theta = theta;
    AdamState best_adam = adam;

    Rng rng(cfg.seed);
    std::vector<double> grad;
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        rng.shuffle(order);

        try {
            int batch_index = 0;
            for (std::size_t off = 0; off < order.size(); off += cfg.batch_size) {
                ++batch_index;
                hist.abort_batch = batch_index;  // overwritten below on success
                const std::size_t len =
                    std::min<std::size_t>(cfg.batch_size, order.size() - off);
                prog.batch_gradient(data, {order.data() + off, len}, grad);
                adam_step(theta, grad, adam, cfg, names);
                prog.set_parameters(theta);
            }
            hist.abort_batch = 0;  // the full-dataset pass is not a batch

            const LossReport rep = prog.evaluate(data, all);

            EpochRecord rec;
            rec.epoch = epoch;
            rec.total_loss = rep.total;
            if (epoch == 1 || epoch % 10 == 0) {
                rec.terms.reserve(rep.terms.size());
                for (const auto& [name, v] : rep.terms) rec.terms.push_back(v);
            }
            const MaterialParams pm = prog.physical_material();
            rec.lambda = pm.lambda;
            rec.mu = pm.mu;
            rec.sigma_y = pm.sigma_y;
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            hist.epochs.push_back(rec);

            if (rep.total < best_loss) {
                best_loss = rep.total;
                best_epoch = epoch;
                best_theta = theta;
                best_adam = adam;
                since_best = 0;
            } else if (++since_best >= cfg.patience) {
                break;
            }
        } catch (const Error& e) {
            hist.abort_reason = e.what();
            hist.abort_epoch = epoch;
            break;
        }
    }
    hist.abort_epoch = hist.abort_reason.empty() ? 0 : hist.abort_epoch;
    if (hist.abort_reason.empty()) hist.abort_batch = 0;

    // give the last epoch its term breakdown if it fell off the 10-grid
    if (hist.abort_reason.empty() && !hist.epochs.empty() && hist.epochs.back().terms.empty()) {
        const LossReport rep = prog.evaluate(data, all);
        for (const auto& [name, v] : rep.terms) hist.epochs.back().terms.push_back(v);
    }

    hist.best_epoch = best_epoch;
    hist.best_loss = best_loss;

    prog.set_parameters(best_theta);
    model.unflatten(std::vector<double>(best_theta.begin(),
                                        best_theta.begin() + prog.weight_count()));

    Checkpoint best;
    best.model = std::move(model);
    best.material = prog.physical_material();
    best.normalization = data.normalization;
    best.adam = std::move(best_adam);
    best.seed = cfg.seed;
    return {std::move(hist), std::move(best)};
}

json arch_json(const FieldModel& m) {
    return json{{"layers", m.arch.layers},
                {"neurons", m.arch.neurons},
                {"activation", activation_name(m.arch.activation)},
                {"mode", mode_name(m.arch.mode)},
                {"inputs", m.inputs},
                {"fields", m.fields}};
}

}  // namespace

TrainMode train_mode_from_string(const std::string& s) {
    if (s == "solve") return TrainMode::Solve;
    if (s == "identify") return TrainMode::Identify;
    raise("unknown training mode '" + s + "'");
}

const char* train_mode_name(TrainMode m) {
    return m == TrainMode::Solve ? "solve" : "identify";
}

void TrainingConfig::validate() const {
    if (batch_size < 1) raise("batch_size must be at least 1");
    if (max_epochs < 1) raise("max_epochs must be at least 1");
    if (patience < 1 || patience > max_epochs) raise("patience must lie in [1, max_epochs]");
    if (!(learning_rate >= 0.0)) raise("learning_rate must be non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        raise("Adam betas must lie in [0, 1)");
    if (!(epsilon > 0.0)) raise("Adam epsilon must be positive");
}

void adam_step(std::vector<double>& theta, const std::vector<double>& grad, AdamState& state,
               const TrainingConfig& cfg, const std::vector<std::string>& names) {
    if (grad.size() != theta.size() || state.m.size() != theta.size() ||
        state.v.size() != theta.size())
        raise("adam_step size mismatch");
    for (std::size_t i = 0; i < grad.size(); ++i)
        if (!std::isfinite(grad[i]))
            raise("non-finite gradient for parameter " +
                  (i < names.size() ? "'" + names[i] + "'" : "#" + std::to_string(i)));

    ++state.t;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        theta[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
    }
}

TrainResult train(FieldModel model, MaterialParams material, const Dataset& data,
                  const TrainingConfig& cfg) {
    cfg.validate();
    const bool surrogate = model.inputs.size() == 3;
    return run_training(std::move(model), effective_material(material, cfg, data, surrogate), data,
                        cfg, AdamState{});
}

TrainResult retrain(const Checkpoint& ckpt, const Dataset& data, const TrainingConfig& cfg,
                    const std::optional<NetworkArch>& expected) {
    cfg.validate();
    if (expected) {
        const auto& a = ckpt.model.arch;
        if (expected->layers != a.layers || expected->neurons != a.neurons ||
            expected->activation != a.activation || expected->mode != a.mode) {
            std::vector<int> want = {static_cast<int>(ckpt.model.inputs.size())};
            for (int l = 1; l < expected->layers; ++l) want.push_back(expected->neurons);
            want.push_back(ckpt.model.nets.front().widths.back());
            raise("architecture mismatch: checkpoint layers " +
                  widths_string(ckpt.model.nets.front().widths) + " (" +
                  activation_name(a.activation) + "), requested " + widths_string(want) + " (" +
                  activation_name(expected->activation) + ")");
        }
    }

    Dataset d = data;
    if (d.normalization.empty() && !ckpt.normalization.empty())
        d = apply_normalization(d, ckpt.normalization);
    else if (d.normalization.scales != ckpt.normalization.scales)
        raise("dataset normalization does not match the checkpoint");

    const bool surrogate = ckpt.model.inputs.size() == 3;
    const MaterialParams mat = effective_material(ckpt.material, cfg, d, surrogate);

    // scratch comparator: same architecture and material, fresh weights
    const FieldModel scratch =
        build_field_model(ckpt.model.fields, ckpt.model.arch, ckpt.model.inputs, cfg.seed);
    const LossOptions opts = loss_options(cfg, d, surrogate);
    const double init_ckpt = LossProgram(ckpt.model, mat, d.normalization, opts).evaluate(d).total;
    const double init_scratch = LossProgram(scratch, mat, d.normalization, opts).evaluate(d).total;

    AdamState adam;
    if (ckpt.adam) adam = *ckpt.adam;
    TrainResult out = run_training(ckpt.model, mat, d, cfg, std::move(adam));
    out.history.initial_loss_ratio = init_ckpt / init_scratch;
    return out;
}

TrainResult train_surrogate(const std::vector<Dataset>& parts, const NetworkArch& arch,
                            MaterialParams material, const TrainingConfig& cfg) {
    cfg.validate();
    if (cfg.mode == TrainMode::Identify)
        raise("surrogate training does not support identification");

    std::set<double> mus;
    for (const Dataset& p : parts)
        if (p.mu) mus.insert(*p.mu);
    if (mus.size() < 2) raise("surrogate training requires at least two distinct mu values");

    const Dataset combined = make_surrogate_dataset(parts);
    if (combined.problem != ProblemKind::Elastic)
        raise("surrogate training supports elastic datasets only");
    auto [ds, rec] = normalize(combined);

    FieldModel model = build_field_model(fields_for(ds), arch, {"x", "y", "mu"}, cfg.seed);
    material.lambda_trainable = material.mu_trainable = material.sigma_y_trainable = false;
    return run_training(std::move(model), material, ds, cfg, AdamState{});
}

void save_checkpoint(const Checkpoint& c, const std::string& path) {
    json j;
    j["version"] = c.version;
    j["arch"] = arch_json(c.model);
    json fields = json::object();
    for (std::size_t i = 0; i < c.model.nets.size(); ++i) {
        const DenseNetwork& n = c.model.nets[i];
        const std::string key = c.model.independent() ? c.model.fields[i] : "net";
        fields[key] = json{{"widths", n.widths}, {"W", n.W}, {"b", n.b}};
    }
    j["fields"] = std::move(fields);
    json trainable = json::array();
    if (c.material.lambda_trainable) trainable.push_back("lambda");
    if (c.material.mu_trainable) trainable.push_back("mu");
    if (c.material.sigma_y_trainable) trainable.push_back("sigma_y");
    j["material"] = json{{"lambda", c.material.lambda},
                         {"mu", c.material.mu},
                         {"sigma_y", c.material.sigma_y ? json(*c.material.sigma_y) : json()},
                         {"trainable", std::move(trainable)}};
    j["normalization"] = json::object();
    for (const auto& [col, scale] : c.normalization.scales) j["normalization"][col] = scale;
    if (c.adam) j["adam"] = json{{"m", c.adam->m}, {"v", c.adam->v}, {"t", c.adam->t}};
    j["seed"] = c.seed;

    std::ofstream out(path, std::ios::binary);
    if (!out) raise("cannot open '" + path + "'");
    out << j.dump(1) << "\n";
    if (!out) raise("cannot write '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise("cannot open '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const std::exception& e) {
        raise("invalid checkpoint in '" + path + "': " + e.what());
    }
    try {
        Checkpoint c;
        c.version = j.at("version").get<int>();
        if (c.version != 1)
            raise("unsupported checkpoint version " + std::to_string(c.version));

        const json& a = j.at("arch");
        c.model.arch.layers = a.at("layers").get<int>();
        c.model.arch.neurons = a.at("neurons").get<int>();
        c.model.arch.activation = activation_from_string(a.at("activation").get<std::string>());
        c.model.arch.mode = mode_from_string(a.at("mode").get<std::string>());
        c.model.inputs = a.at("inputs").get<std::vector<std::string>>();
        c.model.fields = a.at("fields").get<std::vector<std::string>>();

        const json& fields = j.at("fields");
        const bool independent = c.model.independent();
        const std::size_t n_nets = independent ? c.model.fields.size() : 1;
        for (std::size_t i = 0; i < n_nets; ++i) {
            const std::string key = independent ? c.model.fields[i] : "net";
            const json& f = fields.at(key);
            DenseNetwork net;
            net.widths = f.at("widths").get<std::vector<int>>();
            net.W = f.at("W").get<std::vector<std::vector<double>>>();
            net.b = f.at("b").get<std::vector<std::vector<double>>>();
            net.activations.assign(net.W.size(), c.model.arch.activation);
            if (!net.activations.empty()) net.activations.back() = Activation::Linear;
            c.model.nets.push_back(std::move(net));
        }

        const json& m = j.at("material");
        c.material.lambda = m.at("lambda").get<double>();
        c.material.mu = m.at("mu").get<double>();
        if (!m.at("sigma_y").is_null()) c.material.sigma_y = m.at("sigma_y").get<double>();
        for (const auto& t : m.at("trainable")) {
            const std::string name = t.get<std::string>();
            if (name == "lambda") c.material.lambda_trainable = true;
            else if (name == "mu") c.material.mu_trainable = true;
            else if (name == "sigma_y") c.material.sigma_y_trainable = true;
            else raise("unknown trainable entry '" + name + "'");
        }

        for (const auto& [col, scale] : j.at("normalization").items())
            c.normalization.scales[col] = scale.get<double>();
        if (j.contains("adam") && !j.at("adam").is_null()) {
            AdamState s;
            s.m = j.at("adam").at("m").get<std::vector<double>>();
            s.v = j.at("adam").at("v").get<std::vector<double>>();
            s.t = j.at("adam").at("t").get<long long>();
            c.adam = std::move(s);
        }
        c.seed = j.at("seed").get<std::uint64_t>();
        return c;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        raise("invalid checkpoint in '" + path + "': " + e.what());
    }
}

std::string history_csv(const TrainingHistory& h) {
    std::ostringstream out;
    if (h.initial_loss_ratio)
        out << "# initial_loss_ratio = " << fmt17(*h.initial_loss_ratio) << "\n";
    out << "epoch,total_loss";
    for (const std::string& n : h.term_names) out << ",term_" << n;
    out << ",lambda,mu,sigma_y,seconds\n";
    for (const EpochRecord& r : h.epochs) {
        out << r.epoch << "," << fmt17(r.total_loss);
        if (r.terms.empty())
            for (std::size_t i = 0; i < h.term_names.size(); ++i) out << ",";
        else
            for (double v : r.terms) out << "," << fmt17(v);
        out << "," << fmt17(r.lambda) << "," << fmt17(r.mu) << ",";
        if (r.sigma_y) out << fmt17(*r.sigma_y);
        out << "," << fmt17(r.seconds) << "\n";
    }
    if (!h.abort_reason.empty())
        out << "# aborted at epoch " << h.abort_epoch << " batch " << h.abort_batch << ": "
            << h.abort_reason << "\n";
    return out.str();
}

void save_history(const TrainingHistory& h, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("cannot open '" + path + "'");
    out << history_csv(h);
    if (!out) raise("cannot write '" + path + "'");
}

}  // namespace elastinet
