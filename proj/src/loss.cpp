#include "elastinet/loss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "elastinet/analytic.hpp"
#include "elastinet/plasticity.hpp"
#include "elastinet/util.hpp"

namespace elastinet {

double LossReport::term(const std::string& name) const {
    for (const auto& [n, v] : terms)
        if (n == name) return v;
    raise("unknown loss term '" + name + "'");
}

FieldEmitter exact_field_emitter(double lambda, double mu, double Q) {
    return [lambda, mu, Q](Tape& t, const std::vector<NodeId>& in) {
        const auto f = emit_exact_fields(t, in[0], in[1], lambda, mu, Q);
        return std::map<std::string, NodeId>{
            {"ux", f[0]}, {"uy", f[1]}, {"sxx", f[2]}, {"syy", f[3]}, {"sxy", f[4]}};
    };
}

FieldEmitter homogeneous_state_emitter(double exx, double eyy, double exy,
                                       const std::array<double, 4>& sig,
                                       const NormalizationRecord& record) {
    return [=](Tape& t, const std::vector<NodeId>& in) {
        const Expr x(t, in[0]), y(t, in[1]);
        const double kux = record.scale_for("ux"), kuy = record.scale_for("uy");
        std::map<std::string, NodeId> out;
        out["ux"] = ((exx / kux) * x + (exy / kux) * y).id;
        out["uy"] = ((exy / kuy) * x + (eyy / kuy) * y).id;
        out["sxx"] = t.constant(sig[0] / record.scale_for("sxx"));
        out["syy"] = t.constant(sig[1] / record.scale_for("syy"));
        out["szz"] = t.constant(sig[2] / record.scale_for("szz"));
        out["sxy"] = t.constant(sig[3] / record.scale_for("sxy"));
        return out;
    };
}

LossProgram::LossProgram(const FieldModel& model, const MaterialParams& material,
                         const NormalizationRecord& record, LossOptions options)
    : opts_(options), mat_(material), rec_(record) {
    build(&model, nullptr);
}

LossProgram::LossProgram(const FieldEmitter& fields, const MaterialParams& material,
                         const NormalizationRecord& record, LossOptions options)
    : opts_(options), mat_(material), rec_(record) {
    build(nullptr, &fields);
}

void LossProgram::build(const FieldModel* model, const FieldEmitter* fields) {
    mat_.validate();
    const bool plastic = opts_.problem == ProblemKind::Plastic;
    if (plastic && !mat_.sigma_y) raise("plasticity loss requires sigma_y");
    if (opts_.surrogate_mu && mat_.mu_trainable) raise("mu cannot be trainable in surrogate mode");
    S_ = rec_.stress_scale();

    obs_fields_ = plastic ? std::vector<std::string>{"ux", "uy", "sxx", "syy", "szz", "sxy"}
                          : std::vector<std::string>{"ux", "uy", "sxx", "syy", "sxy"};

    if (model) {
        for (const std::string& f : obs_fields_)
            if (std::find(model->fields.begin(), model->fields.end(), f) == model->fields.end())
                raise("model must provide field '" + f + "'");
        for (const std::string& f : model->fields)
            if (std::find(obs_fields_.begin(), obs_fields_.end(), f) == obs_fields_.end())
                raise("model has unexpected field '" + f + "'");
        const std::size_t want_inputs = opts_.surrogate_mu ? 3 : 2;
        if (model->inputs.size() != want_inputs)
            raise("model takes " + std::to_string(model->inputs.size()) + " inputs, expected " +
                  std::to_string(want_inputs));
    }

    // ---- static region: nodes whose adjoints accumulate across a batch ----
    if (mat_.lambda_trainable) {
        lambda_node_ = t_.variable("lambda");
        t_.set_value(lambda_node_, mat_.lambda / S_);
    }
    if (mat_.mu_trainable && !opts_.surrogate_mu) {
        mu_node_ = t_.variable("mu");
        t_.set_value(mu_node_, mat_.mu / S_);
    }
    if (plastic && mat_.sigma_y_trainable) {
        sigma_y_node_ = t_.variable("sigma_y");
        t_.set_value(sigma_y_node_, *mat_.sigma_y / S_);
    }
    if (model) {
        // Pre-create the weight variables so they sit below the per-point
        // region; emit() will find and rebind them.
        const auto reserve = [this](const DenseNetwork& net, const std::string& prefix) {
            for (const std::string& n : net.parameter_names(prefix))
                weight_nodes_.push_back(t_.variable(n));
        };
        if (model->independent())
            for (std::size_t i = 0; i < model->fields.size(); ++i)
                reserve(model->nets[i], model->fields[i] + "_");
        else
            reserve(model->nets[0], "net_");
    }

    // ---- per-point region: rebound every point, adjoints zeroed per point --
    x_ = t_.variable("x");
    first_dynamic_ = x_;
    y_ = t_.variable("y");
    std::vector<NodeId> inputs = {x_, y_};
    if (opts_.surrogate_mu) {
        mu_in_ = t_.variable("mu");
        inputs.push_back(mu_in_);
    }
    for (const std::string& f : obs_fields_) obs_nodes_.push_back(t_.variable("obs_" + f));
    fx_ = t_.variable("fstar_x");
    fy_ = t_.variable("fstar_y");

    if (lambda_node_ == kNoNode) lambda_node_ = t_.constant(mat_.lambda / S_);
    if (mu_node_ == kNoNode)
        mu_node_ = opts_.surrogate_mu ? t_.mul(mu_in_, t_.constant(1.0 / S_))
                                      : t_.constant(mat_.mu / S_);
    if (plastic && sigma_y_node_ == kNoNode) sigma_y_node_ = t_.constant(*mat_.sigma_y / S_);

    // ---- fields ------------------------------------------------------------
    std::map<std::string, NodeId> out;
    if (model) {
        if (model->independent()) {
            for (std::size_t i = 0; i < model->fields.size(); ++i)
                out[model->fields[i]] =
                    model->nets[i].emit(t_, inputs, model->fields[i] + "_").outputs[0];
        } else {
            const auto em = model->nets[0].emit(t_, inputs, "net_");
            for (std::size_t i = 0; i < model->fields.size(); ++i)
                out[model->fields[i]] = em.outputs[i];
        }
    } else {
        out = (*fields)(t_, inputs);
        for (const std::string& f : obs_fields_)
            if (!out.count(f)) raise("field emitter is missing '" + f + "'");
    }

    // ---- residuals ----------------------------------------------------------
    const auto E = [this](NodeId n) { return Expr(t_, n); };
    const double kux = rec_.scale_for("ux"), kuy = rec_.scale_for("uy");
    const double ksxx = rec_.scale_for("sxx") / S_, ksyy = rec_.scale_for("syy") / S_;
    const double ksxy = rec_.scale_for("sxy") / S_, kszz = rec_.scale_for("szz") / S_;
    const Expr lam = E(lambda_node_), mu = E(mu_node_);

    for (std::size_t i = 0; i < obs_fields_.size(); ++i) {
        names_.push_back("data_" + obs_fields_[i]);
        residuals_.push_back(t_.sub(out.at(obs_fields_[i]), obs_nodes_[i]));
    }

    const NodeId dux_dx = t_.input_derivative(out.at("ux"), "x");
    const NodeId dux_dy = t_.input_derivative(out.at("ux"), "y");
    const NodeId duy_dx = t_.input_derivative(out.at("uy"), "x");
    const NodeId duy_dy = t_.input_derivative(out.at("uy"), "y");
    const NodeId dsxx_dx = t_.input_derivative(out.at("sxx"), "x");
    const NodeId dsyy_dy = t_.input_derivative(out.at("syy"), "y");
    const NodeId dsxy_dx = t_.input_derivative(out.at("sxy"), "x");
    const NodeId dsxy_dy = t_.input_derivative(out.at("sxy"), "y");

    // physical strains from normalized displacement outputs
    const Expr exx = kux * E(dux_dx);
    const Expr eyy = kuy * E(duy_dy);
    const Expr exy = 0.5 * (kux * E(dux_dy) + kuy * E(duy_dx));

    // momentum balance sigma_ij,j + f_i*, physical residual divided by S
    names_.push_back("momentum_x");
    residuals_.push_back((ksxx * E(dsxx_dx) + ksxy * E(dsxy_dy) + E(fx_)).id);
    names_.push_back("momentum_y");
    residuals_.push_back((ksxy * E(dsxy_dx) + ksyy * E(dsyy_dy) + E(fy_)).id);

    if (!plastic) {
        names_.push_back("constitutive_xx");
        residuals_.push_back(((lam + 2.0 * mu) * exx + lam * eyy - ksxx * E(out.at("sxx"))).id);
        names_.push_back("constitutive_yy");
        residuals_.push_back(((lam + 2.0 * mu) * eyy + lam * exx - ksyy * E(out.at("syy"))).id);
        names_.push_back("constitutive_xy");
        residuals_.push_back((2.0 * mu * exy - ksxy * E(out.at("sxy"))).id);
    } else {
        const std::array<NodeId, 4> sig = {(ksxx * E(out.at("sxx"))).id,
                                           (ksyy * E(out.at("syy"))).id,
                                           (kszz * E(out.at("szz"))).id,
                                           (ksxy * E(out.at("sxy"))).id};
        const auto s = deviatoric(t_, sig);
        const NodeId q = equivalent_stress(t_, s);

        const std::array<NodeId, 4> eps = {exx.id, eyy.id, t_.constant(0.0), exy.id};
        const auto e = deviatoric(t_, eps);
        const NodeId ebar = equivalent_strain(t_, e);

        // plastic multiplier implied by the networks through e - s / (2 mu)
        const Expr inv2mu = E(t_.pow(t_.mul(t_.constant(2.0), mu_node_), -1.0));
        std::array<NodeId, 4> ep_net;
        for (int i = 0; i < 4; ++i) ep_net[i] = (E(e[i]) - E(s[i]) * inv2mu).id;
        const NodeId ebar_p = equivalent_strain(t_, ep_net);

        const double q_min = 1e-8 * (*mat_.sigma_y / S_);
        const auto dir = guarded_flow_direction(t_, s, q, q_min);

        const Expr K = lam + (2.0 / 3.0) * mu;
        const Expr treps = exx + eyy;
        const char* comp[4] = {"xx", "yy", "zz", "xy"};
        for (int i = 0; i < 4; ++i) {
            const Expr ep = E(ebar_p) * (opts_.flow_coefficient * E(dir[i]));
            Expr r = 2.0 * mu * (E(e[i]) - ep) - E(sig[i]);
            if (i < 3) r = K * treps + r;
            names_.push_back(std::string("constitutive_") + comp[i]);
            residuals_.push_back(r.id);
        }

        NodeId gap = plastic_multiplier_formula(t_, ebar, sigma_y_node_, mu_node_);
        if (opts_.clipped_consistency) gap = t_.relu(gap);
        names_.push_back("consistency");
        residuals_.push_back(t_.sub(gap, ebar_p));

        const NodeId F = t_.sub(q, sigma_y_node_);
        const auto kkt = kkt_penalties(t_, ebar_p, F);
        names_.push_back("kkt_positivity");
        residuals_.push_back(kkt[0]);
        names_.push_back("kkt_negativity");
        residuals_.push_back(kkt[1]);
        names_.push_back("kkt_complementarity");
        residuals_.push_back(kkt[2]);
    }

    NodeId acc = t_.square(residuals_[0]);
    for (std::size_t k = 1; k < residuals_.size(); ++k)
        acc = t_.fma(residuals_[k], residuals_[k], acc);
    point_loss_ = acc;
    t_.mark_output("point_loss", point_loss_);

    theta_nodes_ = weight_nodes_;
    if (mat_.lambda_trainable) {
        lambda_index_ = static_cast<int>(theta_nodes_.size());
        theta_nodes_.push_back(lambda_node_);
    }
    if (mat_.mu_trainable && !opts_.surrogate_mu) {
        mu_index_ = static_cast<int>(theta_nodes_.size());
        theta_nodes_.push_back(mu_node_);
    }
    if (plastic && mat_.sigma_y_trainable) {
        sigma_y_index_ = static_cast<int>(theta_nodes_.size());
        theta_nodes_.push_back(sigma_y_node_);
    }
}

void LossProgram::bind_columns(const Dataset& data) {
    if (data.normalization.scales != rec_.scales)
        raise("dataset normalization does not match the loss program");
    binds_.clear();
    const auto need = [&data](const std::string& c) -> const std::vector<double>* {
        if (!data.has(c)) raise("missing column '" + c + "'");
        return &data.col(c);
    };
    binds_.push_back({x_, need("x"), 1.0});
    binds_.push_back({y_, need("y"), 1.0});
    if (opts_.surrogate_mu) binds_.push_back({mu_in_, need("mu"), 1.0});
    for (std::size_t i = 0; i < obs_fields_.size(); ++i)
        binds_.push_back({obs_nodes_[i], need(obs_fields_[i]), 1.0});
    // forces enter the momentum residual in physical units divided by S
    binds_.push_back({fx_, need("fx"), rec_.scale_for("fx") / S_});
    binds_.push_back({fy_, need("fy"), rec_.scale_for("fy") / S_});
}

void LossProgram::sweep_point(std::size_t r) {
    for (const Bind& b : binds_) t_.set_value(b.var, (*b.column)[r] * b.factor);
    t_.forward_from(first_dynamic_);
}

LossReport LossProgram::evaluate(const Dataset& data) {
    std::vector<std::size_t> rows(data.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return evaluate(data, rows);
}

LossReport LossProgram::evaluate(const Dataset& data, std::span<const std::size_t> rows) {
    if (rows.empty()) raise("empty batch");
    bind_columns(data);
    std::vector<double> sums(residuals_.size(), 0.0);
    for (const std::size_t r : rows) {
        sweep_point(r);
        if (!std::isfinite(t_.value(point_loss_)))
            raise("non-finite loss at data row " + std::to_string(r),
                  t_.find_nonfinite(point_loss_));
        for (std::size_t k = 0; k < residuals_.size(); ++k) {
            const double v = t_.value(residuals_[k]);
            sums[k] += v * v;
        }
    }
    LossReport rep;
    for (std::size_t k = 0; k < names_.size(); ++k) {
        rep.terms.emplace_back(names_[k], sums[k] / static_cast<double>(rows.size()));
        rep.total += rep.terms.back().second;
    }
    return rep;
}

double LossProgram::batch_gradient(const Dataset& data, std::span<const std::size_t> rows,
                                   std::vector<double>& grad) {
    if (rows.empty()) raise("empty batch");
    bind_columns(data);
    t_.zero_adjoints(0, t_.size());
    double sum = 0.0;
    for (const std::size_t r : rows) {
        sweep_point(r);
        const double v = t_.value(point_loss_);
        if (!std::isfinite(v))
            raise("non-finite loss at data row " + std::to_string(r),
                  t_.find_nonfinite(point_loss_));
        sum += v;
        t_.zero_adjoints(first_dynamic_, t_.size());
        t_.seed_adjoint(point_loss_, 1.0);
        t_.reverse(point_loss_);
    }
    const double inv = 1.0 / static_cast<double>(rows.size());
    grad.assign(theta_nodes_.size(), 0.0);
    for (std::size_t k = 0; k < theta_nodes_.size(); ++k)
        grad[k] = t_.adjoint(theta_nodes_[k]) * inv;
    t_.zero_adjoints(0, first_dynamic_);
    return sum * inv;
}

std::vector<double> LossProgram::parameters() const {
    std::vector<double> theta(theta_nodes_.size());
    for (std::size_t k = 0; k < theta_nodes_.size(); ++k) theta[k] = t_.value(theta_nodes_[k]);
    return theta;
}

void LossProgram::set_parameters(std::span<const double> theta) {
    if (theta.size() != theta_nodes_.size())
        raise("expected " + std::to_string(theta_nodes_.size()) + " parameters, got " +
              std::to_string(theta.size()));
    for (std::size_t k = 0; k < theta_nodes_.size(); ++k) t_.set_value(theta_nodes_[k], theta[k]);
}

const std::string& LossProgram::parameter_name(std::size_t i) const {
    return t_.variable_name(theta_nodes_.at(i));
}

MaterialParams LossProgram::physical_material() const {
    MaterialParams m = mat_;
    if (lambda_index_ >= 0) m.lambda = t_.value(lambda_node_) * S_;
    if (mu_index_ >= 0) m.mu = t_.value(mu_node_) * S_;
    if (sigma_y_index_ >= 0) m.sigma_y = t_.value(sigma_y_node_) * S_;
    return m;
}

LossReport elastic_loss(const FieldModel& model, const MaterialParams& params,
                        const Dataset& batch) {
    LossOptions opts;
    opts.problem = ProblemKind::Elastic;
    opts.surrogate_mu = model.inputs.size() == 3;
    LossProgram prog(model, params, batch.normalization, opts);
    return prog.evaluate(batch);
}

LossReport plasticity_loss(const FieldModel& model, const MaterialParams& params,
                           const Dataset& batch) {
    LossOptions opts;
    opts.problem = ProblemKind::Plastic;
    opts.surrogate_mu = model.inputs.size() == 3;
    LossProgram prog(model, params, batch.normalization, opts);
    return prog.evaluate(batch);
}

}  // namespace elastinet
