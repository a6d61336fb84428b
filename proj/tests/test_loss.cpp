#include <doctest.h>

#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "elastinet/analytic.hpp"
#include "elastinet/dataset.hpp"
#include "elastinet/loss.hpp"
#include "elastinet/util.hpp"
#include "support/fd.hpp"
#include "support/refnet.hpp"

using namespace elastinet;

namespace {

std::vector<std::size_t> all_rows(const Dataset& d) {
    std::vector<std::size_t> rows(d.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
}

testsupport::RefNet to_ref(const DenseNetwork& n) {
    testsupport::RefNet r;
    for (int l = 0; l < n.layers(); ++l) {
        const int out = n.widths[l + 1], in = n.widths[l];
        std::vector<std::vector<double>> Wl(out, std::vector<double>(in));
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) Wl[i][j] = n.W[l][i * in + j];
        r.weights.push_back(std::move(Wl));
        r.biases.push_back(n.b[l]);
        r.act.push_back(n.activations[l] == Activation::Tanh   ? 0
                        : n.activations[l] == Activation::Relu ? 1
                                                                : 2);
    }
    return r;
}

// Re-assembles every elastic loss term from scratch: dual-number forward
// passes through the reference net give values and x/y derivatives without
// touching the library's autodiff. Raw (unnormalized) batches only.
std::map<std::string, double> ref_elastic_terms(const FieldModel& model, double lambda_v,
                                                double mu_v, const Dataset& ds) {
    std::vector<testsupport::RefNet> nets;
    for (const auto& n : model.nets) nets.push_back(to_ref(n));
    const bool surrogate = model.inputs.size() == 3;
    const bool shared = !model.independent();
    const char* fields[5] = {"ux", "uy", "sxx", "syy", "sxy"};
    std::map<std::string, double> sums;
    for (std::size_t r = 0; r < ds.rows(); ++r) {
        std::vector<double> in = {ds.col("x")[r], ds.col("y")[r]};
        if (surrogate) in.push_back(ds.col("mu")[r]);
        const double mu_r = surrogate ? ds.col("mu")[r] : mu_v;

        double v[5], dx[5], dy[5];
        for (int s = 0; s < 2; ++s) {
            std::vector<testsupport::Dual> xs;
            for (std::size_t i = 0; i < in.size(); ++i)
                xs.push_back({in[i], i == static_cast<std::size_t>(s) ? 1.0 : 0.0});
            for (int f = 0; f < 5; ++f) {
                const auto out = testsupport::ref_forward(nets[shared ? 0 : f], xs);
                const auto& o = out[shared ? f : 0];
                v[f] = o.v;
                (s == 0 ? dx : dy)[f] = o.d;
            }
        }

        const double exx = dx[0], eyy = dy[1], exy = 0.5 * (dy[0] + dx[1]);
        double res[10];
        for (int f = 0; f < 5; ++f) res[f] = v[f] - ds.col(fields[f])[r];
        res[5] = dx[2] + dy[4] + ds.col("fx")[r];
        res[6] = dx[4] + dy[3] + ds.col("fy")[r];
        res[7] = (lambda_v + 2.0 * mu_r) * exx + lambda_v * eyy - v[2];
        res[8] = (lambda_v + 2.0 * mu_r) * eyy + lambda_v * exx - v[3];
        res[9] = 2.0 * mu_r * exy - v[4];

        const char* names[10] = {"data_ux",    "data_uy",         "data_sxx",
                                 "data_syy",   "data_sxy",        "momentum_x",
                                 "momentum_y", "constitutive_xx", "constitutive_yy",
                                 "constitutive_xy"};
        for (int k = 0; k < 10; ++k) sums[names[k]] += res[k] * res[k];
    }
    for (auto& [k, s] : sums) s /= static_cast<double>(ds.rows());
    return sums;
}

}  // namespace

TEST_CASE("exact manufactured fields annihilate the elastic loss") {
    const double lambda = 1.0, mu = 0.5, Q = 4.0;
    GridSpec spec;
    spec.n_x = 21;
    spec.n_y = 21;
    const Dataset ds = generate_elastic_dataset(spec, lambda, mu, Q, DataMode::Force);

    MaterialParams mat;
    mat.lambda = lambda;
    mat.mu = mu;
    LossProgram prog(exact_field_emitter(lambda, mu, Q), mat, {}, {});

    const std::vector<std::string> expected = {
        "data_ux",    "data_uy",    "data_sxx",        "data_syy",        "data_sxy",
        "momentum_x", "momentum_y", "constitutive_xx", "constitutive_yy", "constitutive_xy"};
    REQUIRE(prog.term_names() == expected);

    const auto rep = prog.evaluate(ds);
    for (const auto& [name, value] : rep.terms) {
        INFO(name);
        CHECK(value < 1e-20);
    }
    CHECK(rep.total < 1e-12);
}

TEST_CASE("all-zero networks: data terms are mean squared observations, momentum is mean squared force") {
    GridSpec spec;
    spec.n_x = 7;
    spec.n_y = 6;
    const Dataset ds = generate_elastic_dataset(spec, 1.0, 0.5, 4.0, DataMode::Force);

    auto model = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, NetworkArch{}, {"x", "y"}, 5);
    model.unflatten(std::vector<double>(model.parameter_count(), 0.0));

    MaterialParams mat;
    const auto rep = elastic_loss(model, mat, ds);

    auto mean_sq = [&ds](const std::string& c) {
        double s = 0.0;
        for (double v : ds.col(c)) s += v * v;
        return s / static_cast<double>(ds.rows());
    };
    for (const std::string& f : {"ux", "uy", "sxx", "syy", "sxy"})
        CHECK(rep.term("data_" + f) == doctest::Approx(mean_sq(f)).epsilon(1e-15));
    CHECK(rep.term("momentum_x") == doctest::Approx(mean_sq("fx")).epsilon(1e-15));
    CHECK(rep.term("momentum_y") == doctest::Approx(mean_sq("fy")).epsilon(1e-15));
    CHECK(rep.term("constitutive_xx") == 0.0);
    CHECK(rep.term("constitutive_yy") == 0.0);
    CHECK(rep.term("constitutive_xy") == 0.0);
}

TEST_CASE("elastic loss matches an independent dual-number reference assembly") {
    GridSpec spec;
    spec.n_x = 3;
    spec.n_y = 3;
    const double lambda = 1.0, mu = 0.5;
    const Dataset ds = generate_elastic_dataset(spec, lambda, mu, 4.0, DataMode::Force);
    MaterialParams mat;
    mat.lambda = lambda;
    mat.mu = mu;

    NetworkArch arch;
    arch.layers = 3;
    arch.neurons = 4;

    SUBCASE("independent tanh networks") {
        const auto model = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y"}, 42);
        const auto rep = elastic_loss(model, mat, ds);
        const auto want = ref_elastic_terms(model, lambda, mu, ds);
        double total = 0.0;
        for (const auto& [name, w] : want) {
            INFO(name);
            CHECK(rep.term(name) == doctest::Approx(w).epsilon(1e-12));
            total += w;
        }
        CHECK(rep.total == doctest::Approx(total).epsilon(1e-12));
    }

    SUBCASE("independent relu networks") {
        arch.activation = Activation::Relu;
        const auto model = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y"}, 43);
        const auto rep = elastic_loss(model, mat, ds);
        const auto want = ref_elastic_terms(model, lambda, mu, ds);
        for (const auto& [name, w] : want) {
            INFO(name);
            CHECK(rep.term(name) == doctest::Approx(w).epsilon(1e-12));
        }
    }

    SUBCASE("single shared network") {
        arch.mode = NetworkArch::Mode::SingleShared;
        const auto model = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y"}, 44);
        REQUIRE(model.nets.size() == 1);
        const auto rep = elastic_loss(model, mat, ds);
        const auto want = ref_elastic_terms(model, lambda, mu, ds);
        for (const auto& [name, w] : want) {
            INFO(name);
            CHECK(rep.term(name) == doctest::Approx(w).epsilon(1e-12));
        }
    }
}

TEST_CASE("material gradients vanish at the true moduli and not elsewhere") {
    const double lambda = 1.0, mu = 0.5, Q = 4.0;
    GridSpec spec;
    spec.n_x = 9;
    spec.n_y = 9;
    const Dataset ds = generate_elastic_dataset(spec, lambda, mu, Q, DataMode::Force);

    MaterialParams mat;
    mat.lambda = lambda;
    mat.mu = mu;
    mat.lambda_trainable = true;
    mat.mu_trainable = true;
    LossProgram prog(exact_field_emitter(lambda, mu, Q), mat, {}, {});
    REQUIRE(prog.parameter_count() == 2);
    REQUIRE(prog.lambda_index() == 0);
    REQUIRE(prog.mu_index() == 1);

    const auto rows = all_rows(ds);
    std::vector<double> grad;
    prog.batch_gradient(ds, rows, grad);
    CHECK(std::abs(grad[0]) < 1e-8);
    CHECK(std::abs(grad[1]) < 1e-8);

    // off the truth the constitutive terms pull the moduli back
    prog.set_parameters(std::vector<double>{1.3, 0.6});
    CHECK(prog.physical_material().lambda == doctest::Approx(1.3).epsilon(1e-15));
    CHECK(prog.physical_material().mu == doctest::Approx(0.6).epsilon(1e-15));
    const double mean_loss = prog.batch_gradient(ds, rows, grad);
    CHECK(std::abs(grad[0]) > 1e-3);
    CHECK(std::abs(grad[1]) > 1e-3);
    CHECK(mean_loss == doctest::Approx(prog.evaluate(ds, rows).total).epsilon(1e-13));

    // central differences over the two moduli agree with the adjoint sweep
    auto loss_at = [&](double l, double m) {
        prog.set_parameters(std::vector<double>{l, m});
        return prog.evaluate(ds, rows).total;
    };
    const double h = 1e-6;
    const double fd_l = (loss_at(1.3 + h, 0.6) - loss_at(1.3 - h, 0.6)) / (2.0 * h);
    const double fd_m = (loss_at(1.3, 0.6 + h) - loss_at(1.3, 0.6 - h)) / (2.0 * h);
    CHECK(testsupport::grad_close(grad[0], fd_l, 1e-6));
    CHECK(testsupport::grad_close(grad[1], fd_m, 1e-6));
}

TEST_CASE("shifting a displacement output bias moves only its data term") {
    GridSpec spec;
    spec.n_x = 4;
    spec.n_y = 4;
    const Dataset ds = generate_elastic_dataset(spec, 1.0, 0.5, 4.0, DataMode::Force);
    NetworkArch arch;
    arch.layers = 3;
    arch.neurons = 4;
    const auto model = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y"}, 11);

    MaterialParams mat;
    LossProgram prog(model, mat, {}, {});
    const auto before = prog.evaluate(ds);

    // last entry of the ux block is that network's output bias
    auto theta = prog.parameters();
    theta[model.nets[0].parameter_count() - 1] += 0.37;
    prog.set_parameters(theta);
    const auto after = prog.evaluate(ds);

    CHECK(after.term("data_ux") != before.term("data_ux"));
    // a constant shift has no effect on derivatives or on the other fields
    for (const auto& [name, v] : before.terms) {
        if (name == "data_ux") continue;
        INFO(name);
        CHECK(after.term(name) == v);
    }
}

TEST_CASE("constitutive residuals are linear in the moduli") {
    GridSpec spec;
    spec.n_x = 4;
    spec.n_y = 4;
    const Dataset ds = generate_elastic_dataset(spec, 1.0, 0.5, 4.0, DataMode::Force);
    NetworkArch arch;
    arch.layers = 3;
    arch.neurons = 4;
    auto model = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y"}, 23);

    // zero the three stress networks; constitutive residuals become pure
    // moduli-times-strain terms, so doubling (lambda, mu) doubles each one
    auto theta = model.flatten();
    const std::size_t block = model.nets[0].parameter_count();
    for (std::size_t i = 2 * block; i < 5 * block; ++i) theta[i] = 0.0;
    model.unflatten(theta);

    MaterialParams m1;
    m1.lambda = 1.0;
    m1.mu = 0.5;
    MaterialParams m2;
    m2.lambda = 2.0;
    m2.mu = 1.0;
    const auto r1 = elastic_loss(model, m1, ds);
    const auto r2 = elastic_loss(model, m2, ds);

    for (const std::string& c : {"xx", "yy", "xy"}) {
        INFO(c);
        CHECK(r2.term("constitutive_" + c) == 4.0 * r1.term("constitutive_" + c));
    }
    // everything without a modulus in it is untouched
    for (const std::string& n :
         {"data_ux", "data_uy", "data_sxx", "data_syy", "data_sxy", "momentum_x", "momentum_y"})
        CHECK(r2.term(n) == r1.term(n));
}

TEST_CASE("surrogate mode: mu is a per-point input") {
    GridSpec spec;
    spec.n_x = 4;
    spec.n_y = 3;
    const double lambda = 1.0;
    const Dataset a = generate_elastic_dataset(spec, lambda, 0.5, 4.0, DataMode::Force);
    const Dataset b = generate_elastic_dataset(spec, lambda, 2.0, 4.0, DataMode::Force);
    const Dataset ds = make_surrogate_dataset({a, b});
    REQUIRE(ds.has("mu"));

    NetworkArch arch;
    arch.layers = 3;
    arch.neurons = 4;
    const auto model =
        build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y", "mu"}, 31);

    MaterialParams mat;
    mat.lambda = lambda;
    const auto rep = elastic_loss(model, mat, ds);
    const auto want = ref_elastic_terms(model, lambda, 0.0 /* unused */, ds);
    for (const auto& [name, w] : want) {
        INFO(name);
        CHECK(rep.term(name) == doctest::Approx(w).epsilon(1e-12));
    }

    LossOptions sopts;
    sopts.surrogate_mu = true;

    MaterialParams bad = mat;
    bad.mu_trainable = true;
    CHECK_THROWS_WITH_AS(LossProgram(model, bad, {}, sopts),
                         "mu cannot be trainable in surrogate mode", Error);

    const auto planar = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y"}, 31);
    CHECK_THROWS_WITH_AS(LossProgram(planar, mat, {}, sopts), "model takes 2 inputs, expected 3",
                         Error);

    LossProgram prog(model, mat, {}, sopts);
    CHECK_THROWS_WITH_AS(prog.evaluate(a), "missing column 'mu'", Error);
}

TEST_CASE("batch gradient agrees with finite differences over every parameter") {
    GridSpec spec;
    spec.n_x = 3;
    spec.n_y = 3;
    const Dataset raw = generate_elastic_dataset(spec, 1.0, 0.5, 4.0, DataMode::Force);
    auto [ds, rec] = normalize(raw);

    NetworkArch arch;
    arch.layers = 2;
    arch.neurons = 3;
    const auto model = build_field_model({"ux", "uy", "sxx", "syy", "sxy"}, arch, {"x", "y"}, 77);

    MaterialParams mat;
    mat.lambda = 1.0;
    mat.mu = 0.5;
    mat.lambda_trainable = true;
    mat.mu_trainable = true;
    LossProgram prog(model, mat, rec, {});
    REQUIRE(prog.weight_count() == model.parameter_count());
    REQUIRE(prog.parameter_count() == model.parameter_count() + 2);

    const std::vector<std::size_t> rows = {0, 2, 5, 8};
    std::vector<double> grad;
    const double mean_loss = prog.batch_gradient(ds, rows, grad);
    CHECK(mean_loss == doctest::Approx(prog.evaluate(ds, rows).total).epsilon(1e-13));

    // the sweep is deterministic: same rows, bitwise-same gradient
    std::vector<double> again;
    prog.batch_gradient(ds, rows, again);
    REQUIRE(grad.size() == again.size());
    for (std::size_t i = 0; i < grad.size(); ++i) CHECK(grad[i] == again[i]);

    const auto theta0 = prog.parameters();
    auto loss_at = [&](std::vector<double> theta) {
        prog.set_parameters(theta);
        return prog.evaluate(ds, rows).total;
    };
    const double h = 1e-5;
    double diff2 = 0.0, ref2 = 0.0;
    for (std::size_t i = 0; i < theta0.size(); ++i) {
        auto tp = theta0, tm = theta0;
        tp[i] += h;
        tm[i] -= h;
        const double fd = (loss_at(tp) - loss_at(tm)) / (2.0 * h);
        INFO("parameter ", i);
        CHECK(testsupport::grad_close(grad[i], fd, 1e-5));
        diff2 += (grad[i] - fd) * (grad[i] - fd);
        ref2 += fd * fd;
    }
    CHECK(std::sqrt(diff2) < 5e-7 * std::max(1.0, std::sqrt(ref2)));
}

TEST_CASE("loss wiring errors") {
    GridSpec spec;
    spec.n_x = 4;
    spec.n_y = 4;
    const Dataset force = generate_elastic_dataset(spec, 1.0, 0.5, 4.0, DataMode::Force);
    const Dataset stress = generate_elastic_dataset(spec, 1.0, 0.5, 4.0, DataMode::Stress);
    MaterialParams mat;

    LossProgram prog(exact_field_emitter(1.0, 0.5, 4.0), mat, {}, {});
    const std::vector<std::size_t> none;
    CHECK_THROWS_WITH_AS(prog.evaluate(force, std::span<const std::size_t>(none)), "empty batch",
                         Error);
    std::vector<double> grad;
    CHECK_THROWS_WITH_AS(prog.batch_gradient(force, std::span<const std::size_t>(none), grad),
                         "empty batch", Error);

    // stress-complete batches must go through force derivation before the loss
    CHECK_THROWS_WITH_AS(prog.evaluate(stress), "missing column 'fx'", Error);

    // raw program, normalized batch (and vice versa)
    auto [norm, rec] = normalize(force);
    CHECK_THROWS_WITH_AS(prog.evaluate(norm), "dataset normalization does not match the loss program",
                         Error);
    LossProgram nprog(exact_field_emitter(1.0, 0.5, 4.0), mat, rec, {});
    CHECK_THROWS_WITH_AS(nprog.evaluate(force),
                         "dataset normalization does not match the loss program", Error);

    NetworkArch arch;
    arch.layers = 2;
    arch.neurons = 3;
    const auto incomplete = build_field_model({"ux", "uy", "sxx", "syy"}, arch, {"x", "y"}, 1);
    CHECK_THROWS_WITH_AS(LossProgram(incomplete, mat, {}, {}), "model must provide field 'sxy'",
                         Error);
    const auto extra =
        build_field_model({"ux", "uy", "sxx", "syy", "sxy", "szz"}, arch, {"x", "y"}, 1);
    CHECK_THROWS_WITH_AS(LossProgram(extra, mat, {}, {}), "model has unexpected field 'szz'",
                         Error);

    CHECK_THROWS_WITH_AS(prog.set_parameters(std::vector<double>{1.0, 2.0, 3.0}),
                         "expected 0 parameters, got 3", Error);
    const auto rep = prog.evaluate(force);
    CHECK_THROWS_WITH_AS(rep.term("bogus"), "unknown loss term 'bogus'", Error);
}

TEST_CASE("normalized assembly reproduces the raw physics") {
    const double lambda = 1.0, mu = 0.5, Q = 4.0;
    GridSpec spec;
    spec.n_x = 11;
    spec.n_y = 11;
    const Dataset raw = generate_elastic_dataset(spec, lambda, mu, Q, DataMode::Force);
    auto [ds, rec] = normalize(raw);

    double want_scale = 1.0;
    for (const std::string& c : {"sxx", "syy", "sxy"})
        want_scale = std::max(want_scale, rec.scale_for(c));

    // exact fields divided by their column scales: the normalized program
    // must see them as a perfect fit
    FieldEmitter scaled = [=](Tape& t, const std::vector<NodeId>& in) {
        const auto f = emit_exact_fields(t, in[0], in[1], lambda, mu, Q);
        const char* names[5] = {"ux", "uy", "sxx", "syy", "sxy"};
        std::map<std::string, NodeId> out;
        for (int i = 0; i < 5; ++i)
            out[names[i]] = t.mul(f[i], t.constant(1.0 / rec.scale_for(names[i])));
        return out;
    };

    MaterialParams mat;
    mat.lambda = lambda;
    mat.mu = mu;
    mat.lambda_trainable = true;
    mat.mu_trainable = true;
    LossProgram prog(scaled, mat, rec, {});
    CHECK(prog.stress_scale() == want_scale);
    CHECK(prog.physical_material().lambda == doctest::Approx(lambda).epsilon(1e-15));
    CHECK(prog.physical_material().mu == doctest::Approx(mu).epsilon(1e-15));

    const auto rep = prog.evaluate(ds);
    for (const auto& [name, value] : rep.terms) {
        INFO(name);
        CHECK(value < 1e-20);
    }

    // stationarity survives the change of units
    std::vector<double> grad;
    prog.batch_gradient(ds, all_rows(ds), grad);
    CHECK(std::abs(grad[prog.lambda_index()]) < 1e-8);
    CHECK(std::abs(grad[prog.mu_index()]) < 1e-8);
}
