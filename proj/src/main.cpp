#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "elastinet/analytic.hpp"
#include "elastinet/dataset.hpp"
#include "elastinet/loss.hpp"
#include "elastinet/network.hpp"
#include "elastinet/training.hpp"
#include "elastinet/util.hpp"

namespace {

using namespace elastinet;
using nlohmann::json;

// ---------------------------------------------------------------------------
// manifest plumbing: every run records its resolved configuration, seed and
// FNV-1a hashes of the files it read and wrote, enough to replay the run.

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json file_stamp(const std::string& path) {
    const std::string bytes = read_file(path);
    char hex[20];
    std::snprintf(hex, sizeof hex, "0x%016llx", static_cast<unsigned long long>(fnv1a(bytes)));
    return json{{"fnv1a", hex}, {"bytes", bytes.size()}};
}

struct Manifest {
    json j;
    explicit Manifest(const std::string& command) { j["command"] = command; }
    void input(const std::string& path) { j["inputs"][path] = file_stamp(path); }
    void artifact(const std::string& path) { j["artifacts"][path] = file_stamp(path); }
    void write(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        out << j.dump(1) << "\n";
        if (!out) raise("cannot write '" + path + "'");
    }
};

std::string sibling(const std::string& path, const char* ext) {
    return std::filesystem::path(path).replace_extension(ext).string();
}

// flat key=value configuration file; values only fill options the command
// line left unset, so flags always win. CLI11 only reads config files on the
// root app, hence the manual pass per subcommand.
void apply_config(CLI::App* cmd, const std::string& path) {
    if (path.empty()) return;
    std::ifstream in(path);
    if (!in) raise("cannot open '" + path + "'");
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            raise("invalid config line " + std::to_string(lineno) + " in '" + path + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (opt == nullptr) raise("unknown config key '" + key + "' in '" + path + "'");
        if (opt->count() > 0) continue;
        opt->add_result(value);
        opt->run_callback();
    }
}

void need(const std::string& value, const char* flag) {
    if (value.empty()) raise(std::string("missing required option '") + flag + "'");
}

std::string joined(const std::string& dir, const char* name) {
    return (std::filesystem::path(dir) / name).string();
}

// "100x100" / "5x20" -> pair of positive ints
std::pair<int, int> parse_pair(const std::string& s, const char* what) {
    const auto cut = s.find('x');
    int a = 0, b = 0;
    if (cut != std::string::npos) {
        try {
            std::size_t used = 0;
            a = std::stoi(s.substr(0, cut), &used);
            if (used != cut) a = 0;
            b = std::stoi(s.substr(cut + 1), &used);
            if (used != s.size() - cut - 1) b = 0;
        } catch (const std::exception&) {
            a = 0;
        }
    }
    if (a <= 0 || b <= 0) raise(std::string("invalid ") + what + " '" + s + "'; expected NxM");
    return {a, b};
}

NetworkArch parse_arch(const std::string& arch, const std::string& activation,
                       const std::string& network) {
    NetworkArch a;
    std::tie(a.layers, a.neurons) = parse_pair(arch, "architecture");
    a.activation = activation_from_string(activation);
    if (network == "independent")
        a.mode = NetworkArch::Mode::Independent;
    else if (network == "shared")
        a.mode = NetworkArch::Mode::SingleShared;
    else
        raise("unknown network mode '" + network + "'");
    return a;
}

GridSpec parse_grid(const std::string& s) {
    GridSpec g;
    std::tie(g.n_x, g.n_y) = parse_pair(s, "grid");
    return g;
}

std::vector<std::string> fields_for(ProblemKind p) {
    if (p == ProblemKind::Plastic) return {"ux", "uy", "sxx", "syy", "szz", "sxy"};
    return {"ux", "uy", "sxx", "syy", "sxy"};
}

// ---------------------------------------------------------------------------
// shared training flags

struct HyperFlags {
    int epochs = 10000;
    int patience = 500;
    int batch = 64;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    std::string mode = "solve";
};

void add_hyper(CLI::App* cmd, HyperFlags& h, bool with_mode = true) {
    cmd->add_option("--epochs", h.epochs, "maximum training epochs");
    cmd->add_option("--patience", h.patience, "epochs without improvement before stopping");
    cmd->add_option("--batch", h.batch, "minibatch size");
    cmd->add_option("--lr", h.lr, "Adam learning rate");
    cmd->add_option("--seed", h.seed, "RNG seed")->envname("ELASTINET_SEED");
    if (with_mode)
        cmd->add_option("--mode", h.mode, "solve (fit fields) or identify (also fit material)")
            ->check(CLI::IsMember({"solve", "identify"}));
}

TrainingConfig config_from(const HyperFlags& h) {
    TrainingConfig cfg;
    cfg.mode = train_mode_from_string(h.mode);
    cfg.max_epochs = h.epochs;
    cfg.patience = h.patience;
    cfg.batch_size = h.batch;
    cfg.learning_rate = h.lr;
    cfg.seed = h.seed;
    return cfg;
}

json hyper_json(const HyperFlags& h) {
    return json{{"epochs", h.epochs}, {"patience", h.patience}, {"batch", h.batch},
                {"lr", h.lr},         {"seed", h.seed},         {"mode", h.mode}};
}

// training runs print their result and write history/checkpoint/manifest into
// the output directory; a recorded numerical abort maps to exit code 2
int finish_run(const TrainResult& res, const std::string& out_dir, Manifest& m) {
    std::filesystem::create_directories(out_dir);
    const std::string hist = joined(out_dir, "history.csv");
    const std::string ckpt = joined(out_dir, "best.ckpt.json");
    save_history(res.history, hist);
    save_checkpoint(res.best, ckpt);
    m.artifact(hist);
    m.artifact(ckpt);
    m.write(joined(out_dir, "manifest.json"));

    std::cout << "final_loss = " << fmt17(res.history.best_loss) << "\n";
    std::cout << "best_epoch = " << res.history.best_epoch << "\n";
    if (res.history.initial_loss_ratio)
        std::cout << "initial_loss_ratio = " << fmt17(*res.history.initial_loss_ratio) << "\n";
    std::cout << "lambda = " << fmt17(res.best.material.lambda) << "\n";
    std::cout << "mu = " << fmt17(res.best.material.mu) << "\n";
    if (res.best.material.sigma_y)
        std::cout << "sigma_y = " << fmt17(*res.best.material.sigma_y) << "\n";

    if (!res.history.abort_reason.empty()) {
        std::cerr << "error: " << res.history.abort_reason << "\n";
        return 2;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// generate

struct GenerateFlags {
    std::string problem = "elastic";
    std::string grid = "100x100";
    double lambda = 1.0, mu = 0.5, Q = 4.0;
    double sigma_y = 0.0;
    double exx = 0.01, eyy = -0.003, exy = 0.004;
    std::string mode = "force";
    std::string out;
};

int run_generate(const GenerateFlags& f, bool sigma_y_given) {
    need(f.out, "--out");
    const GridSpec grid = parse_grid(f.grid);
    const ProblemKind problem = problem_from_string(f.problem);
    Dataset d;
    if (problem == ProblemKind::Elastic) {
        d = generate_elastic_dataset(grid, f.lambda, f.mu, f.Q, data_mode_from_string(f.mode));
    } else {
        if (!sigma_y_given) raise("generate --problem plastic requires --sigma-y");
        d = generate_plastic_dataset(grid, f.lambda, f.mu, f.sigma_y, f.exx, f.eyy, f.exy);
    }
    save_dataset(d, f.out);

    Manifest m("generate");
    m.j["config"] = json{{"problem", f.problem}, {"grid", f.grid}, {"lambda", f.lambda},
                         {"mu", f.mu},           {"Q", f.Q},       {"mode", f.mode},
                         {"out", f.out}};
    if (problem == ProblemKind::Plastic)
        m.j["config"].update(json{
            {"sigma_y", f.sigma_y}, {"exx", f.exx}, {"eyy", f.eyy}, {"exy", f.exy}});
    m.artifact(f.out);
    m.artifact(sibling(f.out, ".meta.json"));
    m.write(sibling(f.out, ".manifest.json"));
    std::cout << "rows = " << d.rows() << "\n";
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainFlags {
    std::string data;
    std::string out;
    std::string arch = "5x20";
    std::string activation = "tanh";
    std::string network = "independent";
    double lambda0 = 1.0, mu0 = 0.5, sigma_y0 = 0.0;
    bool raw = false;
    HyperFlags hyper;
};

MaterialParams resolve_material(const Dataset& d, const TrainFlags& f, bool l_given, bool m_given,
                                bool s_given) {
    // explicit flags win; otherwise fall back to the material the dataset
    // declares (natural for solve runs), then to the defaults
    MaterialParams mat;
    mat.lambda = l_given ? f.lambda0 : d.lambda.value_or(f.lambda0);
    mat.mu = m_given ? f.mu0 : d.mu.value_or(f.mu0);
    if (s_given)
        mat.sigma_y = f.sigma_y0;
    else if (d.sigma_y)
        mat.sigma_y = *d.sigma_y;
    return mat;
}

int run_train(const TrainFlags& f, bool l_given, bool m_given, bool s_given) {
    need(f.data, "--data");
    need(f.out, "--out");
    const Dataset loaded = load_dataset(f.data);
    const Dataset ds = (f.raw || !loaded.normalization.empty()) ? loaded : normalize(loaded).first;
    const MaterialParams mat = resolve_material(loaded, f, l_given, m_given, s_given);
    const NetworkArch arch = parse_arch(f.arch, f.activation, f.network);
    const FieldModel model = build_field_model(fields_for(ds.problem), arch, {"x", "y"},
                                               f.hyper.seed);
    const TrainResult res = train(model, mat, ds, config_from(f.hyper));

    Manifest m("train");
    m.j["config"] = hyper_json(f.hyper);
    m.j["config"].update(json{{"data", f.data},
                              {"out", f.out},
                              {"arch", f.arch},
                              {"activation", f.activation},
                              {"network", f.network},
                              {"lambda0", mat.lambda},
                              {"mu0", mat.mu},
                              {"raw", f.raw}});
    if (mat.sigma_y) m.j["config"]["sigma_y0"] = *mat.sigma_y;
    m.j["seed"] = f.hyper.seed;
    m.input(f.data);
    return finish_run(res, f.out, m);
}

// ---------------------------------------------------------------------------
// retrain

struct RetrainFlags {
    std::string init;
    std::string data;
    std::string out;
    std::string arch;  // optional expectation, checked against the checkpoint
    std::string activation = "tanh";
    std::string network = "independent";
    HyperFlags hyper;
};

int run_retrain(const RetrainFlags& f, bool arch_given) {
    need(f.init, "--init");
    need(f.data, "--data");
    need(f.out, "--out");
    const Checkpoint ckpt = load_checkpoint(f.init);
    const Dataset ds = load_dataset(f.data);
    std::optional<NetworkArch> expected;
    if (arch_given) expected = parse_arch(f.arch, f.activation, f.network);
    const TrainResult res = retrain(ckpt, ds, config_from(f.hyper), expected);

    Manifest m("retrain");
    m.j["config"] = hyper_json(f.hyper);
    m.j["config"].update(json{{"init", f.init}, {"data", f.data}, {"out", f.out}});
    if (arch_given) m.j["config"]["arch"] = f.arch;
    m.j["seed"] = f.hyper.seed;
    m.input(f.init);
    m.input(f.data);
    return finish_run(res, f.out, m);
}

// ---------------------------------------------------------------------------
// surrogate

struct SurrogateFlags {
    std::vector<std::string> data;
    std::string out;
    std::string arch = "5x20";
    std::string activation = "tanh";
    std::string network = "independent";
    double lambda = 1.0;
    HyperFlags hyper;
};

int run_surrogate(const SurrogateFlags& f) {
    if (f.data.empty()) raise("missing required option '--data'");
    need(f.out, "--out");
    std::vector<Dataset> parts;
    parts.reserve(f.data.size());
    for (const std::string& p : f.data) parts.push_back(load_dataset(p));
    MaterialParams mat;
    mat.lambda = f.lambda;
    const NetworkArch arch = parse_arch(f.arch, f.activation, f.network);
    const TrainResult res = train_surrogate(parts, arch, mat, config_from(f.hyper));

    Manifest m("surrogate");
    m.j["config"] = hyper_json(f.hyper);
    m.j["config"].update(json{{"data", f.data},
                              {"out", f.out},
                              {"arch", f.arch},
                              {"activation", f.activation},
                              {"network", f.network},
                              {"lambda", f.lambda}});
    m.j["seed"] = f.hyper.seed;
    for (const std::string& p : f.data) m.input(p);
    return finish_run(res, f.out, m);
}

// ---------------------------------------------------------------------------
// eval

struct EvalFlags {
    std::string ckpt;
    std::string grid = "100x100";
    std::string out;
    bool exact = false;
    double Q = 4.0;
    double mu = 0.0;
};

int run_eval(const EvalFlags& f, bool mu_given) {
    need(f.ckpt, "--ckpt");
    need(f.out, "--out");
    const Checkpoint ckpt = load_checkpoint(f.ckpt);
    const bool surrogate = ckpt.model.inputs.size() == 3;
    if (surrogate && !mu_given) raise("a surrogate checkpoint needs --mu to evaluate");
    const bool plastic =
        std::find(ckpt.model.fields.begin(), ckpt.model.fields.end(), "szz") !=
        ckpt.model.fields.end();
    if (f.exact && plastic) raise("--exact covers the elastic closed form only");

    const auto points = sample_grid(parse_grid(f.grid));
    const double lambda = ckpt.material.lambda;
    const double mu = surrogate ? f.mu : ckpt.material.mu;

    std::ostringstream csv;
    csv << "x,y";
    for (const std::string& fd : ckpt.model.fields) csv << "," << fd;
    if (f.exact)
        for (const std::string& fd : ckpt.model.fields) csv << ",err_" << fd;
    csv << "\n";

    std::vector<double> max_err(ckpt.model.fields.size(), 0.0);
    double best_u = -1.0, err_at_max_u = 0.0;
    for (const auto& [x, y] : points) {
        std::vector<double> in = {x, y};
        if (surrogate) in.push_back(f.mu);
        std::vector<double> v = ckpt.model.forward_values(in);
        for (std::size_t i = 0; i < v.size(); ++i)
            v[i] *= ckpt.normalization.scale_for(ckpt.model.fields[i]);
        csv << fmt17(x) << "," << fmt17(y);
        for (double val : v) csv << "," << fmt17(val);
        if (f.exact) {
            const auto [uxe, uye] = exact_displacement(x, y, f.Q);
            const auto se = exact_stress(x, y, lambda, mu, f.Q);
            const std::vector<double> truth = {uxe, uye, se[0], se[1], se[2]};
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double err = v[i] - truth[i];
                csv << "," << fmt17(err);
                max_err[i] = std::max(max_err[i], std::abs(err));
            }
            const double ue = std::hypot(uxe, uye);
            if (ue > best_u) {
                best_u = ue;
                err_at_max_u = std::hypot(v[0] - uxe, v[1] - uye) / ue;
            }
        }
        csv << "\n";
    }
    std::ofstream out_file(f.out, std::ios::binary);
    out_file << csv.str();
    if (!out_file) raise("cannot write '" + f.out + "'");
    out_file.close();

    if (f.exact) {
        for (std::size_t i = 0; i < max_err.size(); ++i)
            std::cout << "max_abs_error_" << ckpt.model.fields[i] << " = " << fmt17(max_err[i])
                      << "\n";
        std::cout << "displacement_error_at_max_u = " << fmt17(err_at_max_u) << "\n";
    }

    Manifest m("eval");
    m.j["config"] = json{{"ckpt", f.ckpt}, {"grid", f.grid}, {"out", f.out},
                         {"exact", f.exact}, {"Q", f.Q}};
    if (surrogate) m.j["config"]["mu"] = f.mu;
    m.input(f.ckpt);
    m.artifact(f.out);
    m.write(sibling(f.out, ".manifest.json"));
    return 0;
}

// ---------------------------------------------------------------------------
// gradcheck: composite loss on random data and random networks, autodiff
// against central finite differences over every parameter, plus field input
// derivatives against differenced forward passes

struct GradcheckFlags {
    std::string arch = "2x10";
    std::string activation = "tanh";
    std::string network = "independent";
    std::string problem = "elastic";
    int points = 20;
    std::uint64_t seed = 0;
    std::string out = "gradcheck.manifest.json";
};

// relative to the larger of the two values, floored at a thousandth of the
// largest gradient entry so near-zero components are judged on absolute terms
double max_rel_error(const std::vector<double>& ad, const std::vector<double>& fd) {
    double gmax = 0.0;
    for (double g : ad) gmax = std::max(gmax, std::abs(g));
    double worst = 0.0;
    for (std::size_t i = 0; i < ad.size(); ++i) {
        const double denom = std::max({std::abs(ad[i]), std::abs(fd[i]), 1e-3 * gmax, 1e-12});
        worst = std::max(worst, std::abs(ad[i] - fd[i]) / denom);
    }
    return worst;
}

int run_gradcheck(const GradcheckFlags& f) {
    if (f.points < 1) raise("gradcheck needs at least one point");
    const ProblemKind problem = problem_from_string(f.problem);
    Rng rng(f.seed);

    Dataset ds;
    ds.mode = DataMode::Force;
    ds.problem = problem;
    auto column = [&](const std::string& name, double lo, double hi) {
        std::vector<double> v(static_cast<std::size_t>(f.points));
        for (double& x : v) x = rng.uniform(lo, hi);
        ds.add_column(name, std::move(v));
    };
    column("x", 0.0, 1.0);
    column("y", 0.0, 1.0);
    for (const std::string& fd : fields_for(problem)) column(fd, -1.0, 1.0);
    column("fx", -1.0, 1.0);
    column("fy", -1.0, 1.0);

    MaterialParams mat;
    mat.lambda_trainable = true;
    mat.mu_trainable = true;
    if (problem == ProblemKind::Plastic) {
        mat.sigma_y = 1.0;
        mat.sigma_y_trainable = true;
    }

    const NetworkArch arch = parse_arch(f.arch, f.activation, f.network);
    const FieldModel model = build_field_model(fields_for(problem), arch, {"x", "y"}, f.seed + 1);
    LossOptions opts;
    opts.problem = problem;
    LossProgram prog(model, mat, ds.normalization, opts);

    std::vector<std::size_t> rows(ds.rows());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<double> grad;
    prog.batch_gradient(ds, rows, grad);

    std::vector<double> theta = prog.parameters();
    std::vector<double> fd(theta.size());
    const double h = 1e-5;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        std::vector<double> t = theta;
        t[i] = theta[i] + h;
        prog.set_parameters(t);
        const double up = prog.evaluate(ds, rows).total;
        t[i] = theta[i] - h;
        prog.set_parameters(t);
        const double dn = prog.evaluate(ds, rows).total;
        fd[i] = (up - dn) / (2.0 * h);
    }
    prog.set_parameters(theta);
    const double param_err = max_rel_error(grad, fd);

    // input derivatives of every field at every sample point
    std::vector<double> ad_in, fd_in;
    const double hx = 1e-6;
    for (int p = 0; p < f.points; ++p) {
        const double px = ds.col("x")[static_cast<std::size_t>(p)];
        const double py = ds.col("y")[static_cast<std::size_t>(p)];
        for (const DenseNetwork& net : model.nets) {
            Tape t;
            const NodeId xv = t.variable("x");
            const NodeId yv = t.variable("y");
            t.set_value(xv, px);
            t.set_value(yv, py);
            const EmittedNet en = net.emit(t, {xv, yv});
            std::vector<NodeId> deriv;
            for (NodeId out : en.outputs) {
                deriv.push_back(t.input_derivative(out, "x"));
                deriv.push_back(t.input_derivative(out, "y"));
            }
            t.forward();
            for (NodeId d : deriv) ad_in.push_back(t.value(d));
            auto at = [&](double ax, double ay) {
                return net.forward_values(std::vector<double>{ax, ay});
            };
            const auto xp = at(px + hx, py), xm = at(px - hx, py);
            const auto yp = at(px, py + hx), ym = at(px, py - hx);
            for (std::size_t k = 0; k < xp.size(); ++k) {
                fd_in.push_back((xp[k] - xm[k]) / (2.0 * hx));
                fd_in.push_back((yp[k] - ym[k]) / (2.0 * hx));
            }
        }
    }
    const double input_err = max_rel_error(ad_in, fd_in);
    const double worst = std::max(param_err, input_err);

    std::cout << "parameters_checked = " << theta.size() << "\n";
    std::cout << "max_parameter_gradient_error = " << fmt17(param_err) << "\n";
    std::cout << "max_input_derivative_error = " << fmt17(input_err) << "\n";
    std::cout << "max_relative_gradient_error = " << fmt17(worst) << "\n";

    Manifest m("gradcheck");
    m.j["config"] = json{{"arch", f.arch},       {"activation", f.activation},
                         {"network", f.network}, {"problem", f.problem},
                         {"points", f.points},   {"seed", f.seed}};
    m.j["seed"] = f.seed;
    m.j["result"] = json{{"max_parameter_gradient_error", param_err},
                         {"max_input_derivative_error", input_err},
                         {"max_relative_gradient_error", worst}};
    m.write(f.out);

    if (!(worst <= 1e-6)) {
        std::cerr << "error: gradient check failed: max relative error " << fmt17(worst) << "\n";
        return 2;
    }
    return 0;
}

std::string one_line(std::string msg) {
    std::replace(msg.begin(), msg.end(), '\n', ';');
    return msg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"physics-informed neural networks for plane-strain elasticity", "elastinet"};
    app.require_subcommand(1);
    int rc = 0;

    GenerateFlags gen;
    std::string gen_cfg;
    auto* g = app.add_subcommand("generate", "write a manufactured-solution dataset");
    g->add_option("--config", gen_cfg, "key=value config file (flags override)");
    g->add_option("--problem", gen.problem, "elastic or plastic")
        ->check(CLI::IsMember({"elastic", "plastic"}));
    g->add_option("--grid", gen.grid, "sample grid, e.g. 100x100");
    g->add_option("--lambda", gen.lambda, "Lame lambda");
    g->add_option("--mu", gen.mu, "shear modulus");
    g->add_option("--Q", gen.Q, "displacement amplitude of the closed form");
    g->add_option("--mode", gen.mode, "force (body forces included) or stress")
        ->check(CLI::IsMember({"force", "stress"}));
    auto* g_sy = g->add_option("--sigma-y", gen.sigma_y, "yield stress (plastic only)");
    g->add_option("--exx", gen.exx, "total strain exx (plastic only)");
    g->add_option("--eyy", gen.eyy, "total strain eyy (plastic only)");
    g->add_option("--exy", gen.exy, "total strain exy (plastic only)");
    g->add_option("--out", gen.out, "output CSV path");
    g->callback([&] {
        apply_config(g, gen_cfg);
        rc = run_generate(gen, g_sy->count() > 0);
    });

    TrainFlags tr;
    std::string tr_cfg;
    auto* t = app.add_subcommand("train", "fit networks to a dataset");
    t->add_option("--config", tr_cfg, "key=value config file (flags override)");
    t->add_option("--data", tr.data, "dataset CSV");
    t->add_option("--arch", tr.arch, "affine layers x neurons, e.g. 5x20");
    t->add_option("--activation", tr.activation, "tanh or relu")
        ->check(CLI::IsMember({"tanh", "relu"}));
    t->add_option("--network", tr.network, "independent (one net per field) or shared")
        ->check(CLI::IsMember({"independent", "shared"}));
    auto* t_l = t->add_option("--lambda0", tr.lambda0, "material lambda (initial guess)");
    auto* t_m = t->add_option("--mu0", tr.mu0, "material mu (initial guess)");
    auto* t_s = t->add_option("--sigma-y0", tr.sigma_y0, "yield stress (initial guess)");
    t->add_flag("--raw", tr.raw, "train on the data as-is, skip max-abs normalization");
    add_hyper(t, tr.hyper);
    t->add_option("--out", tr.out, "output directory");
    t->callback([&] {
        apply_config(t, tr_cfg);
        rc = run_train(tr, t_l->count() > 0, t_m->count() > 0, t_s->count() > 0);
    });

    RetrainFlags re;
    std::string re_cfg;
    auto* r = app.add_subcommand("retrain", "continue training a checkpoint on new data");
    r->add_option("--config", re_cfg, "key=value config file (flags override)");
    r->add_option("--init", re.init, "checkpoint to start from");
    r->add_option("--data", re.data, "dataset CSV");
    auto* r_a = r->add_option("--arch", re.arch, "expected architecture (checked, not applied)");
    r->add_option("--activation", re.activation, "expected activation");
    r->add_option("--network", re.network, "expected network mode");
    add_hyper(r, re.hyper);
    r->add_option("--out", re.out, "output directory");
    r->callback([&] {
        apply_config(r, re_cfg);
        rc = run_retrain(re, r_a->count() > 0);
    });

    SurrogateFlags su;
    std::string su_cfg;
    auto* s = app.add_subcommand("surrogate", "train one model over a family of mu values");
    s->add_option("--config", su_cfg, "key=value config file (flags override)");
    s->add_option("--data", su.data, "comma-separated per-mu dataset CSVs")->delimiter(',');
    s->add_option("--arch", su.arch, "affine layers x neurons");
    s->add_option("--activation", su.activation, "tanh or relu")
        ->check(CLI::IsMember({"tanh", "relu"}));
    s->add_option("--network", su.network, "independent or shared")
        ->check(CLI::IsMember({"independent", "shared"}));
    s->add_option("--lambda", su.lambda, "material lambda (fixed)");
    add_hyper(s, su.hyper, /*with_mode=*/false);
    s->add_option("--out", su.out, "output directory");
    s->callback([&] {
        apply_config(s, su_cfg);
        rc = run_surrogate(su);
    });

    EvalFlags ev;
    std::string ev_cfg;
    auto* evc = app.add_subcommand("eval", "evaluate a checkpoint on a grid");
    evc->add_option("--config", ev_cfg, "key=value config file (flags override)");
    evc->add_option("--ckpt", ev.ckpt, "checkpoint JSON");
    evc->add_option("--grid", ev.grid, "evaluation grid, e.g. 100x100");
    evc->add_flag("--exact", ev.exact, "also write pointwise errors against the closed form");
    evc->add_option("--Q", ev.Q, "closed-form displacement amplitude (with --exact)");
    auto* e_mu = evc->add_option("--mu", ev.mu, "mu input value (surrogate checkpoints)");
    evc->add_option("--out", ev.out, "output CSV path");
    evc->callback([&] {
        apply_config(evc, ev_cfg);
        rc = run_eval(ev, e_mu->count() > 0);
    });

    GradcheckFlags gc;
    std::string gc_cfg;
    auto* c = app.add_subcommand("gradcheck", "autodiff vs finite differences on random data");
    c->add_option("--config", gc_cfg, "key=value config file (flags override)");
    c->add_option("--arch", gc.arch, "affine layers x neurons");
    c->add_option("--activation", gc.activation, "tanh or relu")
        ->check(CLI::IsMember({"tanh", "relu"}));
    c->add_option("--network", gc.network, "independent or shared")
        ->check(CLI::IsMember({"independent", "shared"}));
    c->add_option("--problem", gc.problem, "elastic or plastic")
        ->check(CLI::IsMember({"elastic", "plastic"}));
    c->add_option("--points", gc.points, "number of random sample points");
    c->add_option("--seed", gc.seed, "RNG seed")->envname("ELASTINET_SEED");
    c->add_option("--out", gc.out, "manifest path");
    c->callback([&] {
        apply_config(c, gc_cfg);
        rc = run_gradcheck(gc);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::cerr << "error: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const elastinet::Error& e) {
        const std::string msg = one_line(e.what());
        std::cerr << "error: " << msg << "\n";
        return msg.find("non-finite") != std::string::npos ? 2 : 1;
    }
    return rc;
}
