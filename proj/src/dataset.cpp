#include "elastinet/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "elastinet/analytic.hpp"
#include "elastinet/util.hpp"

namespace elastinet {

std::string to_string(DataMode m) { return m == DataMode::Stress ? "stress" : "force"; }
std::string to_string(ProblemKind p) { return p == ProblemKind::Elastic ? "elastic" : "plastic"; }

DataMode data_mode_from_string(const std::string& s) {
    if (s == "stress") return DataMode::Stress;
    if (s == "force") return DataMode::Force;
    raise("unknown data mode '" + s + "'");
}

ProblemKind problem_from_string(const std::string& s) {
    if (s == "elastic") return ProblemKind::Elastic;
    if (s == "plastic") return ProblemKind::Plastic;
    raise("unknown problem kind '" + s + "'");
}

double NormalizationRecord::scale_for(const std::string& column) const {
    const auto it = scales.find(column);
    return it == scales.end() ? 1.0 : it->second;
}

double NormalizationRecord::stress_scale() const {
    double s = 0.0;
    for (const char* c : {"sxx", "syy", "szz", "sxy"}) {
        const auto it = scales.find(c);
        if (it != scales.end()) s = std::max(s, it->second);
    }
    return s > 0.0 ? s : 1.0;
}

bool Dataset::has(const std::string& column) const {
    return std::find(columns.begin(), columns.end(), column) != columns.end();
}

const std::vector<double>& Dataset::col(const std::string& column) const {
    for (std::size_t k = 0; k < columns.size(); ++k)
        if (columns[k] == column) return values[k];
    raise("unknown column '" + column + "'");
}

std::vector<double>& Dataset::col(const std::string& column) {
    return const_cast<std::vector<double>&>(std::as_const(*this).col(column));
}

void Dataset::add_column(const std::string& column, std::vector<double> v) {
    if (has(column)) raise("duplicate column '" + column + "'");
    if (!values.empty() && v.size() != rows())
        raise("column '" + column + "' has " + std::to_string(v.size()) + " rows, expected " +
              std::to_string(rows()));
    columns.push_back(column);
    values.push_back(std::move(v));
}

std::vector<std::pair<double, double>> sample_grid(const GridSpec& spec) {
    if (spec.n_x < 2 || spec.n_y < 2) raise("grid must be at least 2x2");
    if (!(spec.x1 > spec.x0) || !(spec.y1 > spec.y0)) raise("domain bounds are empty");
    const double hx = (spec.x1 - spec.x0) / (spec.n_x - 1);
    const double hy = (spec.y1 - spec.y0) / (spec.n_y - 1);
    std::vector<std::pair<double, double>> pts;
    pts.reserve(std::size_t(spec.n_x) * spec.n_y);
    for (int iy = 0; iy < spec.n_y; ++iy) {
        const double y = iy == spec.n_y - 1 ? spec.y1 : spec.y0 + iy * hy;
        for (int ix = 0; ix < spec.n_x; ++ix) {
            const double x = ix == spec.n_x - 1 ? spec.x1 : spec.x0 + ix * hx;
            pts.emplace_back(x, y);
        }
    }
    return pts;
}

Dataset generate_elastic_dataset(const GridSpec& spec, double lambda, double mu, double Q,
                                 DataMode mode) {
    const auto pts = sample_grid(spec);
    const std::size_t n = pts.size();
    std::vector<double> X(n), Y(n), ux(n), uy(n), sxx(n), syy(n), sxy(n);
    std::vector<double> fx, fy;
    if (mode == DataMode::Force) {
        fx.resize(n);
        fy.resize(n);
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x, y] = pts[i];
        X[i] = x;
        Y[i] = y;
        std::tie(ux[i], uy[i]) = exact_displacement(x, y, Q);
        const auto s = exact_stress(x, y, lambda, mu, Q);
        sxx[i] = s[0];
        syy[i] = s[1];
        sxy[i] = s[2];
        if (mode == DataMode::Force) std::tie(fx[i], fy[i]) = exact_body_force(x, y, lambda, mu, Q);
    }
    Dataset d;
    d.mode = mode;
    d.problem = ProblemKind::Elastic;
    d.lambda = lambda;
    d.mu = mu;
    d.add_column("x", std::move(X));
    d.add_column("y", std::move(Y));
    d.add_column("ux", std::move(ux));
    d.add_column("uy", std::move(uy));
    d.add_column("sxx", std::move(sxx));
    d.add_column("syy", std::move(syy));
    d.add_column("sxy", std::move(sxy));
    if (mode == DataMode::Force) {
        d.add_column("fx", std::move(fx));
        d.add_column("fy", std::move(fy));
    }
    return d;
}

namespace {

// Constant plane-strain stress for a homogeneous total strain: elastic trial
// deviator s = 2 mu e, scaled back onto the von Mises surface when it exceeds
// sigma_y; the pressure (lambda + 2 mu / 3) tr(eps) stays elastic.
std::array<double, 4> homogeneous_stress(double exx, double eyy, double exy, double lambda,
                                         double mu, double sigma_y) {
    const double tr = exx + eyy;  // ezz = 0 in plane strain
    const double e[4] = {exx - tr / 3.0, eyy - tr / 3.0, -tr / 3.0, exy};
    double s[4];
    for (int i = 0; i < 4; ++i) s[i] = 2.0 * mu * e[i];
    const double q_trial =
        std::sqrt(1.5 * (s[0] * s[0] + s[1] * s[1] + s[2] * s[2] + 2.0 * s[3] * s[3]));
    if (q_trial > sigma_y)
        for (double& si : s) si *= sigma_y / q_trial;
    const double p = (lambda + 2.0 * mu / 3.0) * tr;
    return {s[0] + p, s[1] + p, s[2] + p, s[3]};  // (sxx, syy, szz, sxy)
}

}  // namespace

Dataset generate_plastic_dataset(const GridSpec& spec, double lambda, double mu, double sigma_y,
                                 double exx, double eyy, double exy) {
    if (!(mu > 0.0)) raise("mu must be positive");
    if (!(sigma_y > 0.0)) raise("sigma_y must be positive");
    const auto pts = sample_grid(spec);
    const auto sig = homogeneous_stress(exx, eyy, exy, lambda, mu, sigma_y);
    const std::size_t n = pts.size();
    std::vector<double> X(n), Y(n), ux(n), uy(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto [x, y] = pts[i];
        X[i] = x;
        Y[i] = y;
        ux[i] = exx * x + exy * y;
        uy[i] = exy * x + eyy * y;
    }
    Dataset d;
    d.mode = DataMode::Force;
    d.problem = ProblemKind::Plastic;
    d.lambda = lambda;
    d.mu = mu;
    d.sigma_y = sigma_y;
    d.add_column("x", std::move(X));
    d.add_column("y", std::move(Y));
    d.add_column("ux", std::move(ux));
    d.add_column("uy", std::move(uy));
    d.add_column("sxx", std::vector<double>(n, sig[0]));
    d.add_column("syy", std::vector<double>(n, sig[1]));
    d.add_column("sxy", std::vector<double>(n, sig[3]));
    d.add_column("szz", std::vector<double>(n, sig[2]));
    d.add_column("fx", std::vector<double>(n, 0.0));
    d.add_column("fy", std::vector<double>(n, 0.0));
    return d;
}

namespace {

// A dataset reinterpreted as a full uniform grid: node coordinates per axis
// plus the dataset row backing each cell (x fastest).
struct GridView {
    int nx = 0, ny = 0;
    double hx = 0.0, hy = 0.0;
    std::vector<double> xs, ys;
    std::vector<std::size_t> cell_row;

    double at(const std::vector<double>& v, int ix, int iy) const {
        return v[cell_row[std::size_t(iy) * nx + ix]];
    }
};

std::vector<double> sorted_unique(const std::vector<double>& v) {
    std::vector<double> u(v);
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    return u;
}

double uniform_spacing(const std::vector<double>& nodes) {
    const double span = nodes.back() - nodes.front();
    const double h = span / double(nodes.size() - 1);
    for (std::size_t i = 0; i + 1 < nodes.size(); ++i)
        if (std::abs(nodes[i + 1] - nodes[i] - h) > 1e-9 * std::max(1.0, std::abs(span)))
            raise("grid spacing is not uniform");
    return h;
}

GridView reconstruct_grid(const Dataset& d) {
    const auto& x = d.col("x");
    const auto& y = d.col("y");
    if (x.empty()) raise("empty dataset");
    GridView g;
    g.xs = sorted_unique(x);
    g.ys = sorted_unique(y);
    g.nx = int(g.xs.size());
    g.ny = int(g.ys.size());
    if (g.nx < 2 || g.ny < 2 || std::size_t(g.nx) * g.ny != x.size())
        raise("dataset does not form a full uniform grid");
    g.cell_row.assign(std::size_t(g.nx) * g.ny, SIZE_MAX);
    for (std::size_t r = 0; r < x.size(); ++r) {
        const auto ix = std::lower_bound(g.xs.begin(), g.xs.end(), x[r]) - g.xs.begin();
        const auto iy = std::lower_bound(g.ys.begin(), g.ys.end(), y[r]) - g.ys.begin();
        std::size_t& cell = g.cell_row[std::size_t(iy) * g.nx + ix];
        if (cell != SIZE_MAX) raise("dataset does not form a full uniform grid");
        cell = r;
    }
    g.hx = uniform_spacing(g.xs);
    g.hy = uniform_spacing(g.ys);
    return g;
}

}  // namespace

Dataset central_difference_forces(const Dataset& stress_data) {
    for (const char* c : {"sxx", "syy", "sxy"})
        if (!stress_data.has(c)) raise(std::string("missing column '") + c + "'");
    const GridView g = reconstruct_grid(stress_data);
    if (g.nx < 3 || g.ny < 3) raise("grid must be at least 3x3 for finite differences");

    // Second-order stencils: central inside, one-sided on the edges.
    const auto ddx = [&](const std::vector<double>& v, int ix, int iy) {
        if (ix == 0) return (-3.0 * g.at(v, 0, iy) + 4.0 * g.at(v, 1, iy) - g.at(v, 2, iy)) / (2.0 * g.hx);
        if (ix == g.nx - 1)
            return (3.0 * g.at(v, ix, iy) - 4.0 * g.at(v, ix - 1, iy) + g.at(v, ix - 2, iy)) / (2.0 * g.hx);
        return (g.at(v, ix + 1, iy) - g.at(v, ix - 1, iy)) / (2.0 * g.hx);
    };
    const auto ddy = [&](const std::vector<double>& v, int ix, int iy) {
        if (iy == 0) return (-3.0 * g.at(v, ix, 0) + 4.0 * g.at(v, ix, 1) - g.at(v, ix, 2)) / (2.0 * g.hy);
        if (iy == g.ny - 1)
            return (3.0 * g.at(v, ix, iy) - 4.0 * g.at(v, ix, iy - 1) + g.at(v, ix, iy - 2)) / (2.0 * g.hy);
        return (g.at(v, ix, iy + 1) - g.at(v, ix, iy - 1)) / (2.0 * g.hy);
    };

    const auto& sxx = stress_data.col("sxx");
    const auto& syy = stress_data.col("syy");
    const auto& sxy = stress_data.col("sxy");
    std::vector<double> fx(stress_data.rows()), fy(stress_data.rows());
    for (int iy = 0; iy < g.ny; ++iy)
        for (int ix = 0; ix < g.nx; ++ix) {
            const std::size_t r = g.cell_row[std::size_t(iy) * g.nx + ix];
            fx[r] = -(ddx(sxx, ix, iy) + ddy(sxy, ix, iy));
            fy[r] = -(ddx(sxy, ix, iy) + ddy(syy, ix, iy));
        }

    Dataset out = stress_data;
    if (out.has("fx")) out.col("fx") = std::move(fx);
    else out.add_column("fx", std::move(fx));
    if (out.has("fy")) out.col("fy") = std::move(fy);
    else out.add_column("fy", std::move(fy));
    return out;
}

namespace {

// Interpolating Lagrange weights for the m consecutive nodes starting at s.
// With m = 4 this is the piecewise cubic used throughout; smaller source grids
// degrade gracefully to quadratic/linear.
struct AxisStencil {
    int s = 0, m = 0;
    double w[4] = {0, 0, 0, 0};
};

AxisStencil axis_stencil(const std::vector<double>& nodes, double h, double v) {
    const int n = int(nodes.size());
    const double lo = nodes.front(), hi = nodes.back();
    if (v < lo - 1e-12 * std::max(1.0, hi - lo) || v > hi + 1e-12 * std::max(1.0, hi - lo))
        raise("target grid extends outside the source bounding box");
    AxisStencil st;
    st.m = std::min(4, n);
    const int cell = std::clamp(int(std::floor((v - lo) / h)), 0, n - 2);
    st.s = std::clamp(cell - 1, 0, n - st.m);
    for (int k = 0; k < st.m; ++k) {
        double p = 1.0;
        for (int j = 0; j < st.m; ++j)
            if (j != k) p *= (v - nodes[st.s + j]) / (nodes[st.s + k] - nodes[st.s + j]);
        st.w[k] = p;
    }
    return st;
}

}  // namespace

Dataset interpolate_to_grid(const Dataset& source, const GridSpec& target) {
    const GridView g = reconstruct_grid(source);
    const auto pts = sample_grid(target);

    std::vector<AxisStencil> sx(pts.size()), sy(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        sx[i] = axis_stencil(g.xs, g.hx, pts[i].first);
        sy[i] = axis_stencil(g.ys, g.hy, pts[i].second);
    }

    Dataset out;
    out.mode = source.mode;
    out.problem = source.problem;
    out.provenance = source.provenance;
    out.lambda = source.lambda;
    out.mu = source.mu;
    out.sigma_y = source.sigma_y;
    out.normalization = source.normalization;
    {
        std::vector<double> X(pts.size()), Y(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            X[i] = pts[i].first;
            Y[i] = pts[i].second;
        }
        out.add_column("x", std::move(X));
        out.add_column("y", std::move(Y));
    }
    for (std::size_t k = 0; k < source.columns.size(); ++k) {
        const std::string& name = source.columns[k];
        if (name == "x" || name == "y") continue;
        const auto& src = source.values[k];
        std::vector<double> vals(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) {
            double acc = 0.0;
            for (int jy = 0; jy < sy[i].m; ++jy) {
                double row = 0.0;
                for (int jx = 0; jx < sx[i].m; ++jx)
                    row += sx[i].w[jx] * g.at(src, sx[i].s + jx, sy[i].s + jy);
                acc += sy[i].w[jy] * row;
            }
            vals[i] = acc;
        }
        out.add_column(name, std::move(vals));
    }
    return out;
}

namespace {

std::string meta_path_for(const std::string& csv_path) {
    return std::filesystem::path(csv_path).replace_extension(".meta.json").string();
}

// Required columns given the declared mode and problem, in schema order.
std::vector<std::string> required_columns(DataMode mode, ProblemKind problem) {
    std::vector<std::string> req = {"x", "y", "ux", "uy", "sxx", "syy", "sxy"};
    if (problem == ProblemKind::Plastic) req.push_back("szz");
    if (mode == DataMode::Force) {
        req.push_back("fx");
        req.push_back("fy");
    }
    return req;
}

}  // namespace

void save_dataset(const Dataset& d, const std::string& path) {
    if (d.columns.empty() || d.rows() == 0) raise("empty dataset");
    std::ofstream out(path);
    if (!out) raise("cannot open '" + path + "'");
    for (std::size_t k = 0; k < d.columns.size(); ++k)
        out << (k ? "," : "") << d.columns[k];
    out << '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        for (std::size_t k = 0; k < d.columns.size(); ++k)
            out << (k ? "," : "") << fmt17(d.values[k][r]);
        out << '\n';
    }
    if (!out) raise("cannot write '" + path + "'");

    nlohmann::json meta;
    meta["mode"] = to_string(d.mode);
    meta["problem"] = to_string(d.problem);
    meta["lambda"] = d.lambda ? nlohmann::json(*d.lambda) : nlohmann::json(nullptr);
    meta["mu"] = d.mu ? nlohmann::json(*d.mu) : nlohmann::json(nullptr);
    meta["sigma_y"] = d.sigma_y ? nlohmann::json(*d.sigma_y) : nlohmann::json(nullptr);
    meta["normalization"] = nlohmann::json::object();
    for (const auto& [c, s] : d.normalization.scales) meta["normalization"][c] = s;
    meta["provenance"] = d.provenance;
    std::ofstream mf(meta_path_for(path));
    if (!mf) raise("cannot open '" + meta_path_for(path) + "'");
    mf << meta.dump(2) << '\n';
}

Dataset load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise("cannot open '" + path + "'");

    std::string line;
    std::vector<std::string> lines;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (!t.empty()) lines.push_back(t);
    }
    if (lines.empty()) raise("empty dataset");

    Dataset d;
    for (const std::string& name : split(lines[0], ',')) {
        const std::string c = trim(name);
        if (c.empty()) raise("empty column name in header");
        if (d.has(c)) raise("duplicate column '" + c + "'");
        d.columns.push_back(c);
    }
    d.values.assign(d.columns.size(), {});
    if (lines.size() == 1) raise("empty dataset");

    for (std::size_t r = 1; r < lines.size(); ++r) {
        const auto cells = split(lines[r], ',');
        if (cells.size() != d.columns.size())
            raise("row " + std::to_string(r) + " has " + std::to_string(cells.size()) +
                  " fields, expected " + std::to_string(d.columns.size()));
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const std::string cell = trim(cells[k]);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size())
                raise("non-numeric value '" + cell + "' in column '" + d.columns[k] + "' (row " +
                      std::to_string(r) + ")");
            d.values[k].push_back(v);
        }
    }

    std::ifstream mf(meta_path_for(path));
    if (mf) {
        nlohmann::json meta;
        try {
            mf >> meta;
        } catch (const std::exception& e) {
            raise("invalid metadata in '" + meta_path_for(path) + "': " + e.what());
        }
        try {
            if (meta.contains("mode")) d.mode = data_mode_from_string(meta["mode"].get<std::string>());
            if (meta.contains("problem"))
                d.problem = problem_from_string(meta["problem"].get<std::string>());
            if (meta.contains("lambda") && !meta["lambda"].is_null())
                d.lambda = meta["lambda"].get<double>();
            if (meta.contains("mu") && !meta["mu"].is_null()) d.mu = meta["mu"].get<double>();
            if (meta.contains("sigma_y") && !meta["sigma_y"].is_null())
                d.sigma_y = meta["sigma_y"].get<double>();
            if (meta.contains("normalization"))
                for (const auto& [c, s] : meta["normalization"].items())
                    d.normalization.scales[c] = s.get<double>();
            d.provenance = meta.value("provenance", std::string("external-file"));
        } catch (const Error&) {
            throw;
        } catch (const std::exception& e) {
            raise("invalid metadata in '" + meta_path_for(path) + "': " + e.what());
        }
    } else {
        // No sidecar: infer the tags from which columns are present.
        d.provenance = "external-file";
        d.mode = d.has("fx") && d.has("fy") ? DataMode::Force : DataMode::Stress;
        d.problem = d.has("szz") ? ProblemKind::Plastic : ProblemKind::Elastic;
    }

    for (const std::string& c : required_columns(d.mode, d.problem))
        if (!d.has(c)) raise("missing column '" + c + "'");
    return d;
}

std::pair<Dataset, NormalizationRecord> normalize(const Dataset& d) {
    if (d.rows() == 0) raise("empty dataset");
    if (!d.normalization.empty()) raise("dataset is already normalized");
    Dataset out = d;
    NormalizationRecord rec;
    for (std::size_t k = 0; k < out.columns.size(); ++k) {
        const std::string& name = out.columns[k];
        if (name == "x" || name == "y" || name == "mu") continue;
        double scale = 0.0;
        for (double v : out.values[k]) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) scale = 1.0;
        for (double& v : out.values[k]) v /= scale;
        rec.scales[name] = scale;
    }
    out.normalization = rec;
    return {std::move(out), std::move(rec)};
}

Dataset apply_normalization(const Dataset& d, const NormalizationRecord& record) {
    if (!d.normalization.empty()) raise("dataset is already normalized");
    Dataset out = d;
    for (std::size_t k = 0; k < out.columns.size(); ++k) {
        const auto it = record.scales.find(out.columns[k]);
        if (it == record.scales.end()) continue;
        for (double& v : out.values[k]) v /= it->second;
        out.normalization.scales[out.columns[k]] = it->second;
    }
    return out;
}

Dataset denormalize(const Dataset& d, const NormalizationRecord& record) {
    Dataset out = d;
    for (std::size_t k = 0; k < out.columns.size(); ++k) {
        const auto it = record.scales.find(out.columns[k]);
        if (it == record.scales.end()) continue;
        for (double& v : out.values[k]) v *= it->second;
    }
    out.normalization.scales.clear();
    return out;
}

Dataset make_surrogate_dataset(const std::vector<Dataset>& parts) {
    if (parts.empty()) raise("surrogate requires at least one dataset");
    const Dataset& first = parts.front();
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const Dataset& p = parts[i];
        if (!p.mu) raise("surrogate input " + std::to_string(i + 1) + " does not declare mu");
        if (p.has("mu"))
            raise("surrogate input " + std::to_string(i + 1) + " already has a mu column");
        if (!p.normalization.empty())
            raise("surrogate inputs must be raw (not normalized)");
        if (p.columns != first.columns || p.mode != first.mode || p.problem != first.problem)
            raise("surrogate inputs have mismatched columns");
    }

    Dataset out;
    out.mode = first.mode;
    out.problem = first.problem;
    out.provenance = first.provenance;
    // lambda / sigma_y carry over only when every part agrees; mu varies by
    // construction and lives in the new column instead.
    bool same_lambda = true, same_sy = true;
    for (const Dataset& p : parts) {
        same_lambda = same_lambda && p.lambda == first.lambda;
        same_sy = same_sy && p.sigma_y == first.sigma_y;
    }
    if (same_lambda) out.lambda = first.lambda;
    if (same_sy) out.sigma_y = first.sigma_y;

    std::size_t total = 0;
    for (const Dataset& p : parts) total += p.rows();
    for (const std::string& name : first.columns) {
        std::vector<double> v;
        v.reserve(total);
        for (const Dataset& p : parts) {
            const auto& src = p.col(name);
            v.insert(v.end(), src.begin(), src.end());
        }
        out.add_column(name, std::move(v));
        if (name == "y") {
            std::vector<double> mu;
            mu.reserve(total);
            for (const Dataset& p : parts) mu.insert(mu.end(), p.rows(), *p.mu);
            out.add_column("mu", std::move(mu));
        }
    }
    return out;
}

}  // namespace elastinet
