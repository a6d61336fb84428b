#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace elastinet {

// Whether a dataset carries body-force observations (force-complete) or only
// stresses (stress-complete; forces may later be derived by finite
// differences).
enum class DataMode { Stress, Force };
enum class ProblemKind { Elastic, Plastic };

std::string to_string(DataMode m);
std::string to_string(ProblemKind p);
DataMode data_mode_from_string(const std::string& s);
ProblemKind problem_from_string(const std::string& s);

// Uniform tensor-product grid; unit square by default, corners included.
struct GridSpec {
    int n_x = 100;
    int n_y = 100;
    double x0 = 0.0, x1 = 1.0;
    double y0 = 0.0, y1 = 1.0;
};

// Per-column max-abs scales recorded by normalize(). Columns absent from the
// record are implicitly unscaled.
struct NormalizationRecord {
    std::map<std::string, double> scales;

    double scale_for(const std::string& column) const;
    // Single scale shared by all stress residuals: the largest stress-column
    // scale (1 when no stress column was recorded).
    double stress_scale() const;
    bool empty() const { return scales.empty(); }
};

// Column-oriented table of collocation points and observed fields. `columns`
// preserves file order; `values[k]` is the data of `columns[k]`, all the same
// length. Coordinates x, y (and mu in surrogate mode) stay in physical units;
// field columns may be normalized, in which case `normalization` records the
// scales.
struct Dataset {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> values;
    DataMode mode = DataMode::Force;
    ProblemKind problem = ProblemKind::Elastic;
    std::string provenance = "analytical";
    std::optional<double> lambda, mu, sigma_y;  // generating material, when known
    NormalizationRecord normalization;

    std::size_t rows() const { return values.empty() ? 0 : values.front().size(); }
    bool has(const std::string& column) const;
    const std::vector<double>& col(const std::string& column) const;
    std::vector<double>& col(const std::string& column);
    void add_column(const std::string& column, std::vector<double> v);
};

// n_x * n_y points, uniformly spaced, x varying fastest.
std::vector<std::pair<double, double>> sample_grid(const GridSpec& spec);

// Manufactured-solution dataset: exact displacements and stresses on the grid;
// force-complete mode adds the exact body forces, stress-complete leaves them
// out (to be recovered by central_difference_forces).
Dataset generate_elastic_dataset(const GridSpec& spec, double lambda, double mu, double Q,
                                 DataMode mode);

// Homogeneous plane-strain elastoplastic state: affine displacements realizing
// the given total strain, constant stresses from a radial-return update, zero
// body forces.
Dataset generate_plastic_dataset(const GridSpec& spec, double lambda, double mu,
                                 double sigma_y, double exx, double eyy, double exy);

// Recover body forces f_i = -sigma_ij,j from gridded stresses: second-order
// central differences inside, one-sided second-order stencils on the edges.
// Returns a copy with fx, fy columns filled in.
Dataset central_difference_forces(const Dataset& stress_data);

// Tensor-product piecewise-cubic (4-point Lagrange) interpolation of every
// non-coordinate column onto the target grid. Exact on polynomials of degree
// at most 3 per axis; the target must lie inside the source bounding box.
Dataset interpolate_to_grid(const Dataset& source, const GridSpec& target);

// CSV with one header row plus a ".meta.json" sidecar carrying mode, problem,
// material and normalization. Values round-trip exactly.
Dataset load_dataset(const std::string& path);
void save_dataset(const Dataset& d, const std::string& path);

// Scale every field column (not x, y, mu) by its max absolute value; an
// all-zero column gets scale 1. The record is also stamped on the result.
std::pair<Dataset, NormalizationRecord> normalize(const Dataset& d);
// Scale a raw dataset by a previously recorded set of scales (used when new
// data must be comparable to an existing checkpoint).
Dataset apply_normalization(const Dataset& d, const NormalizationRecord& record);
Dataset denormalize(const Dataset& d, const NormalizationRecord& record);

// Concatenate per-mu datasets into one table with a mu input column. Every
// part must declare its mu and agree on columns, mode and problem.
Dataset make_surrogate_dataset(const std::vector<Dataset>& parts);

}  // namespace elastinet
