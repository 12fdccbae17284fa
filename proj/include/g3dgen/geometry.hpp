#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

namespace g3dgen {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Matrix = Eigen::MatrixXd;

// Atom-type vocabulary: element symbols plus three sentinel types. Codes are
// dense indices into the embedding table:
//   [0, n_elements)   elements, in construction order
//   n_elements        stop sentinel (predictable, never placed)
//   n_elements + 1    focus token
//   n_elements + 2    origin token
// Elements and stop can be sampled as a next type; focus/origin cannot.
class TypeVocabulary {
public:
    TypeVocabulary() : TypeVocabulary({"H", "C", "N", "O", "F"}, true) {}
    TypeVocabulary(std::vector<std::string> elements, bool use_origin_token);

    int n_elements() const { return n_elements_; }
    int n_predictable() const { return n_elements_ + 1; }
    int n_codes() const { return n_elements_ + 3; }

    int stop_code() const { return n_elements_; }
    int focus_code() const { return n_elements_ + 1; }
    int origin_code() const { return n_elements_ + 2; }

    bool is_element(int code) const { return code >= 0 && code < n_elements_; }
    bool is_token(int code) const { return code == focus_code() || code == origin_code(); }
    bool is_predictable(int code) const { return code >= 0 && code < n_predictable(); }

    // Throws on unknown symbol.
    int element_code(const std::string& symbol) const;
    const std::string& code_name(int code) const;
    const std::vector<std::string>& elements() const { return element_names_; }

    // When false, the generator and trace builder omit the origin token.
    bool use_origin_token() const { return use_origin_token_; }

    bool operator==(const TypeVocabulary& other) const = default;

private:
    std::vector<std::string> element_names_;
    int n_elements_ = 0;
    bool use_origin_token_ = true;
};

// Ordered 3d points with type codes. The leading token_count entries are
// auxiliary tokens (origin/focus); the remainder are placed atoms.
struct PointSet {
    int token_count = 0;
    std::vector<Vec3> positions;
    std::vector<int> types;

    int size() const { return static_cast<int>(positions.size()); }
    int atom_count() const { return size() - token_count; }

    void add_point(const Vec3& r, int type) {
        positions.push_back(r);
        types.push_back(type);
    }

    // Drops the leading token block.
    PointSet atoms_only() const;

    // Throws std::invalid_argument on any structural violation: size mismatch,
    // out-of-range code, token code in the atom block or vice versa.
    void validate(const TypeVocabulary& vocab) const;
};

// Uniform discretization of distances into n_bins bins of bin_width each,
// centers at (l + 0.5) * bin_width.
struct DistanceBinSpec {
    int n_bins = 300;
    double bin_width = 0.05; // Angstrom

    double center(int l) const { return (l + 0.5) * bin_width; }
    double range() const { return n_bins * bin_width; }

    bool operator==(const DistanceBinSpec&) const = default;
};

// Index of the bin whose center is nearest to d; ties resolve to the lower
// index, out-of-range distances clamp to the first/last bin.
int nearest_bin(double d, const DistanceBinSpec& spec);

// Cubic lattice of candidate positions, symmetric about its center. Cell
// (i,j,k), each component in [-half, half], sits at
//   center + orientation * (step * (i,j,k)).
// orientation stays identity unless the caller rotates the lattice along
// with a rigidly moved context.
struct CandidateGrid {
    Vec3 center = Vec3::Zero();
    double step = 0.05; // Angstrom
    int half = 34;
    Mat3 orientation = Mat3::Identity();

    int cells_per_axis() const { return 2 * half + 1; }
    long n_cells() const {
        long a = cells_per_axis();
        return a * a * a;
    }
    // Flat index order: i outermost, then j, then k.
    Vec3 cell_position(long flat_index) const;
};

// Grid reaching extent (inclusive, with float slack) out from center along
// each axis in steps of step.
CandidateGrid build_candidate_grid(const Vec3& center, double extent, double step);

// Symmetric matrix of Euclidean distances, zero diagonal.
Matrix pairwise_distances(const PointSet& points);

// Gaussian radial basis: n centers equally spaced on [r_min, r_max], width
// equal to the center spacing.
struct RadialBasis {
    int n = 25;
    double r_min = 0.0;
    double r_max = 10.0; // Angstrom

    double spacing() const { return (r_max - r_min) / (n - 1); }

    bool operator==(const RadialBasis&) const = default;
};

Eigen::VectorXd rbf_expand(double d, const RadialBasis& basis);

// Minimal RMSD between two equal-length position lists under optimal rigid
// superposition (translation + proper rotation).
double kabsch_rmsd(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

// Same over the atom blocks of two point sets; requires identical type
// sequences.
double kabsch_rmsd(const PointSet& a, const PointSet& b);

} // namespace g3dgen
