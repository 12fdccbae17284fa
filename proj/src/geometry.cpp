#include "g3dgen/geometry.hpp"

#include "g3dgen/elements.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace g3dgen {

TypeVocabulary::TypeVocabulary(std::vector<std::string> elements, bool use_origin_token)
    : element_names_(std::move(elements)),
      n_elements_(static_cast<int>(element_names_.size())),
      use_origin_token_(use_origin_token) {
    if (element_names_.empty())
        throw std::invalid_argument("vocabulary needs at least one element");
    std::set<std::string> seen;
    for (const auto& name : element_names_) {
        if (name.empty() || name == "stop" || name == "focus" || name == "origin")
            throw std::invalid_argument("reserved or empty element name: " + name);
        if (!seen.insert(name).second)
            throw std::invalid_argument("duplicate element name: " + name);
        if (find_element(name) == nullptr)
            throw std::invalid_argument("unknown element symbol: " + name);
    }
}

int TypeVocabulary::element_code(const std::string& symbol) const {
    for (int i = 0; i < n_elements_; ++i) {
        if (element_names_[i] == symbol)
            return i;
    }
    throw std::invalid_argument("symbol not in vocabulary: " + symbol);
}

const std::string& TypeVocabulary::code_name(int code) const {
    static const std::string kStop = "stop", kFocus = "focus", kOrigin = "origin";
    if (is_element(code))
        return element_names_[code];
    if (code == stop_code())
        return kStop;
    if (code == focus_code())
        return kFocus;
    if (code == origin_code())
        return kOrigin;
    throw std::invalid_argument("type code out of range: " + std::to_string(code));
}

PointSet PointSet::atoms_only() const {
    PointSet out;
    out.token_count = 0;
    out.positions.assign(positions.begin() + token_count, positions.end());
    out.types.assign(types.begin() + token_count, types.end());
    return out;
}

void PointSet::validate(const TypeVocabulary& vocab) const {
    if (positions.size() != types.size())
        throw std::invalid_argument("point set: positions/types size mismatch");
    if (token_count < 0 || token_count > size())
        throw std::invalid_argument("point set: token_count out of range");
    for (int i = 0; i < size(); ++i) {
        int t = types[i];
        if (t < 0 || t >= vocab.n_codes() || t == vocab.stop_code())
            throw std::invalid_argument("point set: invalid type code at index " +
                                        std::to_string(i));
        if (i < token_count && !vocab.is_token(t))
            throw std::invalid_argument("point set: non-token type in token block at index " +
                                        std::to_string(i));
        if (i >= token_count && vocab.is_token(t))
            throw std::invalid_argument("point set: token type in atom block at index " +
                                        std::to_string(i));
    }
}

int nearest_bin(double d, const DistanceBinSpec& spec) {
    if (spec.n_bins <= 0 || spec.bin_width <= 0.0)
        throw std::invalid_argument("nearest_bin: malformed bin spec");
    double t = d / spec.bin_width;
    double edge = std::round(t);
    int l0;
    if (std::abs(t - edge) < 1e-9) {
        // d sits on (or within fp noise of) a shared bin edge, where the two
        // adjacent centers are equidistant. Resolve to the lower bin via the
        // rounded edge index so the result is stable under sub-tolerance
        // recomputation error (e.g. the same distance measured in a rotated
        // frame must land in the same bin).
        l0 = static_cast<int>(edge) - 1;
    } else {
        // strictly inside bin floor(t), whose center is nearest by construction
        l0 = static_cast<int>(std::floor(t));
    }
    return std::clamp(l0, 0, spec.n_bins - 1);
}

Vec3 CandidateGrid::cell_position(long flat_index) const {
    long axis = cells_per_axis();
    if (flat_index < 0 || flat_index >= n_cells())
        throw std::out_of_range("grid cell index out of range");
    long k = flat_index % axis;
    long j = (flat_index / axis) % axis;
    long i = flat_index / (axis * axis);
    Vec3 offset(step * (i - half), step * (j - half), step * (k - half));
    return center + orientation * offset;
}

CandidateGrid build_candidate_grid(const Vec3& center, double extent, double step) {
    if (step <= 0.0 || extent < 0.0)
        throw std::invalid_argument("candidate grid: step must be positive, extent non-negative");
    CandidateGrid grid;
    grid.center = center;
    grid.step = step;
    grid.half = static_cast<int>(std::floor(extent / step + 1e-9));
    return grid;
}

Matrix pairwise_distances(const PointSet& points) {
    int n = points.size();
    Matrix d = Matrix::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double dist = (points.positions[i] - points.positions[j]).norm();
            d(i, j) = dist;
            d(j, i) = dist;
        }
    }
    return d;
}

Eigen::VectorXd rbf_expand(double d, const RadialBasis& basis) {
    if (basis.n < 2)
        throw std::invalid_argument("radial basis needs at least two centers");
    double gamma = basis.spacing();
    Eigen::VectorXd out(basis.n);
    for (int i = 0; i < basis.n; ++i) {
        double mu = basis.r_min + i * gamma;
        double x = (d - mu) / gamma;
        out(i) = std::exp(-0.5 * x * x);
    }
    return out;
}

double kabsch_rmsd(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    int n = static_cast<int>(a.size());
    if (n != static_cast<int>(b.size()) || n == 0)
        throw std::invalid_argument("kabsch_rmsd: point counts differ or empty");

    Eigen::Matrix3Xd p(3, n), q(3, n);
    for (int i = 0; i < n; ++i) {
        p.col(i) = a[i];
        q.col(i) = b[i];
    }
    Vec3 pc = p.rowwise().mean();
    Vec3 qc = q.rowwise().mean();
    p.colwise() -= pc;
    q.colwise() -= qc;

    Mat3 h = p * q.transpose();
    Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 u = svd.matrixU();
    Mat3 v = svd.matrixV();
    Mat3 d = Mat3::Identity();
    d(2, 2) = ((v * u.transpose()).determinant() < 0.0) ? -1.0 : 1.0;
    Mat3 r = v * d * u.transpose();

    double sq = (r * p - q).squaredNorm() / n;
    return std::sqrt(sq);
}

double kabsch_rmsd(const PointSet& a, const PointSet& b) {
    PointSet pa = a.atoms_only();
    PointSet pb = b.atoms_only();
    if (pa.types != pb.types)
        throw std::invalid_argument("kabsch_rmsd: type sequences differ");
    return kabsch_rmsd(pa.positions, pb.positions);
}

} // namespace g3dgen
