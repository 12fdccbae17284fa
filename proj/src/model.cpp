#include "g3dgen/model.hpp"

#include <cmath>
#include <stdexcept>

namespace g3dgen {

void ModelConfig::validate() const {
    if (n_features < 1 || n_interactions < 0)
        throw std::invalid_argument("model config: bad feature or block count");
    if (type_mlp_widths.empty() || dist_mlp_widths.empty())
        throw std::invalid_argument("model config: empty head widths");
    if (type_mlp_widths.back() != 1)
        throw std::invalid_argument("model config: type head must end in width 1");
    if (dist_mlp_widths.back() != bins.n_bins)
        throw std::invalid_argument("model config: distance head must end in n_bins");
    if (rbf.n < 2 || bins.n_bins < 1 || bins.bin_width <= 0.0)
        throw std::invalid_argument("model config: malformed basis or bin spec");
}

int ParamStore::add(const std::string& name, long rows, long cols) {
    if (has(name))
        throw std::invalid_argument("duplicate parameter name: " + name);
    if (rows < 1 || cols < 1)
        throw std::invalid_argument("parameter must be non-empty: " + name);
    names_.push_back(name);
    tensors_.push_back(Matrix::Zero(rows, cols));
    return count() - 1;
}

int ParamStore::index_of(const std::string& name) const {
    for (int i = 0; i < count(); ++i) {
        if (names_[i] == name)
            return i;
    }
    return -1;
}

Matrix& ParamStore::at(const std::string& name) {
    int i = index_of(name);
    if (i < 0)
        throw std::invalid_argument("unknown parameter: " + name);
    return tensors_[i];
}

const Matrix& ParamStore::at(const std::string& name) const {
    int i = index_of(name);
    if (i < 0)
        throw std::invalid_argument("unknown parameter: " + name);
    return tensors_[i];
}

long ParamStore::total_size() const {
    long n = 0;
    for (const auto& t : tensors_)
        n += t.size();
    return n;
}

void ParamStore::set_zero() {
    for (auto& t : tensors_)
        t.setZero();
}

ParamStore ParamStore::zeros_like(const ParamStore& other) {
    ParamStore out;
    for (int i = 0; i < other.count(); ++i)
        out.add(other.name(i), other.tensor(i).rows(), other.tensor(i).cols());
    return out;
}

void ParamBinding::harvest(const Tape& tape, ParamStore& sink, double scale) const {
    for (int i = 0; i < store_->count(); ++i) {
        if (vars_[i].id < 0)
            continue;
        const Matrix& g = tape.grad(vars_[i]);
        if (g.size() != 0)
            sink.tensor(i) += scale * g;
    }
}

long GridDistribution::sample(RngStream& rng) const {
    double u = rng.uniform();
    double acc = 0.0;
    long n = probs.size();
    for (long c = 0; c < n; ++c) {
        acc += probs(c);
        if (u < acc)
            return c;
    }
    return n - 1;
}

long GridDistribution::argmax() const {
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return static_cast<long>(best);
}

Model::Model(TypeVocabulary vocab, ModelConfig config)
    : vocab_(std::move(vocab)), config_(std::move(config)) {
    config_.validate();
    int f = config_.n_features;
    params_.add("embedding", vocab_.n_codes(), f);
    for (int k = 0; k < config_.n_interactions; ++k) {
        std::string p = "block" + std::to_string(k) + ".";
        params_.add(p + "filter1.w", config_.rbf.n, f);
        params_.add(p + "filter1.b", 1, f);
        params_.add(p + "filter2.w", f, f);
        params_.add(p + "filter2.b", 1, f);
        params_.add(p + "in.w", f, f);
        params_.add(p + "in.b", 1, f);
        params_.add(p + "mid.w", f, f);
        params_.add(p + "mid.b", 1, f);
        params_.add(p + "out.w", f, f);
        params_.add(p + "out.b", 1, f);
    }
    auto add_mlp = [&](const std::string& prefix, const std::vector<int>& widths) {
        int in = f;
        for (size_t i = 0; i < widths.size(); ++i) {
            std::string p = prefix + std::to_string(i) + ".";
            params_.add(p + "w", in, widths[i]);
            params_.add(p + "b", 1, widths[i]);
            in = widths[i];
        }
    };
    add_mlp("type_mlp.", config_.type_mlp_widths);
    add_mlp("dist_mlp.", config_.dist_mlp_widths);
}

void Model::init_params(RngStream& rng) {
    for (int i = 0; i < params_.count(); ++i) {
        Matrix& t = params_.tensor(i);
        const std::string& name = params_.name(i);
        if (name == "embedding") {
            for (long r = 0; r < t.rows(); ++r)
                for (long c = 0; c < t.cols(); ++c)
                    t(r, c) = rng.normal();
        } else if (name.ends_with(".w")) {
            double bound = 1.0 / std::sqrt(static_cast<double>(t.rows()));
            for (long r = 0; r < t.rows(); ++r)
                for (long c = 0; c < t.cols(); ++c)
                    t(r, c) = rng.uniform_range(-bound, bound);
        } else {
            t.setZero();
        }
    }
}

Var Model::embed_var(Tape& t, ParamBinding& b, const std::vector<int>& types) const {
    for (int code : types) {
        if (code < 0 || code >= vocab_.n_codes())
            throw std::invalid_argument("embed: unknown type code " + std::to_string(code));
    }
    return t.gather_rows(b.leaf("embedding"), types);
}

Var Model::mlp_var(Tape& t, ParamBinding& b, Var x, const std::string& prefix,
                   size_t n_layers) const {
    for (size_t i = 0; i < n_layers; ++i) {
        std::string p = prefix + std::to_string(i) + ".";
        x = t.dense(x, b.leaf(p + "w"), b.leaf(p + "b"));
        if (i + 1 < n_layers)
            x = t.ssp(x);
    }
    return x;
}

Var Model::encode_var(Tape& t, ParamBinding& b, const PointSet& ps) const {
    int n = ps.size();
    if (n == 0)
        throw std::invalid_argument("encode: empty point set");
    Var x = embed_var(t, b, ps.types);

    long n_pairs = static_cast<long>(n) * (n - 1) / 2;
    Matrix rbf_rows(n_pairs, config_.rbf.n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double d = (ps.positions[i] - ps.positions[j]).norm();
            rbf_rows.row(pair_row(i, j, n)) = rbf_expand(d, config_.rbf).transpose();
        }
    }
    Var rbf_const = t.constant(std::move(rbf_rows));

    for (int k = 0; k < config_.n_interactions; ++k) {
        std::string p = "block" + std::to_string(k) + ".";
        Var f = t.dense(rbf_const, b.leaf(p + "filter1.w"), b.leaf(p + "filter1.b"));
        f = t.ssp(f);
        f = t.dense(f, b.leaf(p + "filter2.w"), b.leaf(p + "filter2.b"));
        Var v = t.dense(x, b.leaf(p + "in.w"), b.leaf(p + "in.b"));
        Var m = t.pair_conv(v, f, n);
        Var h = t.dense(m, b.leaf(p + "mid.w"), b.leaf(p + "mid.b"));
        h = t.ssp(h);
        h = t.dense(h, b.leaf(p + "out.w"), b.leaf(p + "out.b"));
        x = t.add(x, h);
    }
    return x;
}

Var Model::type_log_probs_var(Tape& t, ParamBinding& b, Var x) const {
    Var emb = b.leaf("embedding");
    std::vector<Var> scores;
    scores.reserve(vocab_.n_predictable());
    for (int k = 0; k < vocab_.n_predictable(); ++k) {
        Var xe = t.mul_rowbcast(x, t.row(emb, k));
        scores.push_back(mlp_var(t, b, xe, "type_mlp.", config_.type_mlp_widths.size()));
    }
    return t.log_softmax_rows(t.concat_cols(scores));
}

Var Model::type_log_dist_var(Tape& t, ParamBinding& b, Var x) const {
    Var per_point = type_log_probs_var(t, b, x);
    return t.log_softmax_rows(t.col_sum(per_point));
}

Var Model::distance_log_dists_var(Tape& t, ParamBinding& b, Var x, int element_code) const {
    if (!vocab_.is_element(element_code))
        throw std::invalid_argument("distance head: type code " + std::to_string(element_code) +
                                    " is not an element");
    Var xe = t.mul_rowbcast(x, t.row(b.leaf("embedding"), element_code));
    Var logits = mlp_var(t, b, xe, "dist_mlp.", config_.dist_mlp_widths.size());
    return t.log_softmax_rows(logits);
}

Matrix Model::embed_types(const std::vector<int>& types) const {
    const Matrix& emb = params_.at("embedding");
    Matrix out(static_cast<long>(types.size()), emb.cols());
    for (size_t i = 0; i < types.size(); ++i) {
        int code = types[i];
        if (code < 0 || code >= vocab_.n_codes())
            throw std::invalid_argument("embed: unknown type code " + std::to_string(code));
        out.row(static_cast<long>(i)) = emb.row(code);
    }
    return out;
}

Matrix Model::encode(const PointSet& ps) const {
    Tape t;
    ParamBinding b(t, params_);
    return t.value(encode_var(t, b, ps));
}

Matrix Model::interaction_block(const Matrix& x, const Matrix& distances, int block) const {
    if (block < 0 || block >= config_.n_interactions)
        throw std::out_of_range("interaction block index out of range");
    int n = static_cast<int>(x.rows());
    if (distances.rows() != n || distances.cols() != n)
        throw std::invalid_argument("interaction block: distance matrix shape mismatch");

    Tape t;
    ParamBinding b(t, params_);
    long n_pairs = static_cast<long>(n) * (n - 1) / 2;
    Matrix rbf_rows(n_pairs, config_.rbf.n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j)
            rbf_rows.row(pair_row(i, j, n)) = rbf_expand(distances(i, j), config_.rbf).transpose();

    std::string p = "block" + std::to_string(block) + ".";
    Var rbf_const = t.constant(std::move(rbf_rows));
    Var f = t.dense(rbf_const, b.leaf(p + "filter1.w"), b.leaf(p + "filter1.b"));
    f = t.ssp(f);
    f = t.dense(f, b.leaf(p + "filter2.w"), b.leaf(p + "filter2.b"));
    Var xv = t.constant(x);
    Var v = t.dense(xv, b.leaf(p + "in.w"), b.leaf(p + "in.b"));
    Var m = t.pair_conv(v, f, n);
    Var h = t.dense(m, b.leaf(p + "mid.w"), b.leaf(p + "mid.b"));
    h = t.ssp(h);
    h = t.dense(h, b.leaf(p + "out.w"), b.leaf(p + "out.b"));
    return t.value(t.add(xv, h));
}

Var Model::features_to_var(Tape& t, const Matrix& x) const {
    if (x.cols() != config_.n_features)
        throw std::invalid_argument("features: column count != n_features");
    return t.constant(x);
}

Matrix Model::per_point_type_probs(const Matrix& x) const {
    Tape t;
    ParamBinding b(t, params_);
    Matrix lp = t.value(type_log_probs_var(t, b, features_to_var(t, x)));
    return lp.array().exp();
}

Eigen::VectorXd Model::type_distribution(const Matrix& x) const {
    if (x.rows() == 0)
        throw std::invalid_argument("type distribution: empty feature matrix");
    Tape t;
    ParamBinding b(t, params_);
    Matrix lp = t.value(type_log_dist_var(t, b, features_to_var(t, x)));
    return lp.row(0).array().exp().transpose();
}

Matrix Model::distance_distributions(const Matrix& x, int element_code) const {
    Tape t;
    ParamBinding b(t, params_);
    Matrix lp = t.value(distance_log_dists_var(t, b, features_to_var(t, x), element_code));
    return lp.array().exp();
}

GridDistribution position_distribution(const PointSet& ps, const Matrix& dists,
                                       const CandidateGrid& grid, double temperature,
                                       const DistanceBinSpec& bins) {
    if (temperature <= 0.0)
        throw std::invalid_argument("position distribution: temperature must be positive");
    int n = ps.size();
    if (n == 0 || dists.rows() != n || dists.cols() != bins.n_bins)
        throw std::invalid_argument("position distribution: context/distribution shape mismatch");

    // log p floored far below any reachable softmax output, only to keep
    // exact zeros out of the sum
    Matrix logd = dists.array().max(1e-300).log();

    long n_cells = grid.n_cells();
    GridDistribution out;
    out.grid = grid;
    out.temperature = temperature;
    out.log_weights.resize(n_cells);

    int axis = grid.cells_per_axis();
    long c = 0;
    for (int i = 0; i < axis; ++i) {
        for (int j = 0; j < axis; ++j) {
            for (int k = 0; k < axis; ++k, ++c) {
                Vec3 offset(grid.step * (i - grid.half), grid.step * (j - grid.half),
                            grid.step * (k - grid.half));
                Vec3 pos = grid.center + grid.orientation * offset;
                double acc = 0.0;
                for (int p = 0; p < n; ++p) {
                    double d = (pos - ps.positions[p]).norm();
                    acc += logd(p, nearest_bin(d, bins));
                }
                out.log_weights(c) = acc;
            }
        }
    }

    double m = out.log_weights.maxCoeff();
    out.probs = ((out.log_weights.array() - m) / temperature).exp();
    out.probs /= out.probs.sum();
    return out;
}

} // namespace g3dgen
