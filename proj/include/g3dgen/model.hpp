#pragma once

#include "g3dgen/autodiff.hpp"
#include "g3dgen/geometry.hpp"
#include "g3dgen/rng.hpp"

#include <string>
#include <vector>

namespace g3dgen {

struct ModelConfig {
    int n_features = 128;
    int n_interactions = 9;
    RadialBasis rbf{};
    DistanceBinSpec bins{};
    // Output widths of the five dense layers in each head MLP; shifted
    // softplus between layers, none after the last. Inputs are n_features.
    std::vector<int> type_mlp_widths = {128, 96, 64, 32, 1};
    std::vector<int> dist_mlp_widths = {128, 171, 214, 257, 300};

    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

// Named parameter tensors with a stable registration order. Shapes are fixed
// at registration; lookups by name or dense index.
class ParamStore {
public:
    int add(const std::string& name, long rows, long cols);

    bool has(const std::string& name) const { return index_of(name) >= 0; }
    int index_of(const std::string& name) const;

    Matrix& at(const std::string& name);
    const Matrix& at(const std::string& name) const;

    int count() const { return static_cast<int>(tensors_.size()); }
    const std::string& name(int i) const { return names_[i]; }
    Matrix& tensor(int i) { return tensors_[i]; }
    const Matrix& tensor(int i) const { return tensors_[i]; }

    long total_size() const;
    void set_zero();

    // Same names and shapes, zero values.
    static ParamStore zeros_like(const ParamStore& other);

private:
    std::vector<std::string> names_;
    std::vector<Matrix> tensors_;
};

// Per-tape view of a ParamStore: registers tensors as differentiable leaves
// on first use and maps them back for gradient harvesting.
class ParamBinding {
public:
    ParamBinding(Tape& tape, const ParamStore& store)
        : tape_(&tape), store_(&store), vars_(store.count(), Var{-1}) {}

    Var leaf(int param_index) {
        Var& v = vars_[param_index];
        if (v.id < 0)
            v = tape_->leaf(store_->tensor(param_index));
        return v;
    }

    Var leaf(const std::string& name) { return leaf(store_->index_of(name)); }

    // Adds scale * d(loss)/d(tensor) into the matching tensors of sink.
    void harvest(const Tape& tape, ParamStore& sink, double scale) const;

private:
    Tape* tape_;
    const ParamStore* store_;
    std::vector<Var> vars_;
};

// Normalized probabilities over the cells of a candidate grid.
struct GridDistribution {
    CandidateGrid grid;
    double temperature = 0.1;
    Eigen::VectorXd log_weights; // unnormalized, one per cell
    Eigen::VectorXd probs;       // sums to 1

    long sample(RngStream& rng) const;
    long argmax() const;
};

// Feature extractor plus prediction heads over a shared embedding table.
class Model {
public:
    Model(TypeVocabulary vocab, ModelConfig config);

    const TypeVocabulary& vocab() const { return vocab_; }
    const ModelConfig& config() const { return config_; }
    ParamStore& params() { return params_; }
    const ParamStore& params() const { return params_; }

    // Dense weights uniform in ±1/sqrt(fan_in), embeddings standard normal,
    // biases zero; draw order follows tensor registration order.
    void init_params(RngStream& rng);

    // ---- graph builders (differentiable path) ----
    Var embed_var(Tape& t, ParamBinding& b, const std::vector<int>& types) const;
    Var encode_var(Tape& t, ParamBinding& b, const PointSet& ps) const;
    // Per-point log p(type | x_j): rows are log-softmax over predictable types.
    Var type_log_probs_var(Tape& t, ParamBinding& b, Var x) const;
    // Aggregated log p(type): normalized product of per-point distributions.
    Var type_log_dist_var(Tape& t, ParamBinding& b, Var x) const;
    // Per-point log distance distributions for a sampled element.
    Var distance_log_dists_var(Tape& t, ParamBinding& b, Var x, int element_code) const;

    // ---- value-level surface ----
    Matrix embed_types(const std::vector<int>& types) const;
    Matrix encode(const PointSet& ps) const;
    Matrix interaction_block(const Matrix& x, const Matrix& distances, int block) const;
    // Rows softmax-normalized over predictable types.
    Matrix per_point_type_probs(const Matrix& x) const;
    Eigen::VectorXd type_distribution(const Matrix& x) const;
    // Rows softmax-normalized over distance bins.
    Matrix distance_distributions(const Matrix& x, int element_code) const;

private:
    Var mlp_var(Tape& t, ParamBinding& b, Var x, const std::string& prefix,
                size_t n_layers) const;
    Var features_to_var(Tape& t, const Matrix& x) const;

    TypeVocabulary vocab_;
    ModelConfig config_;
    ParamStore params_;
};

// Grid-cell probabilities from per-context-point distance distributions:
//   logw(c) = sum_j log dists(j, nearest_bin(|cell_c - r_j|))
//   probs = softmax(logw / temperature), max-subtracted.
// dists rows are probability vectors over bins, one per context point.
GridDistribution position_distribution(const PointSet& ps, const Matrix& dists,
                                       const CandidateGrid& grid, double temperature,
                                       const DistanceBinSpec& bins);

} // namespace g3dgen
