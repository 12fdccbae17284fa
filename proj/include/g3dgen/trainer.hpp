#pragma once

#include "g3dgen/chemeval.hpp"
#include "g3dgen/dataio.hpp"
#include "g3dgen/model.hpp"
#include "g3dgen/rng.hpp"

#include <limits>
#include <string>
#include <vector>

namespace g3dgen {

// One supervised placement decision: predict target_type (and, for elements,
// the distance labels to every context point) from the context.
struct TraceStep {
    PointSet context;
    int target_type = -1; // predictable code (element or stop)
    Vec3 target_position = Vec3::Zero();
    Matrix target_dists; // context points x n_bins; empty for stop targets

    // Source-molecule bookkeeping (indices into the molecule's atom list).
    int focus_atom = -1;  // -1 when the focus is the step-1 token
    int target_atom = -1; // -1 for stop steps
};

struct StepLabels {
    Eigen::VectorXd q_type; // one-hot over predictable types
    Matrix q_dist;          // empty for stop targets
};

// Distance labels are normalized Gaussians over bin centers,
// exp(-(d - mu_l)^2 / gamma), one row per context point.
StepLabels make_labels(const PointSet& context, int target_type, const Vec3& target_position,
                       const TypeVocabulary& vocab, double gamma, const DistanceBinSpec& bins);

// Random placement trace: the first atom is the one nearest the center of
// mass; afterwards a uniformly random placed-but-unfinished atom is focused
// and its unplaced bond neighbor nearest the center of mass is placed, or a
// stop is emitted and the focus marked finished. 2 * n_atoms steps total.
std::vector<TraceStep> sample_trace(const MoleculeRecord& mol, const BondGraph& bonds,
                                    const TypeVocabulary& vocab, const DistanceBinSpec& bins,
                                    double gamma, RngStream& rng);

// Type cross-entropy plus mean per-context-point distance cross-entropy;
// probabilities floored at 1e-12 inside the logs.
double step_loss(const Eigen::VectorXd& p_type, const Eigen::VectorXd& q_type,
                 const Matrix& p_dist, const Matrix& q_dist);

// Entropy of the step's labels: the lower bound of its reachable loss.
double step_label_entropy(const TraceStep& step);

// Differentiable loss of one step under the model's current parameters.
Var build_step_loss(Tape& t, ParamBinding& b, const Model& model, const TraceStep& step);
double eval_step_loss(const Model& model, const TraceStep& step);

struct TrainingConfig {
    double lr0 = 1e-4;
    int plateau_patience = 10; // epochs without validation improvement
    double lr_decay = 0.5;
    double lr_stop = 1e-6;
    int batch_size = 32; // steps per update
    uint64_t seed = 0;
    double gamma = 0.005; // distance label width, 0.1 * bin_width
    int max_epochs = 1000;
    // Optional early exit: stop once train_loss - label_entropy < stop_excess.
    double stop_excess = std::numeric_limits<double>::quiet_NaN();

    void validate() const;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double lr = 0.0;
    double label_entropy = 0.0; // mean over the epoch's steps
};

class AdamOptimizer {
public:
    explicit AdamOptimizer(const ParamStore& shape)
        : m_(ParamStore::zeros_like(shape)), v_(ParamStore::zeros_like(shape)) {}

    void step(ParamStore& params, const ParamStore& grads, double lr);

    long steps() const { return t_; }
    ParamStore& first_moment() { return m_; }
    ParamStore& second_moment() { return v_; }
    void restore(ParamStore m, ParamStore v, long t);

private:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    ParamStore m_, v_;
    long t_ = 0;
};

// Halves the rate after `patience` consecutive epochs without improvement.
class PlateauScheduler {
public:
    PlateauScheduler(double lr0, int patience, double decay)
        : lr_(lr0), patience_(patience), decay_(decay) {}

    double lr() const { return lr_; }

    // Returns true when val_loss improves on the best seen.
    bool observe(double val_loss);

private:
    double lr_;
    int patience_;
    double decay_;
    double best_ = std::numeric_limits<double>::infinity();
    int since_best_ = 0;
};

struct Checkpoint {
    int format_version = 1;
    TypeVocabulary vocab;
    ModelConfig config;
    TrainingConfig train_config;
    ParamStore params;
    ParamStore adam_m, adam_v;
    long adam_steps = 0;
    int epoch = 0;
    double validation_loss = std::numeric_limits<double>::infinity();

    // Binary container: magic, JSON manifest, raw row-major little-endian
    // doubles. Written atomically (temp file + rename); round-trips bit-exact.
    void save(const std::string& path) const;
    static Checkpoint load(const std::string& path);
};

// Model built from a checkpoint's vocabulary, config, and parameters.
Model model_from_checkpoint(const Checkpoint& ckpt);

struct TrainResult {
    Checkpoint checkpoint; // lowest-validation-loss snapshot
    std::vector<EpochLog> history;
};

// Fresh model trained on the dataset's train split; validation loss uses
// fixed seeded traces of the validation split (train split if empty).
TrainResult train(const Dataset& data, const TypeVocabulary& vocab, const ModelConfig& mcfg,
                  const TrainingConfig& tcfg);

// Same loop, warm-started from the checkpoint with fresh optimizer state.
TrainResult finetune(const Checkpoint& start, const Dataset& data, const TrainingConfig& tcfg);

// Central-difference probe of d(mean step loss)/d(theta) on n_samples
// randomly chosen parameters; returns the max relative error with
// denominator max(|analytic|, |numeric|, 1e-5). The floor sits above the
// intrinsic noise of the difference quotient (loss rounding / 2*eps) so
// that inert or vanishing gradients do not register as disagreement, while
// any genuinely wrong gradient large enough to matter still scores near 1.
// fault_scale multiplies the analytic gradient (calibration hook for the
// check itself).
double finite_difference_check(Model& model, const std::vector<TraceStep>& steps, int n_samples,
                               double eps, RngStream& rng, double fault_scale = 1.0);

} // namespace g3dgen
