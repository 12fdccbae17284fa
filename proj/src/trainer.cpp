#include "g3dgen/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace g3dgen {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

StepLabels make_labels(const PointSet& context, int target_type, const Vec3& target_position,
                       const TypeVocabulary& vocab, double gamma, const DistanceBinSpec& bins) {
    if (gamma <= 0.0)
        throw std::invalid_argument("make_labels: gamma must be positive");
    if (!vocab.is_predictable(target_type))
        throw std::invalid_argument("make_labels: target type not predictable");

    StepLabels out;
    out.q_type = Eigen::VectorXd::Zero(vocab.n_predictable());
    out.q_type(target_type) = 1.0;
    if (target_type == vocab.stop_code())
        return out;

    int m = context.size();
    if (m == 0)
        throw std::invalid_argument("make_labels: empty context");
    out.q_dist.resize(m, bins.n_bins);
    for (int j = 0; j < m; ++j) {
        double d = (target_position - context.positions[j]).norm();
        for (int l = 0; l < bins.n_bins; ++l) {
            double x = d - bins.center(l);
            out.q_dist(j, l) = std::exp(-x * x / gamma);
        }
        double s = out.q_dist.row(j).sum();
        if (s > 0.0) {
            out.q_dist.row(j) /= s;
        } else {
            // Distance beyond every center by enough to underflow: all the
            // mass goes to the nearest (clamped) bin.
            out.q_dist.row(j).setZero();
            out.q_dist(j, nearest_bin(d, bins)) = 1.0;
        }
    }
    return out;
}

std::vector<TraceStep> sample_trace(const MoleculeRecord& mol, const BondGraph& bonds,
                                    const TypeVocabulary& vocab, const DistanceBinSpec& bins,
                                    double gamma, RngStream& rng) {
    int n = mol.n_atoms();
    if (n == 0)
        throw std::invalid_argument("sample_trace: empty molecule");
    if (bonds.n_atoms != n)
        throw std::invalid_argument("sample_trace: bond graph size mismatch");
    if (!bonds.connected())
        throw std::invalid_argument("sample_trace: molecule is disconnected");

    std::vector<int> codes(n);
    for (int i = 0; i < n; ++i)
        codes[i] = vocab.element_code(mol.elements[i]);

    Vec3 com = center_of_mass(mol);
    auto nearest_to_com = [&](const std::vector<int>& among) {
        int best = among[0];
        double best_d = std::numeric_limits<double>::infinity();
        for (int i : among) {
            double d = (mol.positions[i] - com).norm();
            if (d < best_d) { // strict: ties keep the lowest index
                best_d = d;
                best = i;
            }
        }
        return best;
    };

    auto adj = bonds.adjacency();
    std::vector<bool> placed(n, false), finished(n, false);
    std::vector<int> placement;
    std::vector<TraceStep> steps;

    auto build_context = [&](int focus) {
        PointSet ctx;
        Vec3 fpos = focus < 0 ? com : mol.positions[focus];
        ctx.add_point(fpos, vocab.focus_code());
        if (vocab.use_origin_token())
            ctx.add_point(com, vocab.origin_code());
        ctx.token_count = ctx.size();
        for (int idx : placement)
            ctx.add_point(mol.positions[idx], codes[idx]);
        return ctx;
    };

    auto push_step = [&](int focus, int target_atom) {
        TraceStep st;
        st.context = build_context(focus);
        st.focus_atom = focus;
        st.target_atom = target_atom;
        if (target_atom >= 0) {
            st.target_type = codes[target_atom];
            st.target_position = mol.positions[target_atom];
            StepLabels lab = make_labels(st.context, st.target_type, st.target_position, vocab,
                                         gamma, bins);
            st.target_dists = std::move(lab.q_dist);
        } else {
            st.target_type = vocab.stop_code();
        }
        steps.push_back(std::move(st));
    };

    {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        int first = nearest_to_com(all);
        push_step(-1, first);
        placed[first] = true;
        placement.push_back(first);
    }

    while (true) {
        std::vector<int> open;
        for (int i = 0; i < n; ++i)
            if (placed[i] && !finished[i])
                open.push_back(i);
        if (open.empty())
            break;
        int focus = open[rng.uniform_int(open.size())];

        std::vector<int> unplaced_nbrs;
        for (auto [u, o] : adj[focus])
            if (!placed[u])
                unplaced_nbrs.push_back(u);

        if (!unplaced_nbrs.empty()) {
            int target = nearest_to_com(unplaced_nbrs);
            push_step(focus, target);
            placed[target] = true;
            placement.push_back(target);
        } else {
            push_step(focus, -1);
            finished[focus] = true;
        }
    }
    return steps;
}

double step_loss(const Eigen::VectorXd& p_type, const Eigen::VectorXd& q_type,
                 const Matrix& p_dist, const Matrix& q_dist) {
    if (p_type.size() != q_type.size())
        throw std::invalid_argument("step_loss: type vector size mismatch");
    double loss = 0.0;
    for (long k = 0; k < q_type.size(); ++k) {
        if (q_type(k) > 0.0)
            loss -= q_type(k) * std::log(std::max(p_type(k), 1e-12));
    }
    if (q_dist.size() != 0) {
        if (p_dist.rows() != q_dist.rows() || p_dist.cols() != q_dist.cols())
            throw std::invalid_argument("step_loss: distance matrix shape mismatch");
        double acc = 0.0;
        for (long j = 0; j < q_dist.rows(); ++j)
            for (long l = 0; l < q_dist.cols(); ++l)
                if (q_dist(j, l) > 0.0)
                    acc -= q_dist(j, l) * std::log(std::max(p_dist(j, l), 1e-12));
        loss += acc / static_cast<double>(q_dist.rows());
    }
    return loss;
}

double step_label_entropy(const TraceStep& step) {
    if (step.target_dists.size() == 0)
        return 0.0; // one-hot type label carries no entropy
    double acc = 0.0;
    for (long j = 0; j < step.target_dists.rows(); ++j)
        for (long l = 0; l < step.target_dists.cols(); ++l) {
            double q = step.target_dists(j, l);
            if (q > 0.0)
                acc -= q * std::log(q);
        }
    return acc / static_cast<double>(step.target_dists.rows());
}

Var build_step_loss(Tape& t, ParamBinding& b, const Model& model, const TraceStep& step) {
    const TypeVocabulary& vocab = model.vocab();
    if (!vocab.is_predictable(step.target_type))
        throw std::invalid_argument("step loss: target type not predictable");
    Var x = model.encode_var(t, b, step.context);
    Var tld = model.type_log_dist_var(t, b, x);
    Matrix wt = Matrix::Zero(1, vocab.n_predictable());
    wt(0, step.target_type) = -1.0;
    Var loss = t.weighted_sum(tld, std::move(wt));
    if (step.target_type != vocab.stop_code()) {
        if (step.target_dists.rows() != step.context.size())
            throw std::invalid_argument("step loss: label rows != context size");
        Var dld = model.distance_log_dists_var(t, b, x, step.target_type);
        Matrix wd = -step.target_dists / static_cast<double>(step.target_dists.rows());
        loss = t.add(loss, t.weighted_sum(dld, std::move(wd)));
    }
    return loss;
}

double eval_step_loss(const Model& model, const TraceStep& step) {
    Tape t;
    ParamBinding b(t, model.params());
    return t.value(build_step_loss(t, b, model, step))(0, 0);
}

void TrainingConfig::validate() const {
    if (!(lr0 > lr_stop && lr_stop > 0.0))
        throw std::invalid_argument("training config: need lr0 > lr_stop > 0");
    if (!(lr_decay > 0.0 && lr_decay < 1.0))
        throw std::invalid_argument("training config: need 0 < lr_decay < 1");
    if (batch_size < 1 || plateau_patience < 1 || max_epochs < 0)
        throw std::invalid_argument("training config: bad batch size, patience, or epoch cap");
    if (gamma <= 0.0)
        throw std::invalid_argument("training config: gamma must be positive");
}

void AdamOptimizer::step(ParamStore& params, const ParamStore& grads, double lr) {
    if (params.count() != m_.count() || grads.count() != m_.count())
        throw std::invalid_argument("adam: parameter store shape mismatch");
    ++t_;
    double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (int i = 0; i < params.count(); ++i) {
        Matrix& m = m_.tensor(i);
        Matrix& v = v_.tensor(i);
        const Matrix& g = grads.tensor(i);
        m = kBeta1 * m + (1.0 - kBeta1) * g;
        v = kBeta2 * v.array() + (1.0 - kBeta2) * g.array().square();
        params.tensor(i).array() -=
            lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + kEps);
    }
}

void AdamOptimizer::restore(ParamStore m, ParamStore v, long t) {
    if (m.count() != m_.count() || v.count() != v_.count() || t < 0)
        throw std::invalid_argument("adam: bad state restore");
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

bool PlateauScheduler::observe(double val_loss) {
    if (val_loss < best_) {
        best_ = val_loss;
        since_best_ = 0;
        return true;
    }
    if (++since_best_ >= patience_) {
        lr_ *= decay_;
        since_best_ = 0;
    }
    return false;
}

namespace {

void write_raw(std::ofstream& out, const ParamStore& store) {
    for (int i = 0; i < store.count(); ++i) {
        const Matrix& t = store.tensor(i);
        for (long r = 0; r < t.rows(); ++r)
            for (long c = 0; c < t.cols(); ++c) {
                double v = t(r, c);
                out.write(reinterpret_cast<const char*>(&v), sizeof(double));
            }
    }
}

void read_raw(std::ifstream& in, ParamStore& store, const std::string& path) {
    for (int i = 0; i < store.count(); ++i) {
        Matrix& t = store.tensor(i);
        for (long r = 0; r < t.rows(); ++r)
            for (long c = 0; c < t.cols(); ++c) {
                double v = 0.0;
                if (!in.read(reinterpret_cast<char*>(&v), sizeof(double)))
                    throw std::runtime_error("truncated checkpoint: " + path);
                t(r, c) = v;
            }
    }
}

constexpr char kMagic[8] = {'G', '3', 'D', 'C', 'K', 'P', 'T', '\x01'};

} // namespace

void Checkpoint::save(const std::string& path) const {
    json m;
    m["format_version"] = format_version;
    m["vocabulary"] = {{"elements", vocab.elements()},
                       {"use_origin_token", vocab.use_origin_token()}};
    m["model"] = {{"n_features", config.n_features},
                  {"n_interactions", config.n_interactions},
                  {"rbf", {{"n", config.rbf.n}, {"r_min", config.rbf.r_min},
                           {"r_max", config.rbf.r_max}}},
                  {"bins", {{"n_bins", config.bins.n_bins}, {"bin_width", config.bins.bin_width}}},
                  {"type_mlp_widths", config.type_mlp_widths},
                  {"dist_mlp_widths", config.dist_mlp_widths}};
    m["train_config"] = {{"lr0", train_config.lr0},
                         {"plateau_patience", train_config.plateau_patience},
                         {"lr_decay", train_config.lr_decay},
                         {"lr_stop", train_config.lr_stop},
                         {"batch_size", train_config.batch_size},
                         {"seed", train_config.seed},
                         {"gamma", train_config.gamma},
                         {"max_epochs", train_config.max_epochs}};
    if (!std::isnan(train_config.stop_excess))
        m["train_config"]["stop_excess"] = train_config.stop_excess;
    m["epoch"] = epoch;
    m["adam_steps"] = adam_steps;
    if (std::isfinite(validation_loss))
        m["validation_loss"] = validation_loss;
    json tensors = json::array();
    for (int i = 0; i < params.count(); ++i)
        tensors.push_back({{"name", params.name(i)},
                           {"rows", params.tensor(i).rows()},
                           {"cols", params.tensor(i).cols()}});
    m["tensors"] = tensors;

    std::string manifest = m.dump();
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot open for writing: " + tmp);
        out.write(kMagic, sizeof(kMagic));
        uint64_t len = manifest.size();
        out.write(reinterpret_cast<const char*>(&len), sizeof(len));
        out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
        write_raw(out, params);
        write_raw(out, adam_m);
        write_raw(out, adam_v);
        if (!out)
            throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    uint64_t len = 0;
    if (!in.read(reinterpret_cast<char*>(&len), sizeof(len)) || len > (1u << 26))
        throw std::runtime_error("corrupt checkpoint header: " + path);
    std::string manifest(len, '\0');
    if (!in.read(manifest.data(), static_cast<std::streamsize>(len)))
        throw std::runtime_error("truncated checkpoint manifest: " + path);

    json m = json::parse(manifest);
    Checkpoint ck;
    ck.format_version = m.at("format_version").get<int>();
    if (ck.format_version != 1)
        throw std::runtime_error("unsupported checkpoint format version " +
                                 std::to_string(ck.format_version));
    const json& jv = m.at("vocabulary");
    ck.vocab = TypeVocabulary(jv.at("elements").get<std::vector<std::string>>(),
                              jv.at("use_origin_token").get<bool>());
    const json& jm = m.at("model");
    ck.config.n_features = jm.at("n_features").get<int>();
    ck.config.n_interactions = jm.at("n_interactions").get<int>();
    ck.config.rbf.n = jm.at("rbf").at("n").get<int>();
    ck.config.rbf.r_min = jm.at("rbf").at("r_min").get<double>();
    ck.config.rbf.r_max = jm.at("rbf").at("r_max").get<double>();
    ck.config.bins.n_bins = jm.at("bins").at("n_bins").get<int>();
    ck.config.bins.bin_width = jm.at("bins").at("bin_width").get<double>();
    ck.config.type_mlp_widths = jm.at("type_mlp_widths").get<std::vector<int>>();
    ck.config.dist_mlp_widths = jm.at("dist_mlp_widths").get<std::vector<int>>();
    const json& jt = m.at("train_config");
    ck.train_config.lr0 = jt.at("lr0").get<double>();
    ck.train_config.plateau_patience = jt.at("plateau_patience").get<int>();
    ck.train_config.lr_decay = jt.at("lr_decay").get<double>();
    ck.train_config.lr_stop = jt.at("lr_stop").get<double>();
    ck.train_config.batch_size = jt.at("batch_size").get<int>();
    ck.train_config.seed = jt.at("seed").get<uint64_t>();
    ck.train_config.gamma = jt.at("gamma").get<double>();
    ck.train_config.max_epochs = jt.at("max_epochs").get<int>();
    if (jt.contains("stop_excess"))
        ck.train_config.stop_excess = jt.at("stop_excess").get<double>();
    ck.epoch = m.at("epoch").get<int>();
    ck.adam_steps = m.at("adam_steps").get<long>();
    if (m.contains("validation_loss"))
        ck.validation_loss = m.at("validation_loss").get<double>();

    for (const json& t : m.at("tensors"))
        ck.params.add(t.at("name").get<std::string>(), t.at("rows").get<long>(),
                      t.at("cols").get<long>());
    read_raw(in, ck.params, path);
    ck.adam_m = ParamStore::zeros_like(ck.params);
    ck.adam_v = ParamStore::zeros_like(ck.params);
    read_raw(in, ck.adam_m, path);
    read_raw(in, ck.adam_v, path);
    char extra;
    if (in.read(&extra, 1))
        throw std::runtime_error("trailing bytes in checkpoint: " + path);
    return ck;
}

Model model_from_checkpoint(const Checkpoint& ckpt) {
    Model model(ckpt.vocab, ckpt.config);
    ParamStore& dst = model.params();
    if (dst.count() != ckpt.params.count())
        throw std::runtime_error("checkpoint tensor list does not match the model layout");
    for (int i = 0; i < dst.count(); ++i) {
        if (dst.name(i) != ckpt.params.name(i) ||
            dst.tensor(i).rows() != ckpt.params.tensor(i).rows() ||
            dst.tensor(i).cols() != ckpt.params.tensor(i).cols())
            throw std::runtime_error("checkpoint tensor '" + ckpt.params.name(i) +
                                     "' does not match the model layout");
        dst.tensor(i) = ckpt.params.tensor(i);
    }
    return model;
}

namespace {

std::vector<BondGraph> graphs_for(const std::vector<MoleculeRecord>& recs, const char* which) {
    std::vector<BondGraph> out;
    for (size_t i = 0; i < recs.size(); ++i) {
        PerceptionResult pr = resolve_bonds(recs[i]);
        if (!pr.ok)
            throw std::runtime_error(std::string(which) + " record " + std::to_string(i) + ": " +
                                     pr.reason);
        if (!pr.graph.connected())
            throw std::runtime_error(std::string(which) + " record " + std::to_string(i) +
                                     ": disconnected molecule");
        out.push_back(std::move(pr.graph));
    }
    return out;
}

TrainResult run_training(Model& model, AdamOptimizer& adam, const Dataset& data,
                         const TrainingConfig& cfg) {
    cfg.validate();
    data.validate();
    const TypeVocabulary& vocab = model.vocab();
    const DistanceBinSpec& bins = model.config().bins;

    if (!data.splits.count("train") || data.split("train").empty())
        throw std::invalid_argument("training requires a nonempty 'train' split");
    std::vector<MoleculeRecord> train_recs = data.split_records("train");
    // Tiny fine-tuning subsets may not carry a validation split; falling back
    // to the train records (with independent fixed traces) keeps the plateau
    // scheduler meaningful.
    std::vector<MoleculeRecord> val_recs =
        (data.splits.count("validation") && !data.split("validation").empty())
            ? data.split_records("validation")
            : train_recs;

    std::vector<BondGraph> train_graphs = graphs_for(train_recs, "train");
    std::vector<BondGraph> val_graphs = graphs_for(val_recs, "validation");

    std::vector<TraceStep> val_steps;
    for (size_t i = 0; i < val_recs.size(); ++i) {
        RngStream r = RngStream::substream(cfg.seed, "val-trace", i);
        auto tr = sample_trace(val_recs[i], val_graphs[i], vocab, bins, cfg.gamma, r);
        std::move(tr.begin(), tr.end(), std::back_inserter(val_steps));
    }

    TrainResult result;
    Checkpoint& best = result.checkpoint;
    best.vocab = vocab;
    best.config = model.config();
    best.train_config = cfg;
    best.params = model.params();
    best.adam_m = adam.first_moment();
    best.adam_v = adam.second_moment();
    best.adam_steps = adam.steps();
    best.epoch = 0;

    PlateauScheduler sched(cfg.lr0, cfg.plateau_patience, cfg.lr_decay);
    ParamStore grads = ParamStore::zeros_like(model.params());

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        RngStream trace_rng = RngStream::substream(cfg.seed, "trace", epoch);
        std::vector<TraceStep> steps;
        for (size_t i = 0; i < train_recs.size(); ++i) {
            auto tr = sample_trace(train_recs[i], train_graphs[i], vocab, bins, cfg.gamma,
                                   trace_rng);
            std::move(tr.begin(), tr.end(), std::back_inserter(steps));
        }
        std::vector<size_t> order(steps.size());
        std::iota(order.begin(), order.end(), size_t{0});
        RngStream order_rng = RngStream::substream(cfg.seed, "order", epoch);
        order_rng.shuffle(order);

        double loss_sum = 0.0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            grads.set_zero();
            double scale = 1.0 / static_cast<double>(end - start);
            for (size_t k = start; k < end; ++k) {
                Tape tape;
                ParamBinding bind(tape, model.params());
                Var loss = build_step_loss(tape, bind, model, steps[order[k]]);
                double lv = tape.value(loss)(0, 0);
                if (!std::isfinite(lv))
                    throw std::runtime_error("non-finite loss in epoch " + std::to_string(epoch) +
                                             ", batch " +
                                             std::to_string(start / cfg.batch_size));
                loss_sum += lv;
                tape.backward(loss);
                bind.harvest(tape, grads, scale);
            }
            adam.step(model.params(), grads, sched.lr());
        }

        double entropy_sum = 0.0;
        for (const TraceStep& st : steps)
            entropy_sum += step_label_entropy(st);
        double val_sum = 0.0;
        for (const TraceStep& st : val_steps)
            val_sum += eval_step_loss(model, st);

        EpochLog log;
        log.epoch = epoch;
        log.train_loss = loss_sum / static_cast<double>(steps.size());
        log.val_loss = val_sum / static_cast<double>(val_steps.size());
        log.lr = sched.lr();
        log.label_entropy = entropy_sum / static_cast<double>(steps.size());
        result.history.push_back(log);

        if (log.val_loss < best.validation_loss) {
            best.params = model.params();
            best.adam_m = adam.first_moment();
            best.adam_v = adam.second_moment();
            best.adam_steps = adam.steps();
            best.epoch = epoch;
            best.validation_loss = log.val_loss;
        }

        sched.observe(log.val_loss);
        if (sched.lr() <= cfg.lr_stop)
            break;
        if (!std::isnan(cfg.stop_excess) && log.train_loss - log.label_entropy < cfg.stop_excess)
            break;
    }
    return result;
}

} // namespace

TrainResult train(const Dataset& data, const TypeVocabulary& vocab, const ModelConfig& mcfg,
                  const TrainingConfig& tcfg) {
    Model model(vocab, mcfg);
    RngStream init_rng = RngStream::substream(tcfg.seed, "init");
    model.init_params(init_rng);
    AdamOptimizer adam(model.params());
    return run_training(model, adam, data, tcfg);
}

TrainResult finetune(const Checkpoint& start, const Dataset& data, const TrainingConfig& tcfg) {
    if (data.records.empty())
        throw std::invalid_argument("finetune: empty dataset");
    Model model = model_from_checkpoint(start);
    for (const MoleculeRecord& rec : data.records)
        for (const std::string& e : rec.elements)
            model.vocab().element_code(e); // vocabulary mismatch surfaces here

    Dataset prepared = data;
    if (!prepared.splits.count("train") || prepared.split("train").empty()) {
        std::vector<size_t> all(prepared.size());
        std::iota(all.begin(), all.end(), size_t{0});
        prepared.splits["train"] = std::move(all);
    }
    AdamOptimizer adam(model.params()); // reset to lr0 with fresh moments
    return run_training(model, adam, prepared, tcfg);
}

double finite_difference_check(Model& model, const std::vector<TraceStep>& steps, int n_samples,
                               double eps, RngStream& rng, double fault_scale) {
    if (steps.empty() || n_samples <= 0)
        return 0.0;
    if (eps <= 0.0)
        throw std::invalid_argument("finite_difference_check: eps must be positive");

    double scale = 1.0 / static_cast<double>(steps.size());
    ParamStore grads = ParamStore::zeros_like(model.params());
    for (const TraceStep& st : steps) {
        Tape tape;
        ParamBinding bind(tape, model.params());
        Var loss = build_step_loss(tape, bind, model, st);
        tape.backward(loss);
        bind.harvest(tape, grads, scale);
    }

    auto total_loss = [&]() {
        double s = 0.0;
        for (const TraceStep& st : steps)
            s += eval_step_loss(model, st);
        return s * scale;
    };

    long total = model.params().total_size();
    long want = std::min<long>(n_samples, total);
    std::set<long> chosen;
    while (static_cast<long>(chosen.size()) < want)
        chosen.insert(static_cast<long>(rng.uniform_int(static_cast<uint64_t>(total))));

    double max_rel = 0.0;
    for (long flat : chosen) {
        int ti = 0;
        long off = flat;
        while (off >= model.params().tensor(ti).size())
            off -= model.params().tensor(ti++).size();
        long cols = model.params().tensor(ti).cols();
        long r = off / cols, c = off % cols;

        double& p = model.params().tensor(ti)(r, c);
        double old = p;
        p = old + eps;
        double lp = total_loss();
        p = old - eps;
        double lm = total_loss();
        p = old;

        double numeric = (lp - lm) / (2.0 * eps);
        double analytic = grads.tensor(ti)(r, c) * fault_scale;
        // The denominator floor must sit above the noise of the central
        // difference itself: each loss evaluation carries ~1 ulp of rounding
        // (~1e-15 here), so `numeric` is only accurate to ~1e-15/eps = 1e-10.
        // Parameters whose true gradient is below that (e.g. the final
        // type-head bias, which softmax normalization makes exactly inert)
        // would otherwise report pure measurement noise as disagreement.
        double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-5});
        max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
    return max_rel;
}

} // namespace g3dgen
