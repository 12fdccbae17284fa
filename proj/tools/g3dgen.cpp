#include <CLI11.hpp>

#include <g3dgen/chemeval.hpp>
#include <g3dgen/dataio.hpp>
#include <g3dgen/generator.hpp>
#include <g3dgen/model.hpp>
#include <g3dgen/trainer.hpp>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace g3dgen;

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',') {
            if (!cur.empty()) out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur += c;
        }
    }
    if (!cur.empty()) out.push_back(cur);
    return out;
}

void write_text_file(const std::string& path, const std::string& content) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open for writing: " + tmp);
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

std::string history_table(const std::vector<EpochLog>& history) {
    std::string log = "epoch\ttrain_loss\tval_loss\tlr\tlabel_entropy\n";
    for (const EpochLog& e : history) {
        log += std::to_string(e.epoch) + "\t" + fmt(e.train_loss) + "\t" + fmt(e.val_loss) +
               "\t" + fmt(e.lr) + "\t" + fmt(e.label_entropy) + "\n";
    }
    return log;
}

void report_history(const std::vector<EpochLog>& history, const Checkpoint& best,
                    const std::string& out_dir) {
    write_text_file(out_dir + "/training_log.tsv", history_table(history));
    std::cout << "epochs run: " << history.size() << "\n";
    std::cout << "best validation loss: " << fmt(best.validation_loss) << " (epoch "
              << best.epoch << ")\n";
}

// Shared training knobs; registered on both train and finetune.
struct TrainFlags {
    TrainingConfig cfg;
    std::string dataset;
    std::string out_dir;

    void attach(CLI::App* cmd) {
        cmd->add_option("--dataset", dataset, "Training set (.xyz)")
            ->required()
            ->check(CLI::ExistingFile);
        cmd->add_option("--out", out_dir, "Output directory")->required();
        cmd->add_option("--seed", cfg.seed, "Master seed")->capture_default_str();
        cmd->add_option("--epochs", cfg.max_epochs, "Maximum training epochs")->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--batch-size", cfg.batch_size, "Trace steps per update")->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--lr0", cfg.lr0, "Initial Adam learning rate")->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--lr-patience", cfg.plateau_patience,
                        "Epochs without validation improvement before decay")->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--lr-decay", cfg.lr_decay, "Learning-rate decay factor")->capture_default_str();
        cmd->add_option("--lr-stop", cfg.lr_stop, "Stop once the rate falls to this")->capture_default_str();
        cmd->add_option("--gamma", cfg.gamma, "Distance label width")->capture_default_str()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--stop-excess", cfg.stop_excess,
                        "Stop once train loss exceeds the label entropy by less than this");
    }
};

int cmd_train(const TrainFlags& tf, const std::string& elements, bool use_origin_token,
              int n_features, int n_interactions, size_t train_size, size_t val_size,
              size_t test_size) {
    Dataset data = load_xyz(tf.dataset);
    if (train_size + val_size + test_size > 0) {
        assign_splits(data, SplitSizes{train_size, val_size, test_size}, tf.cfg.seed);
    } else {
        std::vector<size_t> all(data.size());
        std::iota(all.begin(), all.end(), size_t{0});
        data.splits["train"] = std::move(all);
    }
    std::cout << "records: " << data.size() << ", train split: " << data.split("train").size()
              << "\n";

    TypeVocabulary vocab(split_csv(elements), use_origin_token);
    ModelConfig mcfg;
    mcfg.n_features = n_features;
    mcfg.n_interactions = n_interactions;
    mcfg.validate();

    fs::create_directories(tf.out_dir);
    TrainResult res = train(data, vocab, mcfg, tf.cfg);
    res.checkpoint.save(tf.out_dir + "/checkpoint.g3d");
    report_history(res.history, res.checkpoint, tf.out_dir);
    return 0;
}

int cmd_generate(const std::string& checkpoint_path, const std::string& out_dir,
                 const GenerationConfig& cfg) {
    Checkpoint ck = Checkpoint::load(checkpoint_path);
    Model model = model_from_checkpoint(ck);

    fs::create_directories(out_dir);
    std::vector<GenerationResult> results = generate_batch(model, cfg);

    long completed = 0, discarded = 0;
    std::vector<MoleculeRecord> records;
    std::vector<std::string> comments;
    for (size_t i = 0; i < results.size(); ++i) {
        if (results[i].status != GenStatus::completed) {
            ++discarded;
            continue;
        }
        ++completed;
        records.push_back(to_record(results[i].structure, model.vocab()));
        comments.push_back("id=" + std::to_string(i));
    }
    save_structures(records, comments, out_dir + "/structures.xyz");

    std::string summary = "requested " + std::to_string(results.size()) + "\ncompleted " +
                          std::to_string(completed) + "\ndiscarded_max_atoms " +
                          std::to_string(discarded) + "\n";
    write_text_file(out_dir + "/generation_summary.txt", summary);
    std::cout << summary;
    return 0;
}

int cmd_evaluate(const std::string& structures_path, const std::string& train_path,
                 const std::string& reference_path, const std::string& out_dir) {
    std::vector<MoleculeRecord> generated = load_xyz(structures_path).records;
    std::vector<MoleculeRecord> train_set, reference_set;
    if (!train_path.empty()) train_set = load_xyz(train_path).records;
    if (!reference_path.empty()) reference_set = load_xyz(reference_path).records;

    StatsReport rep = statistics_report(generated, train_set, reference_set);
    fs::create_directories(out_dir);
    write_text_file(out_dir + "/statistics.txt", rep.to_table());
    write_text_file(out_dir + "/statistics.tsv", rep.to_key_values());
    for (const auto& [name, hist] : rep.rdfs)
        write_text_file(out_dir + "/rdf_" + name + ".tsv", hist.to_two_column());
    for (const auto& [name, hist] : rep.adfs)
        write_text_file(out_dir + "/adf_" + name + ".tsv", hist.to_two_column());
    std::cout << rep.to_table();
    return 0;
}

int cmd_finetune(const TrainFlags& tf, const std::string& checkpoint_path,
                 const std::string& property, bool has_max, double max_threshold, bool has_min,
                 double min_threshold) {
    Checkpoint start = Checkpoint::load(checkpoint_path);
    Dataset data = load_xyz(tf.dataset);
    size_t total = data.size();

    Dataset subset = data;
    if (!property.empty()) {
        if (has_max)
            subset = filter_by_property(subset, property, PropertyPredicate::le, max_threshold);
        if (has_min)
            subset = filter_by_property(subset, property, PropertyPredicate::ge, min_threshold);
    }
    if (subset.size() == 0)
        throw std::runtime_error("property filter selected no records");

    std::string summary = "records_total " + std::to_string(total) + "\nrecords_selected " +
                          std::to_string(subset.size()) + "\n";
    if (!property.empty()) {
        summary += "property " + property + "\n";
        if (has_max) summary += "max_threshold " + fmt(max_threshold) + "\n";
        if (has_min) summary += "min_threshold " + fmt(min_threshold) + "\n";
    }

    fs::create_directories(tf.out_dir);
    TrainResult res = finetune(start, subset, tf.cfg);
    res.checkpoint.save(tf.out_dir + "/checkpoint.g3d");
    write_text_file(tf.out_dir + "/finetune_summary.txt", summary);
    std::cout << summary;
    report_history(res.history, res.checkpoint, tf.out_dir);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Autoregressive 3d molecule generator"};
    app.require_subcommand(1);
    app.set_config("--config", "", "INI config file with one [command] section per subcommand");
    app.allow_config_extras(CLI::config_extras_mode::ignore);

    // train
    CLI::App* train_cmd = app.add_subcommand("train", "Train a model from scratch");
    train_cmd->fallthrough();
    TrainFlags train_flags;
    train_flags.attach(train_cmd);
    std::string elements = "H,C,N,O,F";
    bool use_origin_token = true;
    int n_features = 128;
    int n_interactions = 9;
    size_t train_size = 0, val_size = 0, test_size = 0;
    train_cmd->add_option("--elements", elements, "Comma-separated element vocabulary")->capture_default_str();
    train_cmd->add_option("--use-origin-token", use_origin_token,
                          "Include the origin token in contexts")->capture_default_str();
    train_cmd->add_option("--n-features", n_features, "Feature width")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--n-interactions", n_interactions, "Interaction block count")->capture_default_str()
        ->check(CLI::PositiveNumber);
    train_cmd->add_option("--train-size", train_size, "Random train split size")->capture_default_str();
    train_cmd->add_option("--val-size", val_size, "Random validation split size")->capture_default_str();
    train_cmd->add_option("--test-size", test_size, "Random test split size")->capture_default_str();

    // generate
    CLI::App* gen_cmd = app.add_subcommand("generate", "Sample structures from a checkpoint");
    gen_cmd->fallthrough();
    std::string gen_checkpoint, gen_out;
    GenerationConfig gen_cfg;
    gen_cmd->add_option("--checkpoint", gen_checkpoint, "Trained checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    gen_cmd->add_option("--out", gen_out, "Output directory")->required();
    gen_cmd->add_option("--n", gen_cfg.n_molecules, "Number of molecules")->capture_default_str()
        ->check(CLI::NonNegativeNumber);
    gen_cmd->add_option("--seed", gen_cfg.seed, "Master seed")->capture_default_str();
    gen_cmd->add_option("--temperature", gen_cfg.temperature, "Grid softmax temperature")->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--jobs", gen_cfg.jobs, "Worker threads")->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--max-atoms", gen_cfg.max_atoms, "Discard threshold")->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--grid-extent", gen_cfg.grid_extent, "Grid reach from the focus")->capture_default_str()
        ->check(CLI::PositiveNumber);
    gen_cmd->add_option("--grid-step", gen_cfg.grid_step, "Grid cell size")->capture_default_str()
        ->check(CLI::PositiveNumber);

    // evaluate
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Statistics for generated structures");
    eval_cmd->fallthrough();
    std::string eval_structures, eval_train, eval_reference, eval_out;
    eval_cmd->add_option("--structures", eval_structures, "Generated structures (.xyz)")
        ->required()
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--train-set", eval_train, "Training structures for unseen counts")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--reference-set", eval_reference, "Reference corpus for novelty")
        ->check(CLI::ExistingFile);
    eval_cmd->add_option("--out", eval_out, "Output directory")->required();

    // finetune
    CLI::App* ft_cmd = app.add_subcommand("finetune", "Bias a checkpoint towards a subset");
    ft_cmd->fallthrough();
    TrainFlags ft_flags;
    ft_flags.attach(ft_cmd);
    std::string ft_checkpoint, ft_property;
    double ft_max = 0.0, ft_min = 0.0;
    CLI::Option* ft_ck_opt = ft_cmd->add_option("--checkpoint", ft_checkpoint,
                                                "Checkpoint to warm start from");
    ft_ck_opt->required()->check(CLI::ExistingFile);
    ft_cmd->add_option("--property", ft_property, "Property to filter the dataset by");
    CLI::Option* max_opt =
        ft_cmd->add_option("--max-threshold", ft_max, "Keep records with property <= this");
    CLI::Option* min_opt =
        ft_cmd->add_option("--min-threshold", ft_min, "Keep records with property >= this");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(train_cmd))
            return cmd_train(train_flags, elements, use_origin_token, n_features, n_interactions,
                             train_size, val_size, test_size);
        if (app.got_subcommand(gen_cmd)) return cmd_generate(gen_checkpoint, gen_out, gen_cfg);
        if (app.got_subcommand(eval_cmd))
            return cmd_evaluate(eval_structures, eval_train, eval_reference, eval_out);
        if (app.got_subcommand(ft_cmd)) {
            bool has_max = max_opt->count() > 0;
            bool has_min = min_opt->count() > 0;
            if (!ft_property.empty() && !has_max && !has_min)
                throw std::runtime_error("--property needs --max-threshold or --min-threshold");
            if (ft_property.empty() && (has_max || has_min))
                throw std::runtime_error("thresholds need --property");
            return cmd_finetune(ft_flags, ft_checkpoint, ft_property, has_max, ft_max, has_min,
                                ft_min);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
