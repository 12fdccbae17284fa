#include "g3dgen/generator.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

namespace g3dgen {

void GenerationConfig::validate() const {
    if (temperature <= 0.0)
        throw std::invalid_argument("generation config: temperature must be positive");
    if (max_atoms < 1)
        throw std::invalid_argument("generation config: max_atoms must be at least 1");
    if (grid_step <= 0.0 || grid_extent < grid_step)
        throw std::invalid_argument("generation config: grid extent must cover at least one step");
    if (n_molecules < 0 || jobs < 1)
        throw std::invalid_argument("generation config: bad molecule or worker count");
}

GenerationResult generate_one(const Model& model, const GenerationConfig& cfg, RngStream& rng) {
    cfg.validate();
    const TypeVocabulary& vocab = model.vocab();
    const DistanceBinSpec& bins = model.config().bins;
    const Vec3 origin = Vec3::Zero();

    GenerationResult res;
    PointSet atoms;
    std::vector<bool> finished;

    auto build_context = [&](const Vec3& focus_pos) {
        PointSet ctx;
        ctx.add_point(focus_pos, vocab.focus_code());
        if (vocab.use_origin_token())
            ctx.add_point(origin, vocab.origin_code());
        ctx.token_count = ctx.size();
        for (int i = 0; i < atoms.size(); ++i)
            ctx.add_point(atoms.positions[i], atoms.types[i]);
        return ctx;
    };

    while (true) {
        std::vector<int> open;
        for (int i = 0; i < atoms.size(); ++i)
            if (!finished[i])
                open.push_back(i);
        if (atoms.size() > 0 && open.empty()) {
            res.status = GenStatus::completed;
            break;
        }

        int focus = -1;
        Vec3 focus_pos = origin;
        if (atoms.size() > 0) {
            focus = open[static_cast<int>(rng.uniform_int(open.size()))];
            focus_pos = atoms.positions[focus];
        }

        PointSet ctx = build_context(focus_pos);
        Matrix x = model.encode(ctx);
        Eigen::VectorXd type_probs = model.type_distribution(x);

        int ty = rng.sample_discrete(type_probs.data(), static_cast<int>(type_probs.size()));
        if (atoms.size() == 0 && ty == vocab.stop_code()) {
            // An empty structure is meaningless; retry, then fall back to the
            // likeliest element.
            for (int tries = 0; tries < 64 && ty == vocab.stop_code(); ++tries)
                ty = rng.sample_discrete(type_probs.data(),
                                         static_cast<int>(type_probs.size()));
            if (ty == vocab.stop_code()) {
                ty = 0;
                for (int k = 1; k < vocab.n_elements(); ++k)
                    if (type_probs(k) > type_probs(ty))
                        ty = k;
            }
        }

        if (ty == vocab.stop_code()) {
            finished[focus] = true;
            res.steps.push_back(GenStep{focus, ty, -1});
            continue;
        }

        if (atoms.size() >= cfg.max_atoms) {
            res.steps.push_back(GenStep{focus, ty, -1});
            res.status = GenStatus::discarded_max_atoms;
            break;
        }

        Matrix dists = model.distance_distributions(x, ty);
        CandidateGrid grid = build_candidate_grid(focus_pos, cfg.grid_extent, cfg.grid_step);
        grid.orientation = cfg.grid_frame;
        GridDistribution gd = position_distribution(ctx, dists, grid, cfg.temperature, bins);
        long cell = gd.sample(rng);

        atoms.add_point(grid.cell_position(cell), ty);
        finished.push_back(false);
        res.steps.push_back(GenStep{focus, ty, cell});
    }

    res.structure = std::move(atoms);
    return res;
}

std::vector<GenerationResult> generate_batch(const Model& model, const GenerationConfig& cfg) {
    cfg.validate();
    int n = cfg.n_molecules;
    std::vector<GenerationResult> out(static_cast<size_t>(n));

    auto run = [&](int i) {
        uint64_t s = derive_seed(cfg.seed, "generate", static_cast<uint64_t>(i));
        RngStream rng(s);
        out[i] = generate_one(model, cfg, rng);
        out[i].seed = s;
    };

    int workers = std::min(cfg.jobs, n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i)
            run(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) {
            pool.emplace_back([&]() {
                for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1))
                    run(i);
            });
        }
        for (std::thread& th : pool)
            th.join();
    }
    return out;
}

MoleculeRecord to_record(const PointSet& atoms, const TypeVocabulary& vocab) {
    MoleculeRecord rec;
    for (int i = 0; i < atoms.size(); ++i) {
        int code = atoms.types[i];
        if (!vocab.is_element(code))
            throw std::invalid_argument("to_record: non-element code " + std::to_string(code));
        rec.elements.push_back(vocab.code_name(code));
        rec.positions.push_back(atoms.positions[i]);
    }
    return rec;
}

std::vector<MoleculeRecord> completed_records(const std::vector<GenerationResult>& results,
                                              const TypeVocabulary& vocab) {
    std::vector<MoleculeRecord> out;
    for (const GenerationResult& res : results)
        if (res.status == GenStatus::completed)
            out.push_back(to_record(res.structure, vocab));
    return out;
}

} // namespace g3dgen
