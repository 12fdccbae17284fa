#include <doctest.h>

#include <g3dgen/generator.hpp>

#include <cmath>
#include <stdexcept>

using namespace g3dgen;

namespace {

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.n_features = 8;
    cfg.n_interactions = 1;
    cfg.type_mlp_widths = {8, 1};
    cfg.dist_mlp_widths = {8, 300};
    return cfg;
}

Model random_model(uint64_t seed = 31) {
    Model m(TypeVocabulary{}, tiny_config());
    RngStream r(seed);
    m.init_params(r);
    return m;
}

GenerationConfig quick_config() {
    GenerationConfig cfg;
    cfg.max_atoms = 6;
    cfg.grid_extent = 0.6; // keeps the cell count small for speed
    cfg.grid_step = 0.1;
    cfg.n_molecules = 4;
    cfg.seed = 12;
    return cfg;
}

bool equal_results(const GenerationResult& a, const GenerationResult& b) {
    if (a.status != b.status || a.seed != b.seed) return false;
    if (a.structure.types != b.structure.types) return false;
    if (a.structure.positions.size() != b.structure.positions.size()) return false;
    for (size_t i = 0; i < a.structure.positions.size(); ++i)
        if (a.structure.positions[i] != b.structure.positions[i]) return false;
    if (a.steps.size() != b.steps.size()) return false;
    for (size_t i = 0; i < a.steps.size(); ++i) {
        if (a.steps[i].focus_atom != b.steps[i].focus_atom) return false;
        if (a.steps[i].sampled_type != b.steps[i].sampled_type) return false;
        if (a.steps[i].sampled_cell != b.steps[i].sampled_cell) return false;
    }
    return true;
}

} // namespace

TEST_CASE("generation is deterministic per seed") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    std::vector<GenerationResult> a = generate_batch(m, cfg);
    std::vector<GenerationResult> b = generate_batch(m, cfg);
    REQUIRE(a.size() == 4);
    REQUIRE(b.size() == 4);
    for (size_t i = 0; i < a.size(); ++i) CHECK(equal_results(a[i], b[i]));

    cfg.seed = 13;
    std::vector<GenerationResult> c = generate_batch(m, cfg);
    bool any_diff = false;
    for (size_t i = 0; i < a.size(); ++i) any_diff |= !equal_results(a[i], c[i]);
    CHECK(any_diff);
}

TEST_CASE("worker count does not change the results") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.n_molecules = 6;
    std::vector<GenerationResult> serial = generate_batch(m, cfg);
    cfg.jobs = 3;
    std::vector<GenerationResult> parallel = generate_batch(m, cfg);
    REQUIRE(serial.size() == parallel.size());
    for (size_t i = 0; i < serial.size(); ++i) CHECK(equal_results(serial[i], parallel[i]));
}

TEST_CASE("structures contain only element codes") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.n_molecules = 8;
    for (const GenerationResult& r : generate_batch(m, cfg)) {
        CHECK(r.structure.token_count == 0);
        for (int t : r.structure.types) CHECK(m.vocab().is_element(t));
        CHECK(r.structure.size() <= cfg.max_atoms);
    }
}

TEST_CASE("every placement stays within grid reach of its focus") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.n_molecules = 8;
    double reach = cfg.grid_extent * std::sqrt(3.0) + 1e-9;
    for (const GenerationResult& r : generate_batch(m, cfg)) {
        int placed = 0;
        for (const GenStep& s : r.steps) {
            if (s.sampled_cell < 0) continue; // stop or rejected-at-cap step
            REQUIRE(placed < r.structure.size());
            Vec3 pos = r.structure.positions[placed];
            Vec3 focus = s.focus_atom < 0 ? Vec3::Zero()
                                          : r.structure.positions[s.focus_atom];
            CHECK((pos - focus).norm() <= reach);
            ++placed;
        }
        CHECK(placed == r.structure.size());
    }
}

TEST_CASE("completed runs finish every atom") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.n_molecules = 12;
    cfg.seed = 4;
    int completed = 0, discarded = 0;
    for (const GenerationResult& r : generate_batch(m, cfg)) {
        if (r.status == GenStatus::completed) {
            ++completed;
            int stops = 0, places = 0;
            for (const GenStep& s : r.steps)
                (s.sampled_cell < 0 ? stops : places)++;
            CHECK(places == r.structure.size());
            CHECK(stops == r.structure.size());
            CHECK(r.structure.size() >= 1);
        } else {
            ++discarded;
        }
    }
    CHECK(completed + discarded == 12);
    CHECK(completed > 0);
}

TEST_CASE("max_atoms caps the structure size") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.max_atoms = 2;
    cfg.n_molecules = 16;
    bool saw_discard = false;
    for (const GenerationResult& r : generate_batch(m, cfg)) {
        CHECK(r.structure.size() <= 2);
        saw_discard |= r.status == GenStatus::discarded_max_atoms;
    }
    CHECK(saw_discard);
}

TEST_CASE("the first sampled type is never a stop") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.n_molecules = 16;
    for (const GenerationResult& r : generate_batch(m, cfg)) {
        REQUIRE(!r.steps.empty());
        CHECK(m.vocab().is_element(r.steps[0].sampled_type));
        CHECK(r.steps[0].focus_atom == -1);
    }
}

TEST_CASE("rotating the generation frame rotates the structures") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.n_molecules = 3;
    std::vector<GenerationResult> base = generate_batch(m, cfg);

    GenerationConfig turned = cfg;
    turned.grid_frame =
        Eigen::AngleAxisd(1.0, Vec3(1, 1, 1).normalized()).toRotationMatrix();
    std::vector<GenerationResult> rot = generate_batch(m, turned);

    for (size_t i = 0; i < base.size(); ++i) {
        REQUIRE(base[i].structure.types == rot[i].structure.types);
        REQUIRE(base[i].status == rot[i].status);
        if (base[i].structure.size() < 2) continue;
        std::vector<Vec3> expect;
        for (const Vec3& p : base[i].structure.positions)
            expect.push_back(turned.grid_frame * p);
        CHECK(kabsch_rmsd(expect, rot[i].structure.positions) < 0.05);
    }
}

TEST_CASE("to_record maps codes to element symbols") {
    TypeVocabulary v;
    PointSet ps;
    ps.token_count = 0;
    ps.positions = {Vec3(0, 0, 0), Vec3(1, 0, 0)};
    ps.types = {v.element_code("C"), v.element_code("O")};
    MoleculeRecord rec = to_record(ps, v);
    REQUIRE(rec.n_atoms() == 2);
    CHECK(rec.elements[0] == "C");
    CHECK(rec.elements[1] == "O");
    CHECK(rec.positions[1].x() == 1.0);

    ps.types[1] = v.focus_code();
    CHECK_THROWS_AS((void)to_record(ps, v), std::invalid_argument);
}

TEST_CASE("completed_records keeps only completed structures") {
    Model m = random_model();
    GenerationConfig cfg = quick_config();
    cfg.max_atoms = 2;
    cfg.n_molecules = 16;
    std::vector<GenerationResult> rs = generate_batch(m, cfg);
    std::vector<MoleculeRecord> recs = completed_records(rs, m.vocab());
    size_t n_completed = 0;
    for (const GenerationResult& r : rs)
        n_completed += r.status == GenStatus::completed;
    CHECK(recs.size() == n_completed);
}

TEST_CASE("generation config validation") {
    GenerationConfig cfg;
    cfg.temperature = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = GenerationConfig{};
    cfg.max_atoms = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = GenerationConfig{};
    cfg.grid_extent = 0.01; // smaller than one step
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = GenerationConfig{};
    cfg.jobs = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_NOTHROW(GenerationConfig{}.validate());
}
