#pragma once

#include "g3dgen/dataio.hpp"
#include "g3dgen/model.hpp"
#include "g3dgen/rng.hpp"

#include <vector>

namespace g3dgen {

struct GenerationConfig {
    double temperature = 0.1;
    int max_atoms = 35;
    double grid_extent = 1.7; // Angstrom, reach from the focus along each axis
    double grid_step = 0.05;  // Angstrom
    int n_molecules = 1;
    uint64_t seed = 0;
    int jobs = 1;
    // Orientation of every candidate lattice; identity unless a caller
    // deliberately rotates the generation frame.
    Mat3 grid_frame = Mat3::Identity();

    void validate() const;
};

enum class GenStatus { completed, discarded_max_atoms };

struct GenStep {
    int focus_atom = -1;    // structure index; -1 when the focus was the step-1 token
    int sampled_type = -1;  // predictable code
    long sampled_cell = -1; // flat grid index; -1 for stop steps
};

struct GenerationResult {
    PointSet structure; // atoms only, tokens never included
    GenStatus status = GenStatus::completed;
    std::vector<GenStep> steps;
    uint64_t seed = 0; // derived seed that drove this run
};

// One autoregressive rollout: place atoms by sampling a type and then a grid
// cell around the focus until every atom has received a stop; structures that
// would exceed max_atoms are returned with status discarded_max_atoms.
GenerationResult generate_one(const Model& model, const GenerationConfig& cfg, RngStream& rng);

// n_molecules independent rollouts with per-run derived seeds; the result
// order and contents do not depend on the worker count.
std::vector<GenerationResult> generate_batch(const Model& model, const GenerationConfig& cfg);

// Element-symbol record of a token-free point set.
MoleculeRecord to_record(const PointSet& atoms, const TypeVocabulary& vocab);

// Records of the completed results only.
std::vector<MoleculeRecord> completed_records(const std::vector<GenerationResult>& results,
                                              const TypeVocabulary& vocab);

} // namespace g3dgen
