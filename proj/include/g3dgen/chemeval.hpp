#pragma once

#include "g3dgen/dataio.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace g3dgen {

// Molecular multigraph: nodes carry element symbols, edges carry integer
// bond orders 1..3.
struct BondGraph {
    int n_atoms = 0;
    std::vector<std::string> elements;
    std::vector<Bond> bonds; // a < b, unique pairs

    // (neighbor, order) lists per node.
    std::vector<std::vector<std::pair<int, int>>> adjacency() const;
    int order_sum(int atom) const;
    bool connected() const;
};

struct PerceptionResult {
    bool ok = false;
    BondGraph graph;
    std::string reason; // set when !ok
};

// Geometric bond perception: candidate edges where the distance is at most
// the covalent radii sum + 0.45 A, then backtracking assignment of orders
// 1..3 to every candidate edge so each atom's order sum equals its element
// valence exactly. Returns the first consistent assignment found.
PerceptionResult perceive_bonds(const MoleculeRecord& structure);

// Bond graph from the record's annotation when present, else perceived.
PerceptionResult resolve_bonds(const MoleculeRecord& structure);

struct Validity {
    bool valid = false;
    std::string reason; // set when !valid
};

// Valid iff perception succeeds and the bond graph is connected.
Validity check_validity(const MoleculeRecord& structure);

// Ring census: every cycle that is not a GF(2) combination of strictly
// smaller cycles is counted, so symmetry-equivalent minimal rings all appear.
struct RingCounts {
    int r3 = 0, r4 = 0, r5 = 0, r6 = 0, r7_plus = 0;
    int total() const { return r3 + r4 + r5 + r6 + r7_plus; }

    bool operator==(const RingCounts&) const = default;
};

RingCounts ring_counts(const BondGraph& g);

// Fixed-width histogram over [lo, lo + n*width); out-of-range samples are
// dropped. Raw counts are kept; density() integrates to 1.
struct Histogram {
    double lo = 0.0;
    double width = 1.0;
    std::vector<long> counts;
    long total = 0;

    Histogram() = default;
    Histogram(double lo, double width, int n_bins)
        : lo(lo), width(width), counts(static_cast<size_t>(n_bins), 0) {}

    void add(double x);
    double center(size_t i) const { return lo + (static_cast<double>(i) + 0.5) * width; }
    std::vector<double> density() const;
    // Two-column text: bin center, density.
    std::string to_two_column() const;
};

// Distances between atoms of the two given elements within each structure.
Histogram rdf(const std::vector<MoleculeRecord>& structures, const std::string& elem_a,
              const std::string& elem_b, double bin_width, double range);

// Angles (degrees) at the middle atom over bonded chains a-b-c; each
// unordered chain counted once. Bonds are perceived per structure;
// unperceivable structures are skipped.
Histogram adf(const std::vector<MoleculeRecord>& structures, const std::string& elem_a,
              const std::string& elem_b, const std::string& elem_c, double bin_width);

// Canonical form of the labeled multigraph: iterative neighborhood
// refinement plus individualization over ties, returning the
// lexicographically smallest element+edge encoding. Equal strings iff the
// graphs are isomorphic (elements and bond orders included).
std::string canonical_hash(const BondGraph& g);

// Minimal kabsch_rmsd over all element- and bond-preserving isomorphisms
// between the two structures; +infinity when no isomorphism exists.
double best_match_rmsd(const MoleculeRecord& a, const BondGraph& ga, const MoleculeRecord& b,
                       const BondGraph& gb);

struct StatsReport {
    long n_generated = 0;
    long n_valid = 0;
    long n_unique = 0;
    long n_novel = 0;  // unique hashes absent from reference
    long n_unseen = 0; // unique hashes absent from train
    double pct_valid = 0.0;
    double pct_unique = 0.0;
    double pct_novel = 0.0;
    double pct_unseen = 0.0;
    // Means over valid structures.
    std::map<std::string, double> mean_atoms;
    std::map<int, double> mean_bonds;
    std::map<std::string, double> mean_rings; // R3..R6, R7+
    std::vector<std::pair<std::string, Histogram>> rdfs; // "C-C" etc.
    std::vector<std::pair<std::string, Histogram>> adfs; // "C-C-C" etc.

    std::string to_table() const;
    std::string to_key_values() const;
};

StatsReport statistics_report(const std::vector<MoleculeRecord>& generated,
                              const std::vector<MoleculeRecord>& train_set,
                              const std::vector<MoleculeRecord>& reference_set);

// Mass-weighted center of the record's atoms.
Vec3 center_of_mass(const MoleculeRecord& record);

} // namespace g3dgen
