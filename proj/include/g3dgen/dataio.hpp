#pragma once

#include "g3dgen/geometry.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace g3dgen {

// Chemical bond between atom indices a < b.
struct Bond {
    int a = 0;
    int b = 0;
    int order = 1; // 1..3

    bool operator==(const Bond&) const = default;
};

struct MoleculeRecord {
    std::vector<std::string> elements;
    std::vector<Vec3> positions;
    std::map<std::string, double> properties;
    // Explicit connectivity annotation; when absent, callers fall back to
    // geometric perception.
    std::optional<std::vector<Bond>> bonds;

    int n_atoms() const { return static_cast<int>(elements.size()); }
};

struct Dataset {
    std::vector<MoleculeRecord> records;
    // Disjoint index lists, e.g. "train"/"validation"/"test".
    std::map<std::string, std::vector<size_t>> splits;

    size_t size() const { return records.size(); }
    const std::vector<size_t>& split(const std::string& name) const;
    std::vector<MoleculeRecord> split_records(const std::string& name) const;
    // Throws on out-of-range indices or overlapping splits.
    void validate() const;
};

// Parses concatenated extended-XYZ frames:
//   line 1: atom count
//   line 2: comment; whitespace-separated key=value tokens become properties
//           (numeric values only); a `bonds=a-b:o,...` token becomes the
//           explicit bond list
//   then one `Element x y z` line per atom
// Errors carry the offending line number.
Dataset load_xyz(const std::string& path);

struct SplitSizes {
    size_t train = 0;
    size_t validation = 0;
    size_t test = 0;
};

// Seeded shuffle then partition into train/validation/test index lists.
void assign_splits(Dataset& dataset, const SplitSizes& sizes, uint64_t seed);

enum class PropertyPredicate { le, ge };

// Order-preserving subset of records whose property satisfies the predicate.
// Splits are not carried over. Any record missing the property is an error.
Dataset filter_by_property(const Dataset& dataset, const std::string& name,
                           PropertyPredicate predicate, double threshold);

// Comment string encoding the record's properties and bond annotation.
std::string format_record_comment(const MoleculeRecord& record);

// Writes extended-XYZ with 9-decimal coordinates via a temp file + rename.
// One comment per record; comments and records must have equal length.
void save_structures(const std::vector<MoleculeRecord>& records,
                     const std::vector<std::string>& comments, const std::string& path);

// Same, with comments built by format_record_comment.
void save_structures(const std::vector<MoleculeRecord>& records, const std::string& path);

} // namespace g3dgen
