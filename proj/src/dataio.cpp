#include "g3dgen/dataio.hpp"

#include "g3dgen/elements.hpp"
#include "g3dgen/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace g3dgen {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
    std::istringstream ss(line);
    std::vector<std::string> out;
    std::string tok;
    while (ss >> tok)
        out.push_back(tok);
    return out;
}

bool parse_double(std::string_view s, double& out) {
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

bool parse_int(std::string_view s, long& out) {
    const char* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, out);
    return ec == std::errc() && p == end;
}

[[noreturn]] void fail_at(long line, const std::string& what) {
    throw std::runtime_error("xyz parse error at line " + std::to_string(line) + ": " + what);
}

// bonds=a-b:o,a-b:o
std::vector<Bond> parse_bond_annotation(const std::string& value, long line) {
    std::vector<Bond> bonds;
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        size_t dash = item.find('-');
        size_t colon = item.find(':', dash == std::string::npos ? 0 : dash + 1);
        long a = 0, b = 0, order = 0;
        if (dash == std::string::npos || colon == std::string::npos ||
            !parse_int(std::string_view(item).substr(0, dash), a) ||
            !parse_int(std::string_view(item).substr(dash + 1, colon - dash - 1), b) ||
            !parse_int(std::string_view(item).substr(colon + 1), order))
            fail_at(line, "malformed bond annotation item '" + item + "'");
        if (a == b || a < 0 || b < 0 || order < 1 || order > 3)
            fail_at(line, "invalid bond annotation item '" + item + "'");
        Bond bond;
        bond.a = static_cast<int>(std::min(a, b));
        bond.b = static_cast<int>(std::max(a, b));
        bond.order = static_cast<int>(order);
        bonds.push_back(bond);
    }
    return bonds;
}

} // namespace

const std::vector<size_t>& Dataset::split(const std::string& name) const {
    auto it = splits.find(name);
    if (it == splits.end())
        throw std::invalid_argument("dataset has no split named '" + name + "'");
    return it->second;
}

std::vector<MoleculeRecord> Dataset::split_records(const std::string& name) const {
    std::vector<MoleculeRecord> out;
    for (size_t i : split(name))
        out.push_back(records[i]);
    return out;
}

void Dataset::validate() const {
    std::set<size_t> seen;
    for (const auto& [name, idx] : splits) {
        for (size_t i : idx) {
            if (i >= records.size())
                throw std::invalid_argument("split '" + name + "' references record " +
                                            std::to_string(i) + " out of range");
            if (!seen.insert(i).second)
                throw std::invalid_argument("splits overlap at record " + std::to_string(i));
        }
    }
}

Dataset load_xyz(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open xyz file: " + path);

    Dataset ds;
    std::string line;
    long lineno = 0;
    while (true) {
        long n_atoms = -1;
        long count_line = 0;
        while (std::getline(in, line)) {
            ++lineno;
            auto toks = tokenize(line);
            if (toks.empty())
                continue; // blank between frames
            if (toks.size() != 1 || !parse_int(toks[0], n_atoms) || n_atoms < 1)
                fail_at(lineno, "expected atom count, got '" + line + "'");
            count_line = lineno;
            break;
        }
        if (n_atoms < 0)
            break; // clean EOF

        if (!std::getline(in, line))
            fail_at(count_line, "missing comment line after atom count");
        ++lineno;

        MoleculeRecord rec;
        for (const std::string& tok : tokenize(line)) {
            size_t eq = tok.find('=');
            if (eq == std::string::npos || eq == 0)
                continue;
            std::string key = tok.substr(0, eq);
            std::string value = tok.substr(eq + 1);
            if (key == "bonds") {
                rec.bonds = parse_bond_annotation(value, lineno);
            } else {
                double v = 0.0;
                if (parse_double(value, v))
                    rec.properties[key] = v;
            }
        }

        for (long i = 0; i < n_atoms; ++i) {
            if (!std::getline(in, line))
                fail_at(lineno, "frame declared " + std::to_string(n_atoms) +
                                    " atoms but input ended after " + std::to_string(i));
            ++lineno;
            auto toks = tokenize(line);
            if (toks.size() < 4)
                fail_at(lineno, "expected 'Element x y z'");
            if (!find_element(toks[0]))
                fail_at(lineno, "unknown element '" + toks[0] + "'");
            Vec3 r;
            for (int c = 0; c < 3; ++c) {
                if (!parse_double(toks[c + 1], r(c)) || !std::isfinite(r(c)))
                    fail_at(lineno, "bad coordinate '" + toks[c + 1] + "'");
            }
            rec.elements.push_back(toks[0]);
            rec.positions.push_back(r);
        }

        if (rec.bonds) {
            for (const Bond& bond : *rec.bonds) {
                if (bond.b >= rec.n_atoms())
                    fail_at(count_line, "bond annotation references atom " +
                                            std::to_string(bond.b) + " out of range");
            }
        }
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

void assign_splits(Dataset& dataset, const SplitSizes& sizes, uint64_t seed) {
    size_t total = sizes.train + sizes.validation + sizes.test;
    if (total > dataset.size())
        throw std::invalid_argument("split sizes sum to " + std::to_string(total) + " but only " +
                                    std::to_string(dataset.size()) + " records exist");
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});
    RngStream rng = RngStream::substream(seed, "split");
    rng.shuffle(order);

    auto take = [&](size_t offset, size_t n) {
        return std::vector<size_t>(order.begin() + offset, order.begin() + offset + n);
    };
    dataset.splits.clear();
    dataset.splits["train"] = take(0, sizes.train);
    dataset.splits["validation"] = take(sizes.train, sizes.validation);
    dataset.splits["test"] = take(sizes.train + sizes.validation, sizes.test);
    dataset.validate();
}

Dataset filter_by_property(const Dataset& dataset, const std::string& name,
                           PropertyPredicate predicate, double threshold) {
    if (name.empty())
        throw std::invalid_argument("property name must be nonempty");
    std::vector<size_t> missing;
    Dataset out;
    for (size_t i = 0; i < dataset.size(); ++i) {
        const MoleculeRecord& rec = dataset.records[i];
        auto it = rec.properties.find(name);
        if (it == rec.properties.end()) {
            missing.push_back(i);
            continue;
        }
        bool keep = predicate == PropertyPredicate::le ? it->second <= threshold
                                                       : it->second >= threshold;
        if (keep)
            out.records.push_back(rec);
    }
    if (!missing.empty()) {
        std::string idx;
        for (size_t i : missing)
            idx += (idx.empty() ? "" : ", ") + std::to_string(i);
        throw std::runtime_error("records missing property '" + name + "': " + idx);
    }
    return out;
}

std::string format_record_comment(const MoleculeRecord& record) {
    std::string out;
    char buf[64];
    for (const auto& [key, value] : record.properties) {
        std::snprintf(buf, sizeof(buf), "%.17g", value);
        out += (out.empty() ? "" : " ") + key + "=" + buf;
    }
    if (record.bonds) {
        std::string bonds;
        for (const Bond& b : *record.bonds) {
            if (!bonds.empty())
                bonds += ",";
            bonds += std::to_string(b.a) + "-" + std::to_string(b.b) + ":" +
                     std::to_string(b.order);
        }
        if (!bonds.empty())
            out += (out.empty() ? "" : " ") + std::string("bonds=") + bonds;
    }
    return out;
}

void save_structures(const std::vector<MoleculeRecord>& records,
                     const std::vector<std::string>& comments, const std::string& path) {
    if (records.size() != comments.size())
        throw std::invalid_argument("save_structures: records/comments size mismatch");
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp);
        if (!out)
            throw std::runtime_error("cannot open for writing: " + tmp);
        char buf[160];
        for (size_t i = 0; i < records.size(); ++i) {
            const MoleculeRecord& rec = records[i];
            out << rec.n_atoms() << "\n" << comments[i] << "\n";
            for (int a = 0; a < rec.n_atoms(); ++a) {
                std::snprintf(buf, sizeof(buf), "%s %.9f %.9f %.9f\n", rec.elements[a].c_str(),
                              rec.positions[a](0), rec.positions[a](1), rec.positions[a](2));
                out << buf;
            }
        }
        if (!out)
            throw std::runtime_error("write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

void save_structures(const std::vector<MoleculeRecord>& records, const std::string& path) {
    std::vector<std::string> comments;
    comments.reserve(records.size());
    for (const auto& rec : records)
        comments.push_back(format_record_comment(rec));
    save_structures(records, comments, path);
}

} // namespace g3dgen
