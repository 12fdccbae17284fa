#pragma once

#include <string_view>

namespace g3dgen {

struct ElementInfo {
    const char* symbol;
    int valence;            // fixed valence used for bond assignment
    double covalent_radius; // Angstrom
    double mass;            // amu
};

// Returns nullptr for symbols outside the supported set (H, C, N, O, F).
const ElementInfo* find_element(std::string_view symbol);

// Throws std::invalid_argument naming the symbol if it is unsupported.
const ElementInfo& element_info(std::string_view symbol);

} // namespace g3dgen
