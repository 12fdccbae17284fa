#include "g3dgen/elements.hpp"

#include <array>
#include <stdexcept>
#include <string>

namespace g3dgen {

namespace {

constexpr std::array<ElementInfo, 5> kElements{{
    {"H", 1, 0.31, 1.008},
    {"C", 4, 0.76, 12.011},
    {"N", 3, 0.71, 14.007},
    {"O", 2, 0.66, 15.999},
    {"F", 1, 0.57, 18.998},
}};

} // namespace

const ElementInfo* find_element(std::string_view symbol) {
    for (const auto& e : kElements) {
        if (symbol == e.symbol)
            return &e;
    }
    return nullptr;
}

const ElementInfo& element_info(std::string_view symbol) {
    const ElementInfo* e = find_element(symbol);
    if (!e)
        throw std::invalid_argument("unsupported element symbol: " + std::string(symbol));
    return *e;
}

} // namespace g3dgen
