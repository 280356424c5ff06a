#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "def/numerics.hpp"

namespace def {

using Bits = std::vector<uint8_t>;

// One row of the bit-tuple -> real symbol pair mapping.
struct MappingRow {
    Bits bits;     // Q bits
    double sym0;   // x(2i)
    double sym1;   // x(2i+1)
};

// The printed order-Q mapping table (Q in {2, 4}). The Q=4 table is kept
// verbatim even though its rows 0110/1110 and 0111/1111 share output pairs;
// see validate_mapping().
const std::vector<MappingRow>& mapping_table(int q);

struct MappingValidation {
    bool bijective = true;
    // pairs of row indices that map to the same symbol pair
    std::vector<std::pair<int, int>> collisions;
    std::string summary;
};

// Inverse-lookup consistency check of the mapping table. Collisions are
// reported, not corrected.
MappingValidation validate_mapping(int q);

// Maps bits (length divisible by Q) to 2*len/Q real PAM symbols.
Vec modulate(const Bits& bits, int q);

// Inverse table lookup of one symbol pair; returns the first matching row.
// Throws if no row matches.
Bits demap_pair(double sym0, double sym1, int q);

// bit = 1 iff prob > 0.5 (a tie at exactly 0.5 resolves to 0).
// Throws if any prob is outside [0, 1].
Bits hard_decision(const Vec& probs);

}  // namespace def
