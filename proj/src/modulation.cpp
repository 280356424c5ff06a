#include "def/modulation.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

namespace def {

namespace {

std::vector<MappingRow> make_table_q2() {
    return {
        {{0, 0}, 1.0, 1.0},
        {{0, 1}, 1.0, -1.0},
        {{1, 0}, -1.0, 1.0},
        {{1, 1}, -1.0, -1.0},
    };
}

std::vector<MappingRow> make_table_q4() {
    return {
        {{0, 0, 0, 0}, 3.0, 3.0},   {{0, 0, 0, 1}, 3.0, 1.0},
        {{0, 0, 1, 0}, 3.0, -3.0},  {{0, 0, 1, 1}, 3.0, -1.0},
        {{0, 1, 0, 0}, 1.0, 3.0},   {{0, 1, 0, 1}, 1.0, 1.0},
        {{0, 1, 1, 0}, -1.0, -3.0}, {{0, 1, 1, 1}, -1.0, -1.0},
        {{1, 0, 0, 0}, -3.0, 3.0},  {{1, 0, 0, 1}, -3.0, 1.0},
        {{1, 0, 1, 0}, -3.0, -3.0}, {{1, 0, 1, 1}, -3.0, -1.0},
        {{1, 1, 0, 0}, -1.0, 3.0},  {{1, 1, 0, 1}, -1.0, 1.0},
        {{1, 1, 1, 0}, -1.0, -3.0}, {{1, 1, 1, 1}, -1.0, -1.0},
    };
}

}  // namespace

const std::vector<MappingRow>& mapping_table(int q) {
    static const std::vector<MappingRow> q2 = make_table_q2();
    static const std::vector<MappingRow> q4 = make_table_q4();
    if (q == 2) return q2;
    if (q == 4) return q4;
    throw std::invalid_argument("mapping_table: Q must be 2 or 4, got " + std::to_string(q));
}

MappingValidation validate_mapping(int q) {
    const auto& table = mapping_table(q);
    MappingValidation result;
    std::map<std::pair<double, double>, int> seen;
    for (int i = 0; i < static_cast<int>(table.size()); ++i) {
        const auto key = std::make_pair(table[i].sym0, table[i].sym1);
        auto it = seen.find(key);
        if (it != seen.end()) {
            result.bijective = false;
            result.collisions.emplace_back(it->second, i);
        } else {
            seen.emplace(key, i);
        }
    }
    std::ostringstream os;
    if (result.bijective) {
        os << "Q=" << q << " mapping is bijective over all " << table.size() << " tuples";
    } else {
        os << "Q=" << q << " mapping is NOT bijective; colliding rows:";
        for (auto [a, b] : result.collisions) os << " (" << a << "," << b << ")";
    }
    result.summary = os.str();
    return result;
}

Vec modulate(const Bits& bits, int q) {
    const auto& table = mapping_table(q);
    // The order-2 table is separable (bit b -> 1-2b per component), so an odd
    // trailing bit still maps cleanly to one symbol; order 4 is not separable
    // and requires whole groups.
    if (q == 2 && bits.size() % 2 != 0) {
        Bits head(bits.begin(), bits.end() - 1);
        Vec out = modulate(head, q);
        const uint8_t bit = bits.back();
        if (bit > 1) throw std::invalid_argument("modulate: non-binary input");
        out.push_back(1.0 - 2.0 * bit);
        return out;
    }
    if (bits.size() % static_cast<size_t>(q) != 0) {
        throw std::invalid_argument("modulate: bit count " + std::to_string(bits.size()) +
                                    " not divisible by Q=" + std::to_string(q));
    }
    Vec out;
    out.reserve(2 * bits.size() / q);
    for (size_t i = 0; i < bits.size(); i += q) {
        size_t index = 0;
        for (int b = 0; b < q; ++b) {
            const uint8_t bit = bits[i + b];
            if (bit > 1) throw std::invalid_argument("modulate: non-binary input");
            index = (index << 1) | bit;
        }
        const MappingRow& row = table[index];
        out.push_back(row.sym0);
        out.push_back(row.sym1);
    }
    return out;
}

Bits demap_pair(double sym0, double sym1, int q) {
    for (const auto& row : mapping_table(q)) {
        if (row.sym0 == sym0 && row.sym1 == sym1) return row.bits;
    }
    throw std::invalid_argument("demap_pair: symbol pair not in table");
}

Bits hard_decision(const Vec& probs) {
    Bits out;
    out.reserve(probs.size());
    for (double p : probs) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw std::runtime_error("hard_decision: probability outside [0,1]");
        }
        out.push_back(p > 0.5 ? 1 : 0);
    }
    return out;
}

}  // namespace def
