#include "fusion/rng.hpp"

#include <cmath>
#include <numbers>

namespace fusion {

namespace {

std::uint64_t value_at(std::initializer_list<std::uint64_t> key, std::uint64_t counter) {
    std::uint64_t h = mix_key(key);
    return mix64(h ^ counter);
}

}  // namespace

double normal_at(std::initializer_list<std::uint64_t> key, std::uint64_t index) {
    const double u1 = u01_open(value_at(key, 2 * index));
    const double u2 = u01(value_at(key, 2 * index + 1));
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double uniform_at(std::initializer_list<std::uint64_t> key, std::uint64_t index,
                  double lo, double hi) {
    return lo + u01(value_at(key, index)) * (hi - lo);
}

}  // namespace fusion
