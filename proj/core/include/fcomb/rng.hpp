#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fcomb {

std::uint64_t splitmix64(std::uint64_t& state);

// Folds each path component into the state with one splitmix64 step.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> path);

// mt19937_64 words -> 53-bit uniforms -> Box-Muller pairs.
// The whole chain is fixed here so streams agree across standard libraries.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double uniform();  // [0, 1)
    double next();     // N(0, 1)

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace fcomb
