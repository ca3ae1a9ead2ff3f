#pragma once

#include <array>
#include <cstddef>

#include "fusion/capture.hpp"
#include "fusion/model.hpp"

namespace fusion {

struct SteeringParams {
    double alpha = 0.0;  // fusion weight in [0, 1]
    double gamma = 0.0;  // steering strength

    void validate() const;
};

enum class SteeringMode { FullLayer, Segmented };

// Either one pair for every layer or one pair per early/middle/late group.
struct SteeringConfig {
    SteeringMode mode = SteeringMode::FullLayer;
    SteeringParams full;
    std::array<SteeringParams, 3> groups;  // ordered early, middle, late

    static SteeringConfig full_layer(SteeringParams p);
    static SteeringConfig segmented(SteeringParams early, SteeringParams middle,
                                    SteeringParams late);
    void validate() const;
};

// Three contiguous half-open layer ranges covering [0, n_layers).
struct LayerGrouping {
    std::array<std::size_t, 4> bounds;  // group g is [bounds[g], bounds[g+1])

    std::size_t group_of(std::size_t layer) const;
};

// First two groups take ceil(n_layers/3) layers each, the third the
// remainder; when that would leave the third group empty (n_layers = 4) the
// middle group gives up one layer so all three stay non-empty. 26 layers
// partition as [0,9), [9,18), [18,26).
LayerGrouping partition_layers(int n_layers);

// Inference-time means and the unscaled shift per layer. gamma is applied
// when hooks are built, so one ShiftState serves every trial of a study.
struct ShiftState {
    Matrix mu;     // [n_layers x d_model]
    Matrix delta;  // h - mu
};

// No-hook forward over the bare question prompt; row l is the mean of the
// layer's activations over all positions.
Matrix compute_mu(const Weights& weights, const TokenSequence& question_tokens);

ShiftState compute_shift(const ReferenceActivations& reference, const Matrix& mu);

SteeringParams resolve_params(const SteeringConfig& config,
                              const LayerGrouping& grouping, std::size_t layer,
                              std::size_t n_layers);

// One hook per layer adding alpha * gamma * delta[l] to every row: the
// closed form of the shift, uniform-add and fusion steps composed.
HookSet build_hooks(const ShiftState& shift, const SteeringConfig& config,
                    const LayerGrouping& grouping);

}  // namespace fusion
