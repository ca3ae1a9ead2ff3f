#include "fusion/steering.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "fusion/errors.hpp"

namespace fusion {

void SteeringParams::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw ConfigError("SteeringParams: alpha must be in [0, 1]");
    }
    if (!std::isfinite(gamma)) throw ConfigError("SteeringParams: gamma must be finite");
}

SteeringConfig SteeringConfig::full_layer(SteeringParams p) {
    SteeringConfig c;
    c.mode = SteeringMode::FullLayer;
    c.full = p;
    return c;
}

SteeringConfig SteeringConfig::segmented(SteeringParams early, SteeringParams middle,
                                         SteeringParams late) {
    SteeringConfig c;
    c.mode = SteeringMode::Segmented;
    c.groups = {early, middle, late};
    return c;
}

void SteeringConfig::validate() const {
    if (mode == SteeringMode::FullLayer) {
        full.validate();
    } else {
        for (const auto& p : groups) p.validate();
    }
}

std::size_t LayerGrouping::group_of(std::size_t layer) const {
    for (std::size_t g = 0; g < 3; ++g) {
        if (layer >= bounds[g] && layer < bounds[g + 1]) return g;
    }
    throw InputError("LayerGrouping: layer " + std::to_string(layer) +
                     " outside the partition");
}

LayerGrouping partition_layers(int n_layers) {
    if (n_layers < 3) {
        throw ConfigError("partition_layers: need at least 3 layers");
    }
    const std::size_t n = static_cast<std::size_t>(n_layers);
    const std::size_t head = (n + 2) / 3;  // ceil(n/3)
    std::size_t a = head, b = head;
    if (a + b >= n) b = n - a - 1;  // keep the third group non-empty
    return LayerGrouping{{0, a, a + b, n}};
}

Matrix compute_mu(const Weights& weights, const TokenSequence& question_tokens) {
    const ForwardResult fwd = forward(weights, question_tokens, HookSet{});
    const auto n_layers = fwd.acts.layers.size();
    const auto d = static_cast<std::size_t>(weights.config.d_model);
    Matrix mu(n_layers, d);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const Matrix& layer = fwd.acts.layers[l];
        double* out = mu.row(l);
        for (std::size_t t = 0; t < layer.rows; ++t) {
            const double* row = layer.row(t);
            for (std::size_t j = 0; j < d; ++j) out[j] += row[j];
        }
        const double inv = 1.0 / static_cast<double>(layer.rows);
        for (std::size_t j = 0; j < d; ++j) out[j] *= inv;
    }
    return mu;
}

ShiftState compute_shift(const ReferenceActivations& reference, const Matrix& mu) {
    if (!reference.h.same_shape(mu)) {
        throw ConfigError("compute_shift: reference/mu shape mismatch");
    }
    ShiftState s;
    s.mu = mu;
    s.delta = Matrix(mu.rows, mu.cols);
    for (std::size_t i = 0; i < mu.data.size(); ++i) {
        s.delta.data[i] = reference.h.data[i] - mu.data[i];
    }
    return s;
}

SteeringParams resolve_params(const SteeringConfig& config,
                              const LayerGrouping& grouping, std::size_t layer,
                              std::size_t n_layers) {
    if (layer >= n_layers) {
        throw InputError("resolve_params: layer index out of range");
    }
    if (config.mode == SteeringMode::FullLayer) return config.full;
    return config.groups[grouping.group_of(layer)];
}

HookSet build_hooks(const ShiftState& shift, const SteeringConfig& config,
                    const LayerGrouping& grouping) {
    config.validate();
    const std::size_t n_layers = shift.delta.rows;
    const std::size_t d = shift.delta.cols;
    HookSet hooks(n_layers);
    for (std::size_t l = 0; l < n_layers; ++l) {
        const SteeringParams p = resolve_params(config, grouping, l, n_layers);
        std::vector<double> add(d);
        const double* delta = shift.delta.row(l);
        for (std::size_t j = 0; j < d; ++j) add[j] = p.alpha * p.gamma * delta[j];
        hooks.set(l, [add = std::move(add)](Matrix& m) {
            for (std::size_t i = 0; i < m.rows; ++i) {
                double* row = m.row(i);
                for (std::size_t j = 0; j < m.cols; ++j) row[j] += add[j];
            }
        });
    }
    return hooks;
}

}  // namespace fusion
