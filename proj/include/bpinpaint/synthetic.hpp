#pragma once

#include <cstdint>

#include "bpinpaint/tensor.hpp"

namespace bpinpaint {

/// Band-limited texture: sum of eight seeded sinusoidal gratings, normalized to
/// [0,1]. `time` shifts every grating's phase, giving a smoothly drifting scene.
Tensor synthetic_texture(std::size_t rows, std::size_t cols, std::uint64_t seed, double time = 0.0);

}  // namespace bpinpaint
