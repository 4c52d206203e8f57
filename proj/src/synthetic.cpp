#include "bpinpaint/synthetic.hpp"

#include <cmath>
#include <numbers>

#include "bpinpaint/rng.hpp"

namespace bpinpaint {

Tensor synthetic_texture(std::size_t rows, std::size_t cols, std::uint64_t seed, double time) {
    constexpr int kGratings = 8;
    struct Grating {
        double fy, fx, phase, amplitude, drift;
    };
    Grating g[kGratings];
    CounterStream rs(mix_key(seed, 0x7E47u), 0, 0);
    for (auto& gr : g) {
        const double angle = rs.uniform() * std::numbers::pi;
        const double period = 6.0 + 42.0 * rs.uniform();  // pixels
        const double freq = 2.0 * std::numbers::pi / period;
        gr = {freq * std::sin(angle), freq * std::cos(angle), 2.0 * std::numbers::pi * rs.uniform(),
              0.3 + 0.7 * rs.uniform(), 0.5 + rs.uniform()};
    }
    Tensor t{TensorShape{rows, cols}};
    for (std::size_t y = 0; y < rows; ++y) {
        for (std::size_t x = 0; x < cols; ++x) {
            double v = 0.0;
            for (const auto& gr : g) {
                v += gr.amplitude * std::sin(gr.fy * static_cast<double>(y) +
                                             gr.fx * static_cast<double>(x) + gr.phase +
                                             gr.drift * time);
            }
            t.data[y * cols + x] = v;
        }
    }
    return normalize(t).tensor;
}

}  // namespace bpinpaint
