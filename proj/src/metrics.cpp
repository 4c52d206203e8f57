#include "bpinpaint/metrics.hpp"

#include <charconv>
#include <cmath>
#include <stdexcept>

namespace bpinpaint {

double mse(const Tensor& a, const Tensor& b) {
    if (!(a.shape == b.shape)) throw ShapeError("metric inputs have different shapes");
    double acc = 0.0;
    for (std::size_t e = 0; e < a.size(); ++e) {
        const double diff = a.data[e] - b.data[e];
        acc += diff * diff;
    }
    return acc / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
    if (!(peak > 0.0)) throw std::invalid_argument("PSNR peak must be positive");
    const double err = mse(a, b);
    if (err == 0.0) return kPsnrInfinite;
    return 10.0 * std::log10(peak * peak / err);
}

ModelStats model_stats(const GibbsState& state) {
    ModelStats out;
    if (state.code.n > 0) {
        out.atoms_per_patch =
            static_cast<double>(state.code.active_count()) / static_cast<double>(state.code.n);
    }
    out.pi_histogram = state.dict.pi;
    out.gamma_s = state.gamma_s;
    out.gamma_eps = state.gamma_eps;
    return out;
}

std::string format_metric(double value) {
    if (std::isinf(value) && value > 0) return "inf";
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    if (ec != std::errc()) return "nan";
    return std::string(buf, end);
}

}  // namespace bpinpaint
