#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "bpinpaint/bpfa.hpp"
#include "bpinpaint/tensor.hpp"

namespace bpinpaint {

/// PSNR of identical inputs. Serialized as the string "inf".
inline constexpr double kPsnrInfinite = std::numeric_limits<double>::infinity();

struct FrameMetrics {
    std::uint64_t frame_id = 0;
    std::optional<double> psnr_db;  // only when a reference is available
    double mse = 0.0;
    double sampling_ratio = 0.0;
    double atoms_per_patch = 0.0;
    std::vector<double> pi_histogram;
    double epoch_time_ms = 0.0;
    std::size_t epochs_run = 0;
};

double mse(const Tensor& a, const Tensor& b);
/// 10 log10(peak^2 / MSE); kPsnrInfinite when the inputs are identical.
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

struct ModelStats {
    double atoms_per_patch = 0.0;
    std::vector<double> pi_histogram;
    double gamma_s = 0.0;
    double gamma_eps = 0.0;
};

ModelStats model_stats(const GibbsState& state);

/// "inf" for the infinite sentinel, shortest round-trip decimal otherwise.
std::string format_metric(double value);

}  // namespace bpinpaint
