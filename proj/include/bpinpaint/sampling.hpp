#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "bpinpaint/tensor.hpp"

namespace bpinpaint {

enum class SamplerKind { uniform_random, stratified, line_hop, explicit_list, adaptive_residual };

SamplerKind sampler_kind_from_string(const std::string& name);
std::string to_string(SamplerKind kind);

/// A sampling strategy with its budget.
///
/// Recognized parameters: `tile` (stratified, default 8 meaning 8x8 tiles),
/// `exploit` (adaptive-residual, fraction of the budget placed on the highest
/// residuals, default 0.5). Explicit-list strategies carry flat indices in
/// `indices` and ignore `ratio`.
struct SamplerSpec {
    SamplerKind kind = SamplerKind::uniform_random;
    double ratio = 0.2;
    std::uint64_t seed = 0;
    std::map<std::string, double> parameters;
    std::vector<std::size_t> indices;

    double parameter(const std::string& key, double fallback) const;
    void validate() const;
};

/// round(ratio * numel), half away from zero.
std::size_t sample_budget(double ratio, std::size_t numel);

/// Frame 0 mask for a pre-determined strategy.
SampleMask make_mask(const SamplerSpec& spec, const TensorShape& shape);

/// Mask for frame `frame`. Frames draw from disjoint counter ranges so the live
/// pipeline sees a fresh pattern every frame.
SampleMask make_mask(const SamplerSpec& spec, const TensorShape& shape, std::uint64_t frame);

SampleMask next_mask_adaptive(const SampleMask& prev_mask, const Tensor& residual_map,
                              const SamplerSpec& spec, std::uint64_t frame = 0);

/// Strategy plug-in: (previous mask, residual map, spec, frame index) -> mask.
/// The previous mask and residual map are empty on the first frame.
using Strategy = std::function<SampleMask(const SampleMask& prev, const Tensor& residual,
                                          const SamplerSpec& spec, const TensorShape& shape,
                                          std::uint64_t frame)>;

class StrategyRegistry {
public:
    /// Registry pre-populated with the five built-in strategies.
    static StrategyRegistry& global();

    void add(const std::string& name, Strategy strategy);
    bool contains(const std::string& name) const;
    const Strategy& get(const std::string& name) const;
    std::vector<std::string> names() const;

private:
    StrategyRegistry();
    std::map<std::string, Strategy> strategies_;
};

}  // namespace bpinpaint
