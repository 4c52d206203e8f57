#include "bpinpaint/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <mutex>
#include <stdexcept>

#include "bpinpaint/rng.hpp"

namespace bpinpaint {

namespace {

struct KindName {
    SamplerKind kind;
    const char* name;
};

constexpr KindName kKindNames[] = {
    {SamplerKind::uniform_random, "uniform-random"},
    {SamplerKind::stratified, "stratified"},
    {SamplerKind::line_hop, "line-hop"},
    {SamplerKind::explicit_list, "explicit-list"},
    {SamplerKind::adaptive_residual, "adaptive-residual"},
};

// Per-element priority; the lowest priorities are selected first. Keyed by
// (seed, strategy, frame, element) so selection never depends on visit order.
class ElementKeys {
public:
    ElementKeys(std::uint64_t seed, SamplerKind kind, std::uint64_t frame)
        : key_(mix_key(stream_key(seed, frame, StreamClass::mask),
                       static_cast<std::uint64_t>(kind))) {}

    std::uint64_t operator()(std::size_t element) const {
        return splitmix64(key_ ^ splitmix64(static_cast<std::uint64_t>(element)));
    }
    double unit(std::size_t element) const {
        return (static_cast<double>((*this)(element) >> 11) + 0.5) * 0x1.0p-53;
    }

private:
    std::uint64_t key_;
};

// Marks the `count` candidates with the smallest keys (ties by element index).
void select_lowest(std::vector<std::size_t> candidates, std::size_t count,
                   const ElementKeys& keys, SampleMask& mask) {
    count = std::min(count, candidates.size());
    if (count == 0) return;
    std::vector<std::pair<std::uint64_t, std::size_t>> ranked;
    ranked.reserve(candidates.size());
    for (auto e : candidates) ranked.emplace_back(keys(e), e);
    std::nth_element(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(count - 1),
                     ranked.end());
    for (std::size_t j = 0; j < count; ++j) mask.observed[ranked[j].second] = 1;
}

// Largest-remainder apportionment of `total` over groups of the given sizes;
// ties on the fractional part are broken by a seeded key.
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& sizes,
                                   const ElementKeys& keys) {
    std::size_t universe = 0;
    for (auto s : sizes) universe += s;
    std::vector<std::size_t> quota(sizes.size(), 0);
    if (universe == 0) return quota;
    const double ratio = static_cast<double>(total) / static_cast<double>(universe);
    std::vector<std::tuple<double, std::uint64_t, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t g = 0; g < sizes.size(); ++g) {
        const double exact = ratio * static_cast<double>(sizes[g]);
        quota[g] = std::min(sizes[g], static_cast<std::size_t>(std::floor(exact)));
        assigned += quota[g];
        if (quota[g] < sizes[g]) remainders.emplace_back(-(exact - std::floor(exact)), keys(g), g);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t r = 0; assigned < total && r < remainders.size(); ++r) {
        ++quota[std::get<2>(remainders[r])];
        ++assigned;
    }
    return quota;
}

SampleMask uniform_mask(const SamplerSpec& spec, const TensorShape& shape, std::uint64_t frame) {
    SampleMask mask(shape);
    const std::size_t n = shape.numel();
    const std::size_t budget = sample_budget(spec.ratio, n);
    if (budget == n) {
        std::fill(mask.observed.begin(), mask.observed.end(), 1);
        return mask;
    }
    std::vector<std::size_t> all(n);
    for (std::size_t e = 0; e < n; ++e) all[e] = e;
    select_lowest(std::move(all), budget, ElementKeys(spec.seed, SamplerKind::uniform_random, frame),
                  mask);
    return mask;
}

SampleMask stratified_mask(const SamplerSpec& spec, const TensorShape& shape,
                           std::uint64_t frame) {
    const auto tile = static_cast<std::size_t>(spec.parameter("tile", 8.0));
    if (tile < 1) throw std::invalid_argument("stratified tile size must be >= 1");
    const std::size_t rows = shape[0];
    const std::size_t cols = shape.rank() > 1 ? shape[1] : 1;
    const std::size_t inner = shape.numel() / (rows * cols);
    const std::size_t tiles_r = (rows + tile - 1) / tile;
    const std::size_t tiles_c = shape.rank() > 1 ? (cols + tile - 1) / tile : 1;
    const std::size_t tile_c = shape.rank() > 1 ? tile : 1;

    std::vector<std::vector<std::size_t>> members(tiles_r * tiles_c);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            auto& m = members[(r / tile) * tiles_c + c / tile_c];
            for (std::size_t q = 0; q < inner; ++q) m.push_back((r * cols + c) * inner + q);
        }
    }
    std::vector<std::size_t> sizes;
    for (const auto& m : members) sizes.push_back(m.size());

    const ElementKeys keys(spec.seed, SamplerKind::stratified, frame);
    const auto quota = apportion(sample_budget(spec.ratio, shape.numel()), sizes,
                                 ElementKeys(~spec.seed, SamplerKind::stratified, frame));
    SampleMask mask(shape);
    for (std::size_t t = 0; t < members.size(); ++t) select_lowest(members[t], quota[t], keys, mask);
    return mask;
}

SampleMask line_hop_mask(const SamplerSpec& spec, const TensorShape& shape, std::uint64_t frame) {
    if (shape.rank() < 2 || shape.rank() > 3) {
        throw std::invalid_argument("line-hop sampling requires a 2D or 3D shape");
    }
    const std::size_t width = shape[shape.rank() - 1];
    const std::size_t lines = shape.numel() / width;
    const ElementKeys keys(spec.seed, SamplerKind::line_hop, frame);
    const auto quota = apportion(sample_budget(spec.ratio, shape.numel()),
                                 std::vector<std::size_t>(lines, width), keys);
    SampleMask mask(shape);
    for (std::size_t line = 0; line < lines; ++line) {
        const std::size_t q = quota[line];
        if (q == 0) continue;
        // Evenly spaced hops with a per-line random phase; spacing >= 1 keeps them distinct.
        const double phase = keys.unit(lines + line);
        const double step = static_cast<double>(width) / static_cast<double>(q);
        for (std::size_t j = 0; j < q; ++j) {
            auto pos = static_cast<std::size_t>(std::floor((static_cast<double>(j) + phase) * step));
            pos = std::min(pos, width - 1);
            mask.observed[line * width + pos] = 1;
        }
    }
    return mask;
}

SampleMask explicit_mask(const SamplerSpec& spec, const TensorShape& shape) {
    SampleMask mask(shape);
    for (auto e : spec.indices) {
        if (e >= shape.numel()) {
            throw std::invalid_argument("explicit sample index " + std::to_string(e) +
                                        " out of bounds");
        }
        if (mask.observed[e]) {
            throw std::invalid_argument("duplicate explicit sample index " + std::to_string(e));
        }
        mask.observed[e] = 1;
    }
    return mask;
}

}  // namespace

SamplerKind sampler_kind_from_string(const std::string& name) {
    for (const auto& kn : kKindNames) {
        if (name == kn.name) return kn.kind;
    }
    throw std::invalid_argument("unknown sampler '" + name + "'");
}

std::string to_string(SamplerKind kind) {
    for (const auto& kn : kKindNames) {
        if (kn.kind == kind) return kn.name;
    }
    return "unknown";
}

double SamplerSpec::parameter(const std::string& key, double fallback) const {
    auto it = parameters.find(key);
    return it == parameters.end() ? fallback : it->second;
}

void SamplerSpec::validate() const {
    if (!(ratio >= 0.0 && ratio <= 1.0)) {
        throw std::invalid_argument("sampling ratio must lie in [0, 1]");
    }
    const double exploit = parameter("exploit", 0.5);
    if (!(exploit >= 0.0 && exploit <= 1.0)) {
        throw std::invalid_argument("exploit fraction must lie in [0, 1]");
    }
}

std::size_t sample_budget(double ratio, std::size_t numel) {
    return std::min(numel, static_cast<std::size_t>(std::llround(ratio * static_cast<double>(numel))));
}

SampleMask make_mask(const SamplerSpec& spec, const TensorShape& shape) {
    return make_mask(spec, shape, 0);
}

SampleMask make_mask(const SamplerSpec& spec, const TensorShape& shape, std::uint64_t frame) {
    spec.validate();
    switch (spec.kind) {
        case SamplerKind::uniform_random:
        case SamplerKind::adaptive_residual:
            return uniform_mask(spec, shape, frame);
        case SamplerKind::stratified:
            return stratified_mask(spec, shape, frame);
        case SamplerKind::line_hop:
            return line_hop_mask(spec, shape, frame);
        case SamplerKind::explicit_list:
            return explicit_mask(spec, shape);
    }
    throw std::invalid_argument("unhandled sampler kind");
}

SampleMask next_mask_adaptive(const SampleMask& prev_mask, const Tensor& residual_map,
                              const SamplerSpec& spec, std::uint64_t frame) {
    spec.validate();
    if (!(prev_mask.shape == residual_map.shape)) {
        throw ShapeError("adaptive sampler: mask and residual shapes differ");
    }
    const TensorShape& shape = residual_map.shape;
    const std::size_t n = shape.numel();
    std::vector<std::size_t> hot;
    for (std::size_t e = 0; e < n; ++e) {
        const double r = residual_map.data[e];
        if (!(r >= 0.0) || !std::isfinite(r)) {
            throw std::invalid_argument("residual map must be finite and non-negative");
        }
        if (r > 0.0) hot.push_back(e);
    }
    if (hot.empty()) return uniform_mask(spec, shape, frame);

    const std::size_t budget = sample_budget(spec.ratio, n);
    const auto exploit =
        static_cast<std::size_t>(std::llround(spec.parameter("exploit", 0.5) * static_cast<double>(budget)));
    std::stable_sort(hot.begin(), hot.end(), [&](std::size_t x, std::size_t y) {
        return residual_map.data[x] > residual_map.data[y];
    });
    SampleMask mask(shape);
    // Exploit budget beyond the positive-residual set falls back to exploration.
    const std::size_t taken = std::min(exploit, hot.size());
    for (std::size_t j = 0; j < taken; ++j) mask.observed[hot[j]] = 1;

    std::vector<std::size_t> rest;
    rest.reserve(n - taken);
    for (std::size_t e = 0; e < n; ++e) {
        if (!mask.observed[e]) rest.push_back(e);
    }
    select_lowest(std::move(rest), budget - taken,
                  ElementKeys(spec.seed, SamplerKind::uniform_random, frame), mask);
    return mask;
}

StrategyRegistry::StrategyRegistry() {
    auto predetermined = [](const SampleMask&, const Tensor&, const SamplerSpec& spec,
                            const TensorShape& shape, std::uint64_t frame) {
        return make_mask(spec, shape, frame);
    };
    strategies_["uniform-random"] = predetermined;
    strategies_["stratified"] = predetermined;
    strategies_["line-hop"] = predetermined;
    strategies_["explicit-list"] = predetermined;
    strategies_["adaptive-residual"] = [](const SampleMask& prev, const Tensor& residual,
                                          const SamplerSpec& spec, const TensorShape& shape,
                                          std::uint64_t frame) {
        if (residual.data.empty()) return make_mask(spec, shape, frame);
        return next_mask_adaptive(prev.observed.empty() ? SampleMask(shape) : prev, residual, spec,
                                  frame);
    };
}

namespace {
std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}
}  // namespace

StrategyRegistry& StrategyRegistry::global() {
    static StrategyRegistry registry;
    return registry;
}

void StrategyRegistry::add(const std::string& name, Strategy strategy) {
    std::lock_guard lock(registry_mutex());
    strategies_[name] = std::move(strategy);
}

bool StrategyRegistry::contains(const std::string& name) const {
    std::lock_guard lock(registry_mutex());
    return strategies_.count(name) != 0;
}

const Strategy& StrategyRegistry::get(const std::string& name) const {
    std::lock_guard lock(registry_mutex());
    auto it = strategies_.find(name);
    if (it == strategies_.end()) throw std::invalid_argument("unknown strategy '" + name + "'");
    return it->second;
}

std::vector<std::string> StrategyRegistry::names() const {
    std::lock_guard lock(registry_mutex());
    std::vector<std::string> out;
    for (const auto& [name, _] : strategies_) out.push_back(name);
    return out;
}

}  // namespace bpinpaint
