#include "bpinpaint/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace bpinpaint {

TensorShape::TensorShape(std::vector<std::size_t> dims) : dims_(std::move(dims)) {
    if (dims_.empty() || dims_.size() > kMaxRank) {
        throw ShapeError("tensor rank must be in [1, 4], got " + std::to_string(dims_.size()));
    }
    for (auto d : dims_) {
        if (d == 0) throw ShapeError("tensor dimensions must be positive");
    }
}

std::size_t TensorShape::numel() const {
    if (dims_.empty()) return 0;
    return std::accumulate(dims_.begin(), dims_.end(), std::size_t{1}, std::multiplies<>());
}

std::vector<std::size_t> TensorShape::strides() const {
    std::vector<std::size_t> s(dims_.size(), 1);
    for (std::size_t i = dims_.size(); i-- > 1;) s[i - 1] = s[i] * dims_[i];
    return s;
}

std::string TensorShape::to_string() const {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < dims_.size(); ++i) os << (i ? "," : "") << dims_[i];
    os << ')';
    return os.str();
}

Tensor::Tensor(TensorShape s, std::vector<double> values)
    : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape.numel()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape.to_string());
    }
}

std::size_t SampleMask::count() const {
    return static_cast<std::size_t>(std::count_if(observed.begin(), observed.end(),
                                                  [](std::uint8_t v) { return v != 0; }));
}

double SampleMask::ratio() const {
    return observed.empty() ? 0.0
                            : static_cast<double>(count()) / static_cast<double>(observed.size());
}

std::size_t PatchSpec::patch_size() const {
    return std::accumulate(patch_shape.begin(), patch_shape.end(), std::size_t{1},
                           std::multiplies<>());
}

void PatchSpec::validate(const TensorShape& shape) const {
    if (patch_shape.size() != shape.rank()) {
        throw ShapeError("patch rank " + std::to_string(patch_shape.size()) +
                         " does not match tensor rank " + std::to_string(shape.rank()));
    }
    if (!stride.empty() && stride.size() != shape.rank()) {
        throw ShapeError("stride rank does not match tensor rank");
    }
    for (std::size_t i = 0; i < shape.rank(); ++i) {
        if (patch_shape[i] < 1 || patch_shape[i] > shape[i]) {
            throw ShapeError("patch extent " + std::to_string(patch_shape[i]) + " on dim " +
                             std::to_string(i) + " outside [1, " + std::to_string(shape[i]) +
                             "]");
        }
        if (stride_at(i) < 1) throw ShapeError("stride must be >= 1");
    }
}

std::vector<std::size_t> PatchSpec::grid(const TensorShape& shape) const {
    validate(shape);
    std::vector<std::size_t> g(shape.rank());
    for (std::size_t i = 0; i < shape.rank(); ++i) {
        g[i] = (shape[i] - patch_shape[i]) / stride_at(i) + 1;
    }
    return g;
}

std::size_t PatchSpec::patch_count(const TensorShape& shape) const {
    auto g = grid(shape);
    return std::accumulate(g.begin(), g.end(), std::size_t{1}, std::multiplies<>());
}

std::size_t PatchMatrix::observed_count(std::size_t i) const {
    auto m = mask_row(i);
    return static_cast<std::size_t>(std::count_if(m.begin(), m.end(), [](auto v) { return v; }));
}

namespace {

// Flat tensor offset of every element of a patch anchored at the origin.
std::vector<std::size_t> patch_offsets(const TensorShape& shape, const PatchSpec& spec) {
    const auto strides = shape.strides();
    const std::size_t rank = shape.rank();
    const std::size_t p = spec.patch_size();
    std::vector<std::size_t> offsets(p);
    std::vector<std::size_t> idx(rank, 0);
    for (std::size_t j = 0; j < p; ++j) {
        std::size_t off = 0;
        for (std::size_t d = 0; d < rank; ++d) off += idx[d] * strides[d];
        offsets[j] = off;
        for (std::size_t d = rank; d-- > 0;) {
            if (++idx[d] < spec.patch_shape[d]) break;
            idx[d] = 0;
        }
    }
    return offsets;
}

std::size_t origin_offset(const PatchMatrix& pm, std::size_t i,
                          const std::vector<std::size_t>& strides) {
    const std::size_t rank = pm.source_shape.rank();
    std::size_t off = 0;
    for (std::size_t d = 0; d < rank; ++d) off += pm.origins[i * rank + d] * strides[d];
    return off;
}

}  // namespace

PatchMatrix extract_patches(const Tensor& t, const SampleMask& mask, const PatchSpec& spec,
                            bool mean_subtract) {
    if (!(mask.shape == t.shape)) {
        throw ShapeError("mask shape " + mask.shape.to_string() + " does not match tensor shape " +
                         t.shape.to_string());
    }
    const auto grid = spec.grid(t.shape);
    const std::size_t rank = t.shape.rank();

    PatchMatrix pm;
    pm.source_shape = t.shape;
    pm.spec = spec;
    if (pm.spec.stride.empty()) pm.spec.stride.assign(rank, 1);
    pm.n = spec.patch_count(t.shape);
    pm.p = spec.patch_size();
    pm.values.assign(pm.n * pm.p, 0.0);
    pm.observed.assign(pm.n * pm.p, 0);
    pm.origins.assign(pm.n * rank, 0);
    pm.means.assign(pm.n, 0.0);

    std::vector<std::size_t> g(rank, 0);
    for (std::size_t i = 0; i < pm.n; ++i) {
        for (std::size_t d = 0; d < rank; ++d) pm.origins[i * rank + d] = g[d] * spec.stride_at(d);
        for (std::size_t d = rank; d-- > 0;) {
            if (++g[d] < grid[d]) break;
            g[d] = 0;
        }
    }

    const auto offsets = patch_offsets(t.shape, spec);
    const auto strides = t.shape.strides();
    const auto n = static_cast<std::ptrdiff_t>(pm.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const std::size_t base = origin_offset(pm, i, strides);
        double* row = pm.values.data() + i * pm.p;
        std::uint8_t* obs = pm.observed.data() + i * pm.p;
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t j = 0; j < pm.p; ++j) {
            const std::size_t e = base + offsets[j];
            if (mask.observed[e]) {
                obs[j] = 1;
                row[j] = t.data[e];
                sum += row[j];
                ++count;
            }
        }
        if (mean_subtract && count > 0) {
            const double mean = sum / static_cast<double>(count);
            pm.means[i] = mean;
            for (std::size_t j = 0; j < pm.p; ++j) {
                if (obs[j]) row[j] -= mean;
            }
        }
    }
    return pm;
}

Reconstitution reconstitute(const PatchMatrix& pm, std::span<const double> estimates,
                            bool strict) {
    if (estimates.size() != pm.n * pm.p) {
        throw ShapeError("estimate matrix is " + std::to_string(estimates.size()) +
                         " values, expected " + std::to_string(pm.n * pm.p));
    }
    Reconstitution out;
    out.tensor = Tensor(pm.source_shape, 0.0);
    out.coverage.assign(pm.source_shape.numel(), 0);

    const auto offsets = patch_offsets(pm.source_shape, pm.spec);
    const auto strides = pm.source_shape.strides();
    // Sequential scatter in patch order fixes the summation order.
    for (std::size_t i = 0; i < pm.n; ++i) {
        const std::size_t base = origin_offset(pm, i, strides);
        const double mean = pm.means[i];
        const double* est = estimates.data() + i * pm.p;
        for (std::size_t j = 0; j < pm.p; ++j) {
            const std::size_t e = base + offsets[j];
            out.tensor.data[e] += est[j] + mean;
            out.coverage[e] += 1;
        }
    }
    for (std::size_t e = 0; e < out.coverage.size(); ++e) {
        if (out.coverage[e] == 0) {
            ++out.uncovered;
        } else if (out.coverage[e] > 1) {
            out.tensor.data[e] /= static_cast<double>(out.coverage[e]);
        }
    }
    if (strict && out.uncovered > 0) {
        throw ShapeError(std::to_string(out.uncovered) + " elements are not covered by any patch");
    }
    return out;
}

Tensor apply_data_consistency(const Tensor& recon, const Tensor& original,
                              const SampleMask& mask, bool enabled) {
    if (!(recon.shape == original.shape) || !(recon.shape == mask.shape)) {
        throw ShapeError("data consistency requires equal shapes");
    }
    Tensor out = recon;
    if (!enabled) return out;
    for (std::size_t e = 0; e < out.size(); ++e) {
        if (mask.observed[e]) out.data[e] = original.data[e];
    }
    return out;
}

Normalization normalize(const Tensor& t) {
    if (t.data.empty()) throw ShapeError("cannot normalize an empty tensor");
    double lo = t.data[0];
    double hi = t.data[0];
    for (double v : t.data) {
        if (!std::isfinite(v)) throw std::domain_error("tensor contains non-finite values");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Normalization out;
    if (lo >= 0.0 && hi <= 1.0) {
        out.tensor = t;
        return out;
    }
    out.offset = lo;
    out.tensor = Tensor(t.shape, 0.0);
    if (hi == lo) return out;
    out.scale = hi - lo;
    for (std::size_t e = 0; e < t.size(); ++e) out.tensor.data[e] = (t.data[e] - lo) / out.scale;
    return out;
}

Normalization normalize_observed(const Tensor& t, const SampleMask& mask) {
    if (!(t.shape == mask.shape)) throw ShapeError("mask shape does not match tensor shape");
    std::vector<double> seen;
    for (std::size_t e = 0; e < t.size(); ++e) {
        if (mask.observed[e]) seen.push_back(t.data[e]);
    }
    Normalization out;
    if (seen.empty()) {
        out.tensor = Tensor(t.shape, 0.0);
        return out;
    }
    const TensorShape flat{seen.size()};
    const Normalization fit = normalize(Tensor(flat, std::move(seen)));
    out.scale = fit.scale;
    out.offset = fit.offset;
    out.tensor = Tensor(t.shape, 0.0);
    for (std::size_t e = 0; e < t.size(); ++e) {
        out.tensor.data[e] = mask.observed[e] ? (t.data[e] - out.offset) / out.scale : 0.0;
    }
    return out;
}

PatchMatrix stack_patches(const std::vector<PatchMatrix>& parts) {
    if (parts.empty()) throw ShapeError("nothing to stack");
    PatchMatrix out;
    out.p = parts.front().p;
    out.spec = parts.front().spec;
    out.source_shape = parts.front().source_shape;
    for (const auto& pm : parts) {
        if (pm.spec.patch_shape != out.spec.patch_shape) {
            throw ShapeError("stacked patch matrices must share a patch shape");
        }
        out.n += pm.n;
        out.values.insert(out.values.end(), pm.values.begin(), pm.values.end());
        out.observed.insert(out.observed.end(), pm.observed.begin(), pm.observed.end());
        out.means.insert(out.means.end(), pm.means.begin(), pm.means.end());
    }
    return out;
}

Tensor denormalize(const Tensor& t, double scale, double offset) {
    Tensor out = t;
    for (auto& v : out.data) v = v * scale + offset;
    return out;
}

Tensor masked(const Tensor& t, const SampleMask& mask) {
    if (!(t.shape == mask.shape)) throw ShapeError("mask shape does not match tensor shape");
    Tensor out = t;
    for (std::size_t e = 0; e < out.size(); ++e) {
        if (!mask.observed[e]) out.data[e] = 0.0;
    }
    return out;
}

std::vector<std::size_t> parse_dims(const std::string& text) {
    std::vector<std::size_t> dims;
    std::string item;
    std::istringstream is(text);
    while (std::getline(is, item, ',')) {
        if (item.empty()) throw ShapeError("empty entry in dimension list '" + text + "'");
        std::size_t used = 0;
        long long v = 0;
        try {
            v = std::stoll(item, &used);
        } catch (const std::exception&) {
            throw ShapeError("bad dimension list '" + text + "'");
        }
        if (used != item.size() || v < 1) throw ShapeError("bad dimension list '" + text + "'");
        dims.push_back(static_cast<std::size_t>(v));
    }
    if (dims.empty()) throw ShapeError("empty dimension list");
    return dims;
}

}  // namespace bpinpaint
