#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace bpinpaint {

/// Thrown for any shape, layout or argument violation in the tensor layer.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

inline constexpr std::size_t kMaxRank = 4;

/// Extents of an N-dimensional row-major array, 1 <= rank <= 4.
class TensorShape {
public:
    TensorShape() = default;
    explicit TensorShape(std::vector<std::size_t> dims);
    TensorShape(std::initializer_list<std::size_t> dims)
        : TensorShape(std::vector<std::size_t>(dims)) {}

    std::size_t rank() const { return dims_.size(); }
    std::size_t operator[](std::size_t i) const { return dims_[i]; }
    const std::vector<std::size_t>& dims() const { return dims_; }
    std::size_t numel() const;

    /// Row-major strides (last dimension fastest).
    std::vector<std::size_t> strides() const;
    std::string to_string() const;

    bool operator==(const TensorShape&) const = default;

private:
    std::vector<std::size_t> dims_;
};

struct Tensor {
    TensorShape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(TensorShape s, double fill = 0.0)
        : shape(std::move(s)), data(shape.numel(), fill) {}
    Tensor(TensorShape s, std::vector<double> values);

    std::size_t size() const { return data.size(); }
    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }
};

/// Boolean observation mask; `observed[j] != 0` marks element j as sampled.
struct SampleMask {
    TensorShape shape;
    std::vector<std::uint8_t> observed;

    SampleMask() = default;
    explicit SampleMask(TensorShape s, bool fill = false)
        : shape(std::move(s)), observed(shape.numel(), fill ? 1 : 0) {}

    std::size_t count() const;
    double ratio() const;
    bool operator[](std::size_t i) const { return observed[i] != 0; }
};

struct PatchSpec {
    std::vector<std::size_t> patch_shape;
    std::vector<std::size_t> stride;  // empty means all ones

    std::size_t patch_size() const;
    /// Throws ShapeError unless the spec fits `shape`.
    void validate(const TensorShape& shape) const;
    std::size_t stride_at(std::size_t i) const { return stride.empty() ? 1 : stride[i]; }
    /// Patch positions along each dimension: floor((M_i - B_i) / s_i) + 1.
    std::vector<std::size_t> grid(const TensorShape& shape) const;
    std::size_t patch_count(const TensorShape& shape) const;
};

/// Patches laid out as an N x P row-major matrix.
struct PatchMatrix {
    std::size_t n = 0;  // patch count
    std::size_t p = 0;  // elements per patch
    TensorShape source_shape;
    PatchSpec spec;
    std::vector<double> values;            // n*p, 0 where unobserved
    std::vector<std::uint8_t> observed;    // n*p
    std::vector<std::size_t> origins;      // n*rank, grid origin per patch
    std::vector<double> means;             // n

    std::span<const double> row(std::size_t i) const { return {values.data() + i * p, p}; }
    std::span<const std::uint8_t> mask_row(std::size_t i) const {
        return {observed.data() + i * p, p};
    }
    std::size_t observed_count(std::size_t i) const;
};

PatchMatrix extract_patches(const Tensor& t, const SampleMask& mask, const PatchSpec& spec,
                            bool mean_subtract);

struct Reconstitution {
    Tensor tensor;
    std::vector<std::uint32_t> coverage;
    std::size_t uncovered = 0;
};

/// Overlap-average of patch estimates (means added back). With `strict` set, any
/// element that no patch covers raises ShapeError.
Reconstitution reconstitute(const PatchMatrix& pm, std::span<const double> estimates,
                            bool strict = false);

Tensor apply_data_consistency(const Tensor& recon, const Tensor& original,
                              const SampleMask& mask, bool enabled);

struct Normalization {
    Tensor tensor;
    double scale = 1.0;
    double offset = 0.0;
};

/// Affine map onto [0,1]. Constant input maps to zeros with scale 1; input that
/// already lies in [0,1] is returned unchanged.
Normalization normalize(const Tensor& t);
Tensor denormalize(const Tensor& t, double scale, double offset);

/// Concatenates patch matrices of one patch shape (e.g. from several images) for
/// joint learning. The result carries no usable origins and cannot be reconstituted.
PatchMatrix stack_patches(const std::vector<PatchMatrix>& parts);

/// Like normalize(), but the affine map is fitted to observed elements only, so
/// unobserved values cannot influence it.
Normalization normalize_observed(const Tensor& t, const SampleMask& mask);

/// Copy of `t` with unobserved elements zeroed.
Tensor masked(const Tensor& t, const SampleMask& mask);

std::vector<std::size_t> parse_dims(const std::string& text);

}  // namespace bpinpaint
