#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "bpinpaint/tensor.hpp"

namespace bpinpaint {

/// Raised when a conditional evaluates to a non-finite value.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Truncation level and prior hyperparameters of the beta-process factor model.
///
///   pi_k  ~ Beta(a/K, b(K-1)/K)
///   gamma_s   ~ Gamma(c, d)    weight precision (shape, rate)
///   gamma_eps ~ Gamma(e, f)    noise precision (shape, rate)
struct Hyperparams {
    std::size_t K = 64;
    double a = 1.0;
    double b = 1.0;
    double c = 1e-6;
    double d = 1e-6;
    double e = 1e-6;
    double f = 1e-6;

    void validate() const;
    double usage_prior_a() const { return a / static_cast<double>(K); }
    double usage_prior_b() const { return b * static_cast<double>(K - 1) / static_cast<double>(K); }
};

struct Dictionary {
    std::vector<std::size_t> patch_shape;
    std::vector<double> atoms;  // K x P row-major
    std::vector<double> pi;     // K, may be empty when usage probabilities are unknown

    std::size_t size() const;  // K
    std::size_t atom_size() const;  // P
    std::span<const double> atom(std::size_t k) const {
        return {atoms.data() + k * atom_size(), atom_size()};
    }
    std::span<double> atom(std::size_t k) { return {atoms.data() + k * atom_size(), atom_size()}; }
};

struct SparseCode {
    std::size_t n = 0;
    std::size_t k = 0;
    std::vector<std::uint8_t> z;  // n x k
    std::vector<double> s;        // n x k

    double weight(std::size_t i, std::size_t j) const { return z[i * k + j] ? s[i * k + j] : 0.0; }
    std::size_t active_count() const;
};

struct GibbsState {
    Dictionary dict;
    SparseCode code;
    double gamma_s = 1.0;
    double gamma_eps = 1.0;
    std::uint64_t epoch = 0;
    std::uint64_t rng_seed = 0;
};

enum class InitMode { prior, data };

inline constexpr double kPrecisionFloor = 1e-12;

GibbsState init_state(const PatchMatrix& pm, const Hyperparams& hp, std::uint64_t seed,
                      InitMode mode = InitMode::prior);

/// State built around an existing dictionary: codes zeroed, precisions at their
/// prior means, usage probabilities taken from `dict` (or the prior mean when absent).
GibbsState install_dictionary(const PatchMatrix& pm, const Hyperparams& hp, std::uint64_t seed,
                              const Dictionary& dict);

/// One systematic Gibbs sweep: atoms (unless frozen), then per patch the
/// indicator/weight pairs, then usage probabilities, weight precision and
/// noise precision. A freshly initialized state with no active indicators skips
/// the atom step, which would otherwise redraw every atom from its prior.
void gibbs_epoch(GibbsState& state, const PatchMatrix& pm, const Hyperparams& hp,
                 bool freeze_dict);

/// D (z_i o s_i) for every patch, N x P.
std::vector<double> estimate_patches(const GibbsState& state);

struct InferOptions {
    std::size_t epochs = 1;
    std::uint64_t seed = 0;
    bool freeze_dict = false;
    InitMode init = InitMode::prior;
    std::optional<Dictionary> initial_dict;
    std::size_t tail_average = 0;  // average estimates over the last T epochs; 0 = last sample
};

struct InferResult {
    GibbsState state;
    std::vector<double> estimates;  // N x P
};

InferResult infer(const PatchMatrix& pm, const Hyperparams& hp, const InferOptions& options);

/// Continue sampling from `state` (warm start) for `epochs` sweeps.
InferResult continue_inference(GibbsState state, const PatchMatrix& pm, const Hyperparams& hp,
                               std::size_t epochs, bool freeze_dict, std::size_t tail_average = 0);

/// Adapt `src` to atoms of `dst_patch_shape`. Identical shapes copy bitwise; a
/// destination with one extra trailing (channel) dimension receives each atom
/// replicated across every channel slice, rescaled to unit Euclidean norm.
Dictionary transfer_dictionary(const Dictionary& src, const std::vector<std::size_t>& dst_patch_shape);

bool transfer_compatible(const std::vector<std::size_t>& src_shape,
                         const std::vector<std::size_t>& dst_shape);

/// Full-conditional parameters evaluated at a fixed state, computed by the same
/// kernels the sweep uses. Nothing is sampled.
struct Conditionals {
    std::vector<double> atom_precision;    // lambda_kp, K x P
    std::vector<double> atom_mean;         // mu_kp, K x P
    std::vector<double> log_odds;          // log rho_ik, N x K (at the current s_ik)
    std::vector<double> weight_precision;  // alpha_ik, N x K
    std::vector<double> weight_mean;       // N x K
    std::vector<double> usage_a;           // Beta shape 1 per atom
    std::vector<double> usage_b;           // Beta shape 2 per atom
    double weight_prec_shape = 0.0;
    double weight_prec_rate = 0.0;
    double noise_prec_shape = 0.0;
    double noise_prec_rate = 0.0;
};

Conditionals conditionals_at(const GibbsState& state, const PatchMatrix& pm, const Hyperparams& hp);

/// Sum over observed elements of the squared residual x - D(z o s).
double masked_squared_error(const GibbsState& state, const PatchMatrix& pm);

/// Draws z_ik from its full conditional `draws` times with independent streams
/// and returns how many came up 1. The state is not modified.
std::size_t sample_indicator_repeatedly(const GibbsState& state, const PatchMatrix& pm,
                                        std::size_t i, std::size_t k, std::size_t draws,
                                        std::uint64_t seed);

/// Caps OpenMP workers; 0 leaves the runtime default.
void set_worker_count(int threads);
int worker_count();

}  // namespace bpinpaint
