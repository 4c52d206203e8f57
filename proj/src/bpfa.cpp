#include "bpinpaint/bpfa.hpp"

#include <algorithm>
#include <atomic>
#include <cfloat>
#include <cmath>
#include <numeric>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "bpinpaint/rng.hpp"

namespace bpinpaint {

void Hyperparams::validate() const {
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (!(a > 0 && b > 0 && c > 0 && d > 0 && e > 0 && f > 0)) {
        throw std::invalid_argument("hyperparameters a, b, c, d, e, f must be positive");
    }
}

std::size_t Dictionary::atom_size() const {
    return std::accumulate(patch_shape.begin(), patch_shape.end(), std::size_t{1},
                           std::multiplies<>());
}

std::size_t Dictionary::size() const {
    const std::size_t p = atom_size();
    return p == 0 ? 0 : atoms.size() / p;
}

std::size_t SparseCode::active_count() const {
    return static_cast<std::size_t>(std::count(z.begin(), z.end(), std::uint8_t{1}));
}

void set_worker_count(int threads) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

namespace {

// Reductions are split into fixed-size patch chunks and combined in chunk
// order, so floating-point sums do not depend on the worker count.
constexpr std::size_t kChunk = 256;

std::size_t chunk_count(std::size_t n) { return (n + kChunk - 1) / kChunk; }

template <class F>
double chunked_sum(std::size_t n, F&& term) {
    const std::size_t chunks = chunk_count(n);
    std::vector<double> partial(chunks, 0.0);
    const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t c = 0; c < nc; ++c) {
        const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
        const std::size_t hi = std::min(n, lo + kChunk);
        double acc = 0.0;
        for (std::size_t i = lo; i < hi; ++i) acc += term(i);
        partial[static_cast<std::size_t>(c)] = acc;
    }
    double total = 0.0;
    for (double v : partial) total += v;
    return total;
}

double clamp_probability(double pi) { return std::clamp(pi, DBL_MIN, 1.0 - DBL_EPSILON); }

void check_dimensions(const GibbsState& st, const PatchMatrix& pm) {
    if (st.dict.atom_size() != pm.p) {
        throw ShapeError("dictionary atom size " + std::to_string(st.dict.atom_size()) +
                         " does not match patch size " + std::to_string(pm.p));
    }
    if (st.code.n != pm.n || st.code.k != st.dict.size()) {
        throw ShapeError("sparse code dimensions do not match the patch matrix");
    }
}

struct CodeTerms {
    double log_odds;
    double alpha;
    double mean;
};

// dd = sum_{p in Omega_i} d_kp^2, de = sum_p d_kp E_ip with E the full masked residual.
CodeTerms code_terms(double dd, double de, bool z_cur, double s_cur, double pi, double gamma_s,
                     double gamma_eps) {
    const double dr = de + (z_cur ? s_cur * dd : 0.0);
    CodeTerms t;
    t.log_odds = std::log(pi) - std::log1p(-pi) -
                 0.5 * gamma_eps * (s_cur * s_cur * dd - 2.0 * s_cur * dr);
    t.alpha = std::max(gamma_s + gamma_eps * dd, kPrecisionFloor);
    t.mean = gamma_eps * dr / t.alpha;
    return t;
}

// Masked residual E = Omega o (x - D(z o s)) and the 0/1 mask as doubles.
class Workspace {
public:
    Workspace(const GibbsState& st, const PatchMatrix& pm) : n_(pm.n), p_(pm.p) {
        mask.resize(n_ * p_);
        resid.resize(n_ * p_);
        const std::size_t K = st.dict.size();
        const auto n = static_cast<std::ptrdiff_t>(n_);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            double* e = resid.data() + i * p_;
            double* m = mask.data() + i * p_;
            const double* x = pm.values.data() + i * p_;
            const std::uint8_t* o = pm.observed.data() + i * p_;
            for (std::size_t q = 0; q < p_; ++q) {
                m[q] = o[q] ? 1.0 : 0.0;
                e[q] = o[q] ? x[q] : 0.0;
            }
            for (std::size_t k = 0; k < K; ++k) {
                if (!st.code.z[i * K + k]) continue;
                const double w = st.code.s[i * K + k];
                const double* d = st.dict.atoms.data() + k * p_;
                for (std::size_t q = 0; q < p_; ++q) e[q] -= m[q] * w * d[q];
            }
        }
    }

    // Per-element sums over patches using atom k:
    //   sz2[p] = sum_{i: p in Omega_i} z_ik s_ik^2,  szr[p] = sum_{i: p in Omega_i} z_ik s_ik R_ip^(-k)
    void atom_moments(const GibbsState& st, std::size_t k, std::vector<double>& sz2,
                      std::vector<double>& szr) const {
        const std::size_t K = st.dict.size();
        const std::size_t chunks = chunk_count(n_);
        std::vector<double> partial(chunks * 2 * p_, 0.0);
        const double* d = st.dict.atoms.data() + k * p_;
        const auto nc = static_cast<std::ptrdiff_t>(chunks);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t c = 0; c < nc; ++c) {
            double* a2 = partial.data() + static_cast<std::size_t>(c) * 2 * p_;
            double* ar = a2 + p_;
            const std::size_t lo = static_cast<std::size_t>(c) * kChunk;
            const std::size_t hi = std::min(n_, lo + kChunk);
            for (std::size_t i = lo; i < hi; ++i) {
                if (!st.code.z[i * K + k]) continue;
                const double s = st.code.s[i * K + k];
                const double s2 = s * s;
                const double* m = mask.data() + i * p_;
                const double* e = resid.data() + i * p_;
                for (std::size_t q = 0; q < p_; ++q) {
                    a2[q] += m[q] * s2;
                    ar[q] += s * (e[q] + m[q] * s * d[q]);
                }
            }
        }
        sz2.assign(p_, 0.0);
        szr.assign(p_, 0.0);
        for (std::size_t c = 0; c < chunks; ++c) {
            const double* a2 = partial.data() + c * 2 * p_;
            const double* ar = a2 + p_;
            for (std::size_t q = 0; q < p_; ++q) {
                sz2[q] += a2[q];
                szr[q] += ar[q];
            }
        }
    }

    double squared_residual() const {
        return chunked_sum(n_, [&](std::size_t i) {
            const double* e = resid.data() + i * p_;
            double acc = 0.0;
            for (std::size_t q = 0; q < p_; ++q) acc += e[q] * e[q];
            return acc;
        });
    }

    std::vector<double> mask;
    std::vector<double> resid;

private:
    std::size_t n_;
    std::size_t p_;
};

void atom_conditional(const std::vector<double>& sz2, const std::vector<double>& szr, double p,
                      double gamma_eps, std::size_t q, double& precision, double& mean) {
    precision = std::max(p + gamma_eps * sz2[q], kPrecisionFloor);
    mean = gamma_eps * szr[q] / precision;
}

std::size_t observed_total(const PatchMatrix& pm) {
    return static_cast<std::size_t>(std::count(pm.observed.begin(), pm.observed.end(), 1));
}

void sample_atoms(GibbsState& st, const PatchMatrix& pm, Workspace& ws, std::uint64_t key) {
    const std::size_t K = st.dict.size();
    const std::size_t P = pm.p;
    const auto pd = static_cast<double>(P);
    std::vector<double> sz2;
    std::vector<double> szr;
    std::vector<double> delta(P);
    std::atomic<bool> bad{false};
    for (std::size_t k = 0; k < K; ++k) {
        ws.atom_moments(st, k, sz2, szr);
        auto atom = st.dict.atom(k);
        for (std::size_t q = 0; q < P; ++q) {
            double precision = 0.0;
            double mean = 0.0;
            atom_conditional(sz2, szr, pd, st.gamma_eps, q, precision, mean);
            CounterStream rs(key, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(q));
            const double fresh = mean + rs.normal() / std::sqrt(precision);
            if (!std::isfinite(fresh)) bad = true;
            delta[q] = fresh - atom[q];
            atom[q] = fresh;
        }
        if (bad) {
            throw DivergenceError("non-finite atom draw for atom " + std::to_string(k) +
                                  " (gamma_eps = " + std::to_string(st.gamma_eps) + ")");
        }
        const auto n = static_cast<std::ptrdiff_t>(pm.n);
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            if (!st.code.z[i * K + k]) continue;
            const double s = st.code.s[i * K + k];
            double* e = ws.resid.data() + i * P;
            const double* m = ws.mask.data() + i * P;
            for (std::size_t q = 0; q < P; ++q) e[q] -= m[q] * s * delta[q];
        }
    }
}

void sample_codes(GibbsState& st, const PatchMatrix& pm, Workspace& ws, std::uint64_t z_key,
                  std::uint64_t s_key) {
    const std::size_t K = st.dict.size();
    const std::size_t P = pm.p;
    std::atomic<bool> bad{false};
    const auto n = static_cast<std::ptrdiff_t>(pm.n);
    const double gs = st.gamma_s;
    const double ge = st.gamma_eps;
    const double* atoms = st.dict.atoms.data();
#pragma omp parallel
    {
        std::vector<double> dd(K);
#pragma omp for schedule(static)
        for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
            const auto i = static_cast<std::size_t>(ii);
            const double* m = ws.mask.data() + i * P;
            double* e = ws.resid.data() + i * P;
            for (std::size_t k = 0; k < K; ++k) {
                const double* d = atoms + k * P;
                double acc = 0.0;
                for (std::size_t q = 0; q < P; ++q) acc += m[q] * d[q] * d[q];
                dd[k] = acc;
            }
            for (std::size_t k = 0; k < K; ++k) {
                const double* d = atoms + k * P;
                double de = 0.0;
                for (std::size_t q = 0; q < P; ++q) de += d[q] * e[q];
                auto& z = st.code.z[i * K + k];
                auto& s = st.code.s[i * K + k];
                const CodeTerms t = code_terms(dd[k], de, z != 0, s, st.dict.pi[k], gs, ge);
                if (!std::isfinite(t.log_odds) || !std::isfinite(t.mean)) {
                    bad = true;
                    continue;
                }
                const double old_w = z ? s : 0.0;
                CounterStream zs(z_key, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k));
                const bool z_new = zs.bernoulli_logit(t.log_odds);
                CounterStream ss(s_key, static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(k));
                const double s_new = z_new ? t.mean + ss.normal() / std::sqrt(t.alpha)
                                           : ss.normal() / std::sqrt(gs);
                z = z_new ? 1 : 0;
                s = s_new;
                const double change = (z_new ? s_new : 0.0) - old_w;
                if (change != 0.0) {
                    for (std::size_t q = 0; q < P; ++q) e[q] -= m[q] * change * d[q];
                }
            }
        }
    }
    if (bad) {
        throw DivergenceError("non-finite sparse-coding conditional (gamma_eps = " +
                              std::to_string(ge) + ", gamma_s = " + std::to_string(gs) + ")");
    }
}

std::vector<std::size_t> usage_counts(const GibbsState& st) {
    const std::size_t K = st.dict.size();
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < st.code.n; ++i) {
        for (std::size_t k = 0; k < K; ++k) counts[k] += st.code.z[i * K + k];
    }
    return counts;
}

double sum_squared_weights(const GibbsState& st) {
    const std::size_t K = st.code.k;
    return chunked_sum(st.code.n, [&](std::size_t i) {
        double acc = 0.0;
        for (std::size_t k = 0; k < K; ++k) acc += st.code.s[i * K + k] * st.code.s[i * K + k];
        return acc;
    });
}

GibbsState empty_state(const PatchMatrix& pm, const Hyperparams& hp, std::uint64_t seed) {
    GibbsState st;
    st.rng_seed = seed;
    st.dict.patch_shape = pm.spec.patch_shape;
    st.dict.atoms.assign(hp.K * pm.p, 0.0);
    st.dict.pi.assign(hp.K, clamp_probability(hp.a / (hp.a + hp.b)));
    st.code.n = pm.n;
    st.code.k = hp.K;
    st.code.z.assign(pm.n * hp.K, 0);
    st.code.s.assign(pm.n * hp.K, 0.0);
    st.gamma_s = hp.c / hp.d;
    st.gamma_eps = hp.e / hp.f;
    return st;
}

void draw_prior_atom(GibbsState& st, std::size_t k, std::uint64_t key) {
    auto atom = st.dict.atom(k);
    const double sd = 1.0 / std::sqrt(static_cast<double>(atom.size()));
    for (std::size_t q = 0; q < atom.size(); ++q) {
        CounterStream rs(key, static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(q));
        atom[q] = sd * rs.normal();
    }
}

}  // namespace

GibbsState init_state(const PatchMatrix& pm, const Hyperparams& hp, std::uint64_t seed,
                      InitMode mode) {
    hp.validate();
    if (pm.n < 1 || pm.p < 1) throw ShapeError("patch matrix is empty");
    GibbsState st = empty_state(pm, hp, seed);
    const std::uint64_t key = stream_key(seed, 0, StreamClass::init_atom);
    std::size_t seeded = 0;
    if (mode == InitMode::data) {
        std::vector<std::size_t> order(pm.n);
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::vector<std::size_t> counts(pm.n);
        for (std::size_t i = 0; i < pm.n; ++i) counts[i] = pm.observed_count(i);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t x, std::size_t y) { return counts[x] > counts[y]; });
        for (std::size_t j = 0; j < pm.n && seeded < hp.K; ++j) {
            const auto row = pm.row(order[j]);
            double norm = 0.0;
            for (double v : row) norm += v * v;
            if (norm <= 0.0) continue;
            norm = std::sqrt(norm);
            auto atom = st.dict.atom(seeded);
            for (std::size_t q = 0; q < pm.p; ++q) atom[q] = row[q] / norm;
            ++seeded;
        }
    }
    for (std::size_t k = seeded; k < hp.K; ++k) draw_prior_atom(st, k, key);
    return st;
}

GibbsState install_dictionary(const PatchMatrix& pm, const Hyperparams& hp, std::uint64_t seed,
                              const Dictionary& dict) {
    if (dict.patch_shape != pm.spec.patch_shape) {
        throw ShapeError("dictionary patch shape does not match the problem's patch shape");
    }
    Hyperparams sized = hp;
    sized.K = dict.size();
    GibbsState st = empty_state(pm, sized, seed);
    st.dict.atoms = dict.atoms;
    if (dict.pi.size() == sized.K) {
        for (std::size_t k = 0; k < sized.K; ++k) st.dict.pi[k] = clamp_probability(dict.pi[k]);
    }
    return st;
}

void gibbs_epoch(GibbsState& st, const PatchMatrix& pm, const Hyperparams& hp, bool freeze_dict) {
    check_dimensions(st, pm);
    const std::size_t K = st.dict.size();
    const std::uint64_t epoch = st.epoch;
    Workspace ws(st, pm);

    if (!freeze_dict && st.code.active_count() > 0) {
        sample_atoms(st, pm, ws, stream_key(st.rng_seed, epoch, StreamClass::atom));
    }
    sample_codes(st, pm, ws, stream_key(st.rng_seed, epoch, StreamClass::indicator),
                 stream_key(st.rng_seed, epoch, StreamClass::weight));

    const auto counts = usage_counts(st);
    const std::uint64_t usage_key = stream_key(st.rng_seed, epoch, StreamClass::usage);
    const double a_k = static_cast<double>(hp.a) / static_cast<double>(K);
    const double b_k = hp.b * static_cast<double>(K - 1) / static_cast<double>(K);
    for (std::size_t k = 0; k < K; ++k) {
        CounterStream rs(usage_key, static_cast<std::uint32_t>(k), 0);
        const auto used = static_cast<double>(counts[k]);
        st.dict.pi[k] =
            clamp_probability(rs.beta(a_k + used, b_k + static_cast<double>(pm.n) - used));
    }

    {
        CounterStream rs(stream_key(st.rng_seed, epoch, StreamClass::weight_precision), 0, 0);
        const double shape = hp.c + 0.5 * static_cast<double>(pm.n * K);
        const double rate = hp.d + 0.5 * sum_squared_weights(st);
        st.gamma_s = std::max(rs.gamma(shape, rate), kPrecisionFloor);
    }
    {
        CounterStream rs(stream_key(st.rng_seed, epoch, StreamClass::noise_precision), 0, 0);
        const double shape = hp.e + 0.5 * static_cast<double>(observed_total(pm));
        const double rate = hp.f + 0.5 * ws.squared_residual();
        st.gamma_eps = std::max(rs.gamma(shape, rate), kPrecisionFloor);
    }
    if (!std::isfinite(st.gamma_s) || !std::isfinite(st.gamma_eps)) {
        throw DivergenceError("non-finite precision draw");
    }
    ++st.epoch;
}

std::vector<double> estimate_patches(const GibbsState& st) {
    const std::size_t K = st.dict.size();
    const std::size_t P = st.dict.atom_size();
    std::vector<double> out(st.code.n * P, 0.0);
    const auto n = static_cast<std::ptrdiff_t>(st.code.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        double* row = out.data() + i * P;
        for (std::size_t k = 0; k < K; ++k) {
            if (!st.code.z[i * K + k]) continue;
            const double w = st.code.s[i * K + k];
            const double* d = st.dict.atoms.data() + k * P;
            for (std::size_t q = 0; q < P; ++q) row[q] += w * d[q];
        }
    }
    return out;
}

InferResult continue_inference(GibbsState state, const PatchMatrix& pm, const Hyperparams& hp,
                               std::size_t epochs, bool freeze_dict, std::size_t tail_average) {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    const std::size_t tail = std::min(tail_average, epochs);
    std::vector<double> accum;
    for (std::size_t ep = 0; ep < epochs; ++ep) {
        gibbs_epoch(state, pm, hp, freeze_dict);
        if (tail > 1 && ep + tail >= epochs) {
            auto est = estimate_patches(state);
            if (accum.empty()) {
                accum = std::move(est);
            } else {
                for (std::size_t j = 0; j < accum.size(); ++j) accum[j] += est[j];
            }
        }
    }
    InferResult out;
    if (tail > 1) {
        for (auto& v : accum) v /= static_cast<double>(tail);
        out.estimates = std::move(accum);
    } else {
        out.estimates = estimate_patches(state);
    }
    out.state = std::move(state);
    return out;
}

InferResult infer(const PatchMatrix& pm, const Hyperparams& hp, const InferOptions& options) {
    GibbsState st = options.initial_dict
                        ? install_dictionary(pm, hp, options.seed, *options.initial_dict)
                        : init_state(pm, hp, options.seed, options.init);
    Hyperparams effective = hp;
    effective.K = st.dict.size();
    return continue_inference(std::move(st), pm, effective, options.epochs, options.freeze_dict,
                              options.tail_average);
}

bool transfer_compatible(const std::vector<std::size_t>& src, const std::vector<std::size_t>& dst) {
    if (src == dst) return true;
    return dst.size() == src.size() + 1 && std::equal(src.begin(), src.end(), dst.begin());
}

Dictionary transfer_dictionary(const Dictionary& src, const std::vector<std::size_t>& dst_shape) {
    if (!transfer_compatible(src.patch_shape, dst_shape)) {
        auto fmt = [](const std::vector<std::size_t>& v) {
            std::string s = "(";
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
            return s + ")";
        };
        throw ShapeError("cannot transfer atoms of shape " + fmt(src.patch_shape) +
                         " to patch shape " + fmt(dst_shape));
    }
    if (src.patch_shape == dst_shape) return src;

    const std::size_t channels = dst_shape.back();
    const std::size_t K = src.size();
    const std::size_t P = src.atom_size();
    Dictionary out;
    out.patch_shape = dst_shape;
    out.pi = src.pi;
    out.atoms.assign(K * P * channels, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
        const auto atom = src.atom(k);
        double* dst = out.atoms.data() + k * P * channels;
        for (std::size_t q = 0; q < P; ++q) {
            for (std::size_t c = 0; c < channels; ++c) dst[q * channels + c] = atom[q];
        }
        double norm = 0.0;
        for (std::size_t j = 0; j < P * channels; ++j) norm += dst[j] * dst[j];
        norm = std::sqrt(norm);
        if (norm > 0.0) {
            for (std::size_t j = 0; j < P * channels; ++j) dst[j] /= norm;
        }
    }
    return out;
}

Conditionals conditionals_at(const GibbsState& st, const PatchMatrix& pm, const Hyperparams& hp) {
    check_dimensions(st, pm);
    const std::size_t K = st.dict.size();
    const std::size_t P = pm.p;
    const std::size_t N = pm.n;
    Workspace ws(st, pm);
    Conditionals out;
    out.atom_precision.resize(K * P);
    out.atom_mean.resize(K * P);
    std::vector<double> sz2;
    std::vector<double> szr;
    for (std::size_t k = 0; k < K; ++k) {
        ws.atom_moments(st, k, sz2, szr);
        for (std::size_t q = 0; q < P; ++q) {
            atom_conditional(sz2, szr, static_cast<double>(P), st.gamma_eps, q,
                             out.atom_precision[k * P + q], out.atom_mean[k * P + q]);
        }
    }
    out.log_odds.resize(N * K);
    out.weight_precision.resize(N * K);
    out.weight_mean.resize(N * K);
    for (std::size_t i = 0; i < N; ++i) {
        const double* m = ws.mask.data() + i * P;
        const double* e = ws.resid.data() + i * P;
        for (std::size_t k = 0; k < K; ++k) {
            const double* d = st.dict.atoms.data() + k * P;
            double dd = 0.0;
            double de = 0.0;
            for (std::size_t q = 0; q < P; ++q) {
                dd += m[q] * d[q] * d[q];
                de += d[q] * e[q];
            }
            const CodeTerms t = code_terms(dd, de, st.code.z[i * K + k] != 0, st.code.s[i * K + k],
                                           st.dict.pi[k], st.gamma_s, st.gamma_eps);
            out.log_odds[i * K + k] = t.log_odds;
            out.weight_precision[i * K + k] = t.alpha;
            out.weight_mean[i * K + k] = t.mean;
        }
    }
    const auto counts = usage_counts(st);
    for (std::size_t k = 0; k < K; ++k) {
        const auto used = static_cast<double>(counts[k]);
        out.usage_a.push_back(hp.a / static_cast<double>(K) + used);
        out.usage_b.push_back(hp.b * static_cast<double>(K - 1) / static_cast<double>(K) +
                              static_cast<double>(N) - used);
    }
    out.weight_prec_shape = hp.c + 0.5 * static_cast<double>(N * K);
    out.weight_prec_rate = hp.d + 0.5 * sum_squared_weights(st);
    out.noise_prec_shape = hp.e + 0.5 * static_cast<double>(observed_total(pm));
    out.noise_prec_rate = hp.f + 0.5 * ws.squared_residual();
    return out;
}

double masked_squared_error(const GibbsState& st, const PatchMatrix& pm) {
    check_dimensions(st, pm);
    return Workspace(st, pm).squared_residual();
}

std::size_t sample_indicator_repeatedly(const GibbsState& st, const PatchMatrix& pm, std::size_t i,
                                        std::size_t k, std::size_t draws, std::uint64_t seed) {
    const Conditionals c = conditionals_at(st, pm, Hyperparams{.K = st.dict.size()});
    const double log_odds = c.log_odds[i * st.dict.size() + k];
    std::size_t ones = 0;
    for (std::size_t t = 0; t < draws; ++t) {
        CounterStream zs(stream_key(seed, t, StreamClass::indicator), static_cast<std::uint32_t>(i),
                         static_cast<std::uint32_t>(k));
        ones += zs.bernoulli_logit(log_odds) ? 1 : 0;
    }
    return ones;
}

}  // namespace bpinpaint
