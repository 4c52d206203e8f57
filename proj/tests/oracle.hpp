#pragma once

// Straight-from-formula reference for the Gibbs full conditionals. Written
// independently of the sampler: every quantity is recomputed from the raw state
// with plain loops and no shared helpers.

#include <cmath>
#include <random>
#include <vector>

#include "bpinpaint/bpfa.hpp"

namespace oracle {

struct Reference {
    std::vector<double> lambda, mu;          // K x P
    std::vector<double> log_rho;             // N x K
    std::vector<double> alpha, weight_mean;  // N x K
    std::vector<double> beta_a, beta_b;      // K
    double gs_shape = 0, gs_rate = 0, ge_shape = 0, ge_rate = 0;
};

inline Reference conditionals(const bpinpaint::GibbsState& st, const bpinpaint::PatchMatrix& pm,
                              const bpinpaint::Hyperparams& hp) {
    const std::size_t N = pm.n, P = pm.p, K = st.dict.atoms.size() / P;
    auto x = [&](std::size_t i, std::size_t p) { return pm.values[i * P + p]; };
    auto m = [&](std::size_t i, std::size_t p) { return pm.observed[i * P + p] ? 1.0 : 0.0; };
    auto d = [&](std::size_t k, std::size_t p) { return st.dict.atoms[k * P + p]; };
    auto z = [&](std::size_t i, std::size_t k) { return st.code.z[i * K + k] ? 1.0 : 0.0; };
    auto s = [&](std::size_t i, std::size_t k) { return st.code.s[i * K + k]; };
    // Residual with atom k's contribution removed.
    auto r_minus = [&](std::size_t i, std::size_t p, std::size_t k) {
        double v = x(i, p);
        for (std::size_t j = 0; j < K; ++j) {
            if (j != k) v -= d(j, p) * z(i, j) * s(i, j);
        }
        return v;
    };
    const double ge = st.gamma_eps, gs = st.gamma_s;

    Reference ref;
    for (std::size_t k = 0; k < K; ++k) {
        for (std::size_t p = 0; p < P; ++p) {
            double prec = static_cast<double>(P);
            double lin = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                prec += ge * m(i, p) * z(i, k) * s(i, k) * s(i, k);
                lin += m(i, p) * z(i, k) * s(i, k) * r_minus(i, p, k);
            }
            ref.lambda.push_back(prec);
            ref.mu.push_back(ge * lin / prec);
        }
    }
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < K; ++k) {
            double dd = 0.0, dr = 0.0;
            for (std::size_t p = 0; p < P; ++p) {
                dd += m(i, p) * d(k, p) * d(k, p);
                dr += m(i, p) * d(k, p) * r_minus(i, p, k);
            }
            const double pi = st.dict.pi[k];
            const double sik = s(i, k);
            ref.log_rho.push_back(std::log(pi / (1.0 - pi)) - 0.5 * ge * (sik * sik * dd - 2.0 * sik * dr));
            const double a = gs + ge * dd;
            ref.alpha.push_back(a);
            ref.weight_mean.push_back(ge * dr / a);
        }
    }
    for (std::size_t k = 0; k < K; ++k) {
        double used = 0.0;
        for (std::size_t i = 0; i < N; ++i) used += z(i, k);
        ref.beta_a.push_back(hp.a / static_cast<double>(K) + used);
        ref.beta_b.push_back(hp.b * (static_cast<double>(K) - 1.0) / static_cast<double>(K) +
                             static_cast<double>(N) - used);
    }
    double s2 = 0.0, omega = 0.0, sq = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t k = 0; k < K; ++k) s2 += s(i, k) * s(i, k);
        for (std::size_t p = 0; p < P; ++p) {
            omega += m(i, p);
            double fit = 0.0;
            for (std::size_t k = 0; k < K; ++k) fit += d(k, p) * z(i, k) * s(i, k);
            sq += m(i, p) * (x(i, p) - fit) * (x(i, p) - fit);
        }
    }
    ref.gs_shape = hp.c + 0.5 * static_cast<double>(N * K);
    ref.gs_rate = hp.d + 0.5 * s2;
    ref.ge_shape = hp.e + 0.5 * omega;
    ref.ge_rate = hp.f + 0.5 * sq;
    return ref;
}

/// |a - b| / max(|b|, tiny); exact zeros compare by absolute difference.
inline double rel_err(double a, double b) {
    const double scale = std::abs(b);
    return scale > 1e-300 ? std::abs(a - b) / scale : std::abs(a - b);
}


struct Instance {
    bpinpaint::PatchMatrix pm;
    bpinpaint::GibbsState state;
    bpinpaint::Hyperparams hp;
};

/// Random instance with N <= 3, K <= 2, P <= 4 and arbitrary masks and codes.
inline Instance random_instance(std::uint32_t seed) {
    std::mt19937 gen(seed);
    auto pick = [&](std::size_t lo, std::size_t hi) {
        return std::uniform_int_distribution<std::size_t>(lo, hi)(gen);
    };
    auto unif = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); };
    std::normal_distribution<double> normal(0.0, 1.0);

    Instance in;
    const std::size_t N = pick(1, 3), K = pick(1, 2), P = pick(1, 4);
    in.pm.n = N;
    in.pm.p = P;
    in.pm.source_shape = bpinpaint::TensorShape{N * P};
    in.pm.spec.patch_shape = {P};
    for (std::size_t j = 0; j < N * P; ++j) {
        const bool seen = unif(0, 1) < 0.7;
        in.pm.observed.push_back(seen ? 1 : 0);
        in.pm.values.push_back(seen ? normal(gen) : 0.0);
    }
    in.pm.means.assign(N, 0.0);
    for (std::size_t i = 0; i < N; ++i) in.pm.origins.push_back(i * P);

    in.hp.K = K;
    in.hp.a = unif(0.1, 3);
    in.hp.b = unif(0.1, 3);
    in.hp.c = unif(1e-6, 2);
    in.hp.d = unif(1e-6, 2);
    in.hp.e = unif(1e-6, 2);
    in.hp.f = unif(1e-6, 2);

    auto& st = in.state;
    st.dict.patch_shape = {P};
    for (std::size_t j = 0; j < K * P; ++j) st.dict.atoms.push_back(normal(gen) / std::sqrt(double(P)));
    for (std::size_t k = 0; k < K; ++k) st.dict.pi.push_back(unif(0.02, 0.98));
    st.code.n = N;
    st.code.k = K;
    for (std::size_t j = 0; j < N * K; ++j) {
        st.code.z.push_back(unif(0, 1) < 0.5 ? 1 : 0);
        st.code.s.push_back(normal(gen));
    }
    st.gamma_s = unif(0.1, 10);
    st.gamma_eps = unif(0.5, 100);
    st.rng_seed = seed;
    return in;
}

}  // namespace oracle
