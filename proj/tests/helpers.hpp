#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "bpinpaint/tensor.hpp"

namespace testutil {

inline bpinpaint::Tensor random_tensor(const bpinpaint::TensorShape& shape, std::uint32_t seed,
                                       double lo = 0.0, double hi = 1.0) {
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    bpinpaint::Tensor t(shape);
    for (auto& v : t.data) v = dist(gen);
    return t;
}

inline bpinpaint::SampleMask random_mask(const bpinpaint::TensorShape& shape, std::uint32_t seed,
                                         double p) {
    std::mt19937 gen(seed);
    std::bernoulli_distribution coin(p);
    bpinpaint::SampleMask m(shape);
    for (auto& o : m.observed) o = coin(gen) ? 1 : 0;
    return m;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("bpinpaint_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string data_path(const std::string& file) {
    return std::string(BPINPAINT_TEST_DATA) + "/" + file;
}

}  // namespace testutil
