#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpinpaint/pipeline.hpp"

namespace bpinpaint {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parses problem definitions written as UTF-8 `key = value` lines grouped
/// under `[problem NAME]` headers. `#` and `;` start comments.
///
///   [problem live]
///   patch = 10,10
///   atoms = 64
///   sampler = uniform-random
///   ratio = 0.2
///   epochs = 2
std::vector<ProblemConfig> parse_problem_config(const std::string& text);
std::vector<ProblemConfig> load_problem_config(const std::filesystem::path& path);

/// Applies one `key = value` setting; throws ConfigError for unknown keys or bad values.
void apply_problem_setting(ProblemConfig& cfg, const std::string& key, const std::string& value);

}  // namespace bpinpaint
