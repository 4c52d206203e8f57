#include "bpinpaint/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace bpinpaint {

namespace {

std::string trim(const std::string& s) {
    auto b = std::find_if_not(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
    auto e = std::find_if_not(s.rbegin(), s.rend(), [](unsigned char c) { return std::isspace(c); }).base();
    return b < e ? std::string(b, e) : std::string();
}

double to_number(const std::string& key, const std::string& value) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(value, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != value.size()) {
        throw ConfigError("'" + key + "' expects a number, got '" + value + "'");
    }
    return v;
}

std::size_t to_count(const std::string& key, const std::string& value) {
    const double v = to_number(key, value);
    if (v < 0 || v != static_cast<double>(static_cast<std::size_t>(v))) {
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + value + "'");
    }
    return static_cast<std::size_t>(v);
}

bool to_flag(const std::string& key, const std::string& value) {
    if (value == "true" || value == "on" || value == "yes" || value == "1") return true;
    if (value == "false" || value == "off" || value == "no" || value == "0") return false;
    throw ConfigError("'" + key + "' expects true/false, got '" + value + "'");
}

}  // namespace

void apply_problem_setting(ProblemConfig& cfg, const std::string& key, const std::string& value) {
    try {
        if (key == "patch") {
            cfg.patch.patch_shape = parse_dims(value);
        } else if (key == "stride") {
            cfg.patch.stride = parse_dims(value);
        } else if (key == "atoms") {
            cfg.hyper.K = to_count(key, value);
        } else if (key == "epochs") {
            cfg.epochs_per_frame = to_count(key, value);
        } else if (key == "sampler") {
            cfg.sampler.kind = sampler_kind_from_string(value);
        } else if (key == "strategy") {
            cfg.strategy = value;
        } else if (key == "ratio") {
            cfg.sampler.ratio = to_number(key, value);
        } else if (key == "mask_seed") {
            cfg.sampler.seed = to_count(key, value);
        } else if (key == "seed") {
            cfg.seed = to_count(key, value);
            cfg.sampler.seed = cfg.seed;
        } else if (key == "tile" || key == "exploit") {
            cfg.sampler.parameters[key] = to_number(key, value);
        } else if (key == "freeze_dict") {
            cfg.freeze_dict = to_flag(key, value);
        } else if (key == "warm_start") {
            cfg.warm_start = to_flag(key, value);
        } else if (key == "data_consistency") {
            cfg.data_consistency = to_flag(key, value);
        } else if (key == "reference") {
            cfg.reference_available = to_flag(key, value);
        } else if (key == "mean_subtract") {
            cfg.mean_subtract = to_flag(key, value);
        } else if (key == "refresh_mask") {
            cfg.refresh_mask = to_flag(key, value);
        } else if (key == "init") {
            if (value == "prior") {
                cfg.init = InitMode::prior;
            } else if (value == "data") {
                cfg.init = InitMode::data;
            } else {
                throw ConfigError("'init' expects prior or data");
            }
        } else if (key == "a") {
            cfg.hyper.a = to_number(key, value);
        } else if (key == "b") {
            cfg.hyper.b = to_number(key, value);
        } else if (key == "c") {
            cfg.hyper.c = to_number(key, value);
        } else if (key == "d") {
            cfg.hyper.d = to_number(key, value);
        } else if (key == "e") {
            cfg.hyper.e = to_number(key, value);
        } else if (key == "f") {
            cfg.hyper.f = to_number(key, value);
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& ex) {
        throw ConfigError("bad value for '" + key + "': " + ex.what());
    }
}

std::vector<ProblemConfig> parse_problem_config(const std::string& text) {
    std::vector<ProblemConfig> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto where = [&] { return "line " + std::to_string(lineno) + ": "; };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(where() + "unterminated section header");
            const std::string inner = trim(line.substr(1, line.size() - 2));
            if (inner.rfind("problem", 0) != 0 || inner.size() <= 7 || !std::isspace(inner[7])) {
                throw ConfigError(where() + "expected [problem NAME]");
            }
            ProblemConfig cfg;
            cfg.name = trim(inner.substr(7));
            cfg.patch.patch_shape = {10, 10};
            out.push_back(std::move(cfg));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(where() + "expected key = value");
        if (out.empty()) throw ConfigError(where() + "setting outside a [problem NAME] section");
        try {
            apply_problem_setting(out.back(), trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& ex) {
            throw ConfigError(where() + ex.what());
        }
    }
    for (const auto& cfg : out) {
        try {
            cfg.validate();
        } catch (const std::exception& ex) {
            throw ConfigError("problem '" + cfg.name + "': " + ex.what());
        }
    }
    return out;
}

std::vector<ProblemConfig> load_problem_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_problem_config(ss.str());
}

}  // namespace bpinpaint
