#include "bpinpaint/wire.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "bpinpaint/io.hpp"

namespace bpinpaint::wire {

using nlohmann::json;

namespace {

void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>(v >> 8));
}

void put_u32(std::string& out, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

std::uint32_t get_u32(const std::string& in, std::size_t pos) {
    std::uint32_t v = 0;
    for (int s = 0; s < 4; ++s) {
        v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in[pos + s])) << (8 * s);
    }
    return v;
}

constexpr std::uint8_t kMidGrey = 128;

json psnr_value(const std::optional<double>& v) {
    if (!v) return nullptr;
    if (std::isinf(*v)) return "inf";
    return *v;
}

}  // namespace

std::string encode_frame(const WireFrame& frame) {
    if (frame.panel.pixels.size() !=
        static_cast<std::size_t>(frame.panel.width) * frame.panel.height) {
        throw std::invalid_argument("panel payload does not match its dimensions");
    }
    std::string out;
    out.reserve(kHeaderSize + frame.panel.pixels.size());
    out.push_back(static_cast<char>(frame.type));
    out.push_back(static_cast<char>(kDTypeU8));
    put_u16(out, frame.problem_id);
    put_u32(out, frame.panel.width);
    put_u32(out, frame.panel.height);
    put_u32(out, frame.frame_id);
    put_u32(out, 0);
    out.append(frame.panel.pixels.begin(), frame.panel.pixels.end());
    return out;
}

WireFrame decode_frame(const std::string& bytes) {
    if (bytes.size() < kHeaderSize) throw std::invalid_argument("wire frame shorter than header");
    const auto type = static_cast<std::uint8_t>(bytes[0]);
    if (type > 3) throw std::invalid_argument("unknown wire frame type");
    if (static_cast<std::uint8_t>(bytes[1]) != kDTypeU8) {
        throw std::invalid_argument("unsupported wire dtype");
    }
    WireFrame f;
    f.type = static_cast<FrameType>(type);
    f.problem_id = static_cast<std::uint16_t>(static_cast<std::uint8_t>(bytes[2]) |
                                              (static_cast<std::uint8_t>(bytes[3]) << 8));
    f.panel.width = get_u32(bytes, 4);
    f.panel.height = get_u32(bytes, 8);
    f.frame_id = get_u32(bytes, 12);
    const auto payload = static_cast<std::uint64_t>(f.panel.width) * f.panel.height;
    if (bytes.size() - kHeaderSize != payload) {
        throw std::invalid_argument("wire frame payload does not match width x height");
    }
    f.panel.pixels.assign(bytes.begin() + kHeaderSize, bytes.end());
    return f;
}

Panel panel_from_tensor(const Tensor& t) {
    Panel p;
    const auto& dims = t.shape.dims();
    const std::size_t rows = dims.size() >= 2 ? dims[0] : 1;
    const std::size_t cols = dims.size() >= 2 ? dims[1] : dims[0];
    const std::size_t inner = t.size() / (rows * cols);
    p.width = static_cast<std::uint32_t>(cols);
    p.height = static_cast<std::uint32_t>(rows);
    p.pixels.resize(rows * cols);
    for (std::size_t e = 0; e < rows * cols; ++e) {
        double acc = 0.0;
        for (std::size_t q = 0; q < inner; ++q) acc += t.data[e * inner + q];
        p.pixels[e] = to_u8(acc / static_cast<double>(inner));
    }
    return p;
}

std::size_t atlas_grid_side(std::size_t atoms) {
    std::size_t g = 0;
    while (g * g < atoms) ++g;
    return std::max<std::size_t>(g, 1);
}

Panel render_dictionary_atlas(const Dictionary& dict) {
    const std::size_t K = dict.size();
    const auto& shape = dict.patch_shape;
    const std::size_t th = shape.size() >= 2 ? shape[0] : 1;
    const std::size_t tw = shape.size() >= 2 ? shape[1] : shape[0];
    const std::size_t inner = dict.atom_size() / (th * tw);  // stride to the next (y, x)
    const std::size_t g = atlas_grid_side(K);

    Panel p;
    p.width = static_cast<std::uint32_t>(g * tw + (g - 1));
    p.height = static_cast<std::uint32_t>(g * th + (g - 1));
    p.pixels.assign(static_cast<std::size_t>(p.width) * p.height, kMidGrey);

    std::vector<std::size_t> order(K);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (dict.pi.size() == K) {
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return dict.pi[a] > dict.pi[b]; });
    }
    for (std::size_t cell = 0; cell < K; ++cell) {
        const auto atom = dict.atom(order[cell]);
        double lo = atom[0];
        double hi = atom[0];
        for (std::size_t e = 0; e < th * tw; ++e) {
            lo = std::min(lo, atom[e * inner]);
            hi = std::max(hi, atom[e * inner]);
        }
        const std::size_t oy = (cell / g) * (th + 1);
        const std::size_t ox = (cell % g) * (tw + 1);
        for (std::size_t y = 0; y < th; ++y) {
            for (std::size_t x = 0; x < tw; ++x) {
                const double v = atom[(y * tw + x) * inner];
                const double u = hi > lo ? (v - lo) / (hi - lo) : 0.5;
                p.pixels[(oy + y) * p.width + ox + x] = to_u8(u);
            }
        }
    }
    return p;
}

std::string metrics_json(const std::string& problem, const FrameMetrics& m) {
    json j = {
        {"kind", "metrics"},
        {"problem", problem},
        {"frame_id", m.frame_id},
        {"psnr", psnr_value(m.psnr_db)},
        {"mse", m.mse},
        {"sampling_ratio", m.sampling_ratio},
        {"atoms_per_patch", m.atoms_per_patch},
        {"epoch_time_ms", m.epoch_time_ms},
        {"epochs_run", m.epochs_run},
    };
    return j.dump();
}

std::string session_descriptor_json(const std::vector<ProblemStatus>& problems,
                                    std::uint64_t dropped_frames, std::size_t viewers) {
    json list = json::array();
    for (const auto& s : problems) {
        const auto& c = s.config;
        json shape = nullptr;
        if (s.frame_shape) shape = s.frame_shape->dims();
        list.push_back({
            {"id", s.handle},
            {"name", c.name},
            {"shape", shape},
            {"patch", c.patch.patch_shape},
            {"stride", c.patch.stride.empty() ? std::vector<std::size_t>(c.patch.patch_shape.size(), 1)
                                              : c.patch.stride},
            {"atoms", s.atoms},
            {"sampling_ratio", c.sampler.ratio},
            {"strategy", c.strategy_name()},
            {"epochs_per_frame", c.epochs_per_frame},
            {"freeze_dict", c.freeze_dict},
            {"warm_start", c.warm_start},
            {"data_consistency", c.data_consistency},
            {"reference_available", c.reference_available},
            {"paused", s.paused},
            {"frames_done", s.frames_done},
        });
    }
    json j = {{"kind", "session"},
              {"version", 1},
              {"problems", list},
              {"dropped_frames", dropped_frames},
              {"viewers", viewers}};
    return j.dump();
}

std::string ack_json(const ControlReply& reply, const std::string& problem) {
    if (!reply.ok) return error_json(reply.error, reply.cmd);
    json j = {{"kind", "ack"},
              {"cmd", reply.cmd},
              {"problem", problem},
              {"applied_at_frame", reply.applied_at_frame}};
    return j.dump();
}

std::string error_json(const std::string& message, const std::string& cmd) {
    json j = {{"kind", "error"}, {"message", message}};
    if (!cmd.empty()) j["cmd"] = cmd;
    return j.dump();
}

std::string end_json(const SessionSummary& summary) {
    json j = {{"kind", "end"},
              {"frames", summary.frames},
              {"frames_total", summary.frames_total},
              {"read_failures", summary.read_failures}};
    return j.dump();
}

ParsedControl parse_control(const std::string& text) {
    ParsedControl out;
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
        out.error = "control message is not a JSON object";
        return out;
    }
    if (j.contains("cmd") && j["cmd"].is_string()) out.cmd = j["cmd"].get<std::string>();
    if (out.cmd.empty()) {
        out.error = "control message needs a string 'cmd'";
        return out;
    }
    static const char* kKnown[] = {"set_sampling", "set_epochs", "pause",
                                   "resume",       "transfer_dict", "set_strategy"};
    if (std::find(std::begin(kKnown), std::end(kKnown), out.cmd) == std::end(kKnown)) {
        out.error = "unknown command '" + out.cmd + "'";
        return out;
    }
    if (!j.contains("problem") || !j["problem"].is_string()) {
        out.error = "control message needs a string 'problem'";
        return out;
    }
    ControlCommand cmd;
    cmd.cmd = out.cmd;
    cmd.problem = j["problem"].get<std::string>();
    if (j.contains("value")) {
        const auto& v = j["value"];
        if (v.is_number()) {
            cmd.value = v.get<double>();
        } else if (v.is_string()) {
            cmd.value = v.get<std::string>();
        } else if (!v.is_null()) {
            out.error = "'value' must be a number or a string";
            return out;
        }
    }
    out.command = std::move(cmd);
    return out;
}

}  // namespace bpinpaint::wire
