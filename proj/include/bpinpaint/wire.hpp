#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bpinpaint/bpfa.hpp"
#include "bpinpaint/metrics.hpp"
#include "bpinpaint/pipeline.hpp"

namespace bpinpaint::wire {

enum class FrameType : std::uint8_t {
    masked_input = 0,
    reconstruction = 1,
    dictionary_atlas = 2,
    ground_truth = 3,
};

inline constexpr std::uint8_t kDTypeU8 = 1;
inline constexpr std::size_t kHeaderSize = 20;

/// Greyscale raster as sent to viewers.
struct Panel {
    std::uint32_t width = 0;
    std::uint32_t height = 0;
    std::vector<std::uint8_t> pixels;  // width*height, row-major
};

struct WireFrame {
    FrameType type = FrameType::masked_input;
    std::uint16_t problem_id = 0;
    std::uint32_t frame_id = 0;
    Panel panel;
};

/// 20-byte little-endian header followed by the raw pixels:
/// type u8 | dtype u8 | problem_id u16 | width u32 | height u32 | frame_id u32 | reserved u32
std::string encode_frame(const WireFrame& frame);
/// Throws std::invalid_argument on malformed input.
WireFrame decode_frame(const std::string& bytes);

/// 2D tensors map directly; trailing dimensions beyond the first two are averaged.
Panel panel_from_tensor(const Tensor& t);

/// Atoms min-max normalized one by one (zero range renders mid-grey), ordered by
/// descending usage probability, tiled row-major in a ceil(sqrt K) square grid
/// with 1-pixel mid-grey separators. Atoms with more than two dimensions show
/// their first trailing slice.
Panel render_dictionary_atlas(const Dictionary& dict);

std::size_t atlas_grid_side(std::size_t atoms);

std::string metrics_json(const std::string& problem, const FrameMetrics& m);
std::string session_descriptor_json(const std::vector<ProblemStatus>& problems,
                                    std::uint64_t dropped_frames, std::size_t viewers);
std::string ack_json(const ControlReply& reply, const std::string& problem);
std::string error_json(const std::string& message, const std::string& cmd = {});
std::string end_json(const SessionSummary& summary);

struct ParsedControl {
    std::optional<ControlCommand> command;
    std::string error;  // set when command is empty
    std::string cmd;    // best-effort command name for error replies
};

ParsedControl parse_control(const std::string& text);

}  // namespace bpinpaint::wire
