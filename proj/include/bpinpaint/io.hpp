#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bpinpaint/bpfa.hpp"
#include "bpinpaint/tensor.hpp"

namespace bpinpaint {

/// Any failure to read, parse or write a file.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Binary layouts (all integers u32 little-endian, payload row-major):
//   SATF: "SATF" version=1 ndims dims[ndims] dtype(0 float32, 1 uint8) payload
//   SADF: "SADF" version=1 K ndims dims[ndims] flags(bit 0: pi present)
//         atoms K*P float32 [pi K float32]
inline constexpr std::uint32_t kFormatVersion = 1;

enum class TensorDType : std::uint32_t { float32 = 0, uint8 = 1 };

std::vector<std::uint8_t> encode_tensor(const Tensor& t, TensorDType dtype = TensorDType::float32);
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> encode_dictionary(const Dictionary& d);
Dictionary decode_dictionary(const std::vector<std::uint8_t>& bytes);

/// Binary greyscale PGM (P5, maxval 255) with the canonical header
/// "P5\n<width> <height>\n255\n"; comments and other whitespace are rejected.
/// Values are mapped to [0,1] by /255
/// and written back with round(255 * clamp(v, 0, 1)).
std::vector<std::uint8_t> encode_pgm(const Tensor& t);
Tensor decode_pgm(const std::vector<std::uint8_t>& bytes);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

Tensor read_image(const std::filesystem::path& path);
void write_image(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);
void write_tensor(const std::filesystem::path& path, const Tensor& t,
                  TensorDType dtype = TensorDType::float32);
Dictionary read_dict(const std::filesystem::path& path);
void write_dict(const std::filesystem::path& path, const Dictionary& d);

/// Dispatches on extension: ".pgm" is an image, anything else a SATF tensor.
Tensor read_any(const std::filesystem::path& path);
void write_any(const std::filesystem::path& path, const Tensor& t);

/// Tensor file holding a mask: nonzero elements are observed.
SampleMask read_mask(const std::filesystem::path& path);

/// Quantization used for display: round(255 * clamp(v, 0, 1)).
std::uint8_t to_u8(double v);

}  // namespace bpinpaint
