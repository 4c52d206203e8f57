#include "bpinpaint/io.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>

namespace bpinpaint {

namespace {

static_assert(std::endian::native == std::endian::little,
              "file formats assume a little-endian host");

class ByteWriter {
public:
    void magic(const char* m) { bytes_.insert(bytes_.end(), m, m + 4); }
    void u32(std::uint32_t v) {
        for (int s = 0; s < 32; s += 8) bytes_.push_back(static_cast<std::uint8_t>(v >> s));
    }
    void f32(double v) { u32(std::bit_cast<std::uint32_t>(static_cast<float>(v))); }
    void u8(std::uint8_t v) { bytes_.push_back(v); }
    std::vector<std::uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
};

class ByteReader {
public:
    ByteReader(const std::vector<std::uint8_t>& bytes, const char* what)
        : bytes_(bytes), what_(what) {}

    void expect_magic(const char* m) {
        need(4);
        if (std::memcmp(bytes_.data(), m, 4) != 0) {
            throw FormatError(std::string(what_) + ": bad magic, expected '" + m + "'");
        }
        pos_ = 4;
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int s = 0; s < 4; ++s) v |= static_cast<std::uint32_t>(bytes_[pos_ + s]) << (8 * s);
        pos_ += 4;
        return v;
    }
    double f32() { return static_cast<double>(std::bit_cast<float>(u32())); }
    std::uint8_t u8() {
        need(1);
        return bytes_[pos_++];
    }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError(std::string(what_) + ": truncated file");
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw FormatError(std::string(what_) + ": " + msg);
    }

private:
    const std::vector<std::uint8_t>& bytes_;
    const char* what_;
    std::size_t pos_ = 0;
};

void check_version(ByteReader& r) {
    const auto version = r.u32();
    if (version != kFormatVersion) r.fail("unsupported version " + std::to_string(version));
}

std::vector<std::size_t> read_dims(ByteReader& r) {
    const auto ndims = r.u32();
    if (ndims < 1 || ndims > kMaxRank) r.fail("rank " + std::to_string(ndims) + " outside [1, 4]");
    std::vector<std::size_t> dims;
    for (std::uint32_t i = 0; i < ndims; ++i) {
        const auto d = r.u32();
        if (d == 0) r.fail("zero-length dimension");
        dims.push_back(d);
    }
    return dims;
}

// Element count, or 0 when the product cannot fit in the remaining payload.
std::size_t checked_count(const std::vector<std::size_t>& dims, std::size_t limit) {
    unsigned __int128 n = 1;
    for (auto d : dims) {
        n *= d;
        if (n > limit) return 0;
    }
    return static_cast<std::size_t>(n);
}

void write_dims(ByteWriter& w, const std::vector<std::size_t>& dims) {
    w.u32(static_cast<std::uint32_t>(dims.size()));
    for (auto d : dims) w.u32(static_cast<std::uint32_t>(d));
}

bool has_extension(const std::filesystem::path& path, const char* ext) {
    auto e = path.extension().string();
    std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
    return e == ext;
}

}  // namespace

std::uint8_t to_u8(double v) {
    if (!(v > 0.0)) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

std::vector<std::uint8_t> encode_tensor(const Tensor& t, TensorDType dtype) {
    ByteWriter w;
    w.magic("SATF");
    w.u32(kFormatVersion);
    write_dims(w, t.shape.dims());
    w.u32(static_cast<std::uint32_t>(dtype));
    for (double v : t.data) {
        if (dtype == TensorDType::float32) {
            w.f32(v);
        } else {
            w.u8(to_u8(v));
        }
    }
    return w.take();
}

Tensor decode_tensor(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "tensor file");
    r.expect_magic("SATF");
    check_version(r);
    const auto dims = read_dims(r);
    const auto dtype = r.u32();
    if (dtype > 1) r.fail("unknown dtype " + std::to_string(dtype));
    const std::size_t width = dtype == 0 ? 4 : 1;
    const std::size_t count = checked_count(dims, r.remaining() / width);
    if (count == 0 || count * width != r.remaining()) {
        r.fail("payload size does not match the declared shape");
    }
    Tensor t{TensorShape(dims)};
    for (auto& v : t.data) v = dtype == 0 ? r.f32() : static_cast<double>(r.u8()) / 255.0;
    return t;
}

std::vector<std::uint8_t> encode_dictionary(const Dictionary& d) {
    ByteWriter w;
    w.magic("SADF");
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(d.size()));
    write_dims(w, d.patch_shape);
    const bool with_pi = !d.pi.empty();
    w.u32(with_pi ? 1u : 0u);
    for (double v : d.atoms) w.f32(v);
    if (with_pi) {
        for (double v : d.pi) w.f32(v);
    }
    return w.take();
}

Dictionary decode_dictionary(const std::vector<std::uint8_t>& bytes) {
    ByteReader r(bytes, "dictionary file");
    r.expect_magic("SADF");
    check_version(r);
    const auto k = r.u32();
    if (k == 0) r.fail("dictionary has no atoms");
    Dictionary d;
    d.patch_shape = read_dims(r);
    const auto flags = r.u32();
    if (flags > 1) r.fail("unknown flag bits");
    const bool with_pi = flags & 1u;
    const std::size_t p = checked_count(d.patch_shape, r.remaining() / 4);
    const unsigned __int128 expected =
        (static_cast<unsigned __int128>(k) * p + (with_pi ? k : 0)) * 4;
    if (p == 0 || expected != r.remaining()) {
        r.fail("payload size does not match the declared atom count and shape");
    }
    d.atoms.resize(static_cast<std::size_t>(k) * p);
    for (auto& v : d.atoms) {
        v = r.f32();
        if (!std::isfinite(v)) r.fail("non-finite atom value");
    }
    if (with_pi) {
        d.pi.resize(k);
        for (auto& v : d.pi) {
            v = r.f32();
            if (!(v >= 0.0 && v <= 1.0)) r.fail("usage probability outside [0, 1]");
        }
    }
    return d;
}

std::vector<std::uint8_t> encode_pgm(const Tensor& t) {
    if (t.shape.rank() != 2) throw FormatError("PGM images must be 2D, got " + t.shape.to_string());
    const std::string header =
        "P5\n" + std::to_string(t.shape[1]) + " " + std::to_string(t.shape[0]) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + t.size());
    for (double v : t.data) out.push_back(to_u8(v));
    return out;
}

Tensor decode_pgm(const std::vector<std::uint8_t>& bytes) {
    // Only the canonical header "P5\n<width> <height>\n255\n" is accepted.
    std::size_t pos = 0;
    auto expect = [&](char c, const char* what) {
        if (pos >= bytes.size() || bytes[pos] != static_cast<std::uint8_t>(c)) {
            throw FormatError(std::string("PGM: malformed header (expected ") + what + ")");
        }
        ++pos;
    };
    auto read_int = [&](const char* what) {
        std::size_t v = 0;
        std::size_t digits = 0;
        const std::size_t first = pos;
        while (pos < bytes.size() && std::isdigit(bytes[pos]) && digits < 9) {
            v = v * 10 + (bytes[pos] - '0');
            ++pos;
            ++digits;
        }
        if (digits == 0 || (digits > 1 && bytes[first] == '0')) {
            throw FormatError(std::string("PGM: malformed ") + what);
        }
        return v;
    };
    if (bytes.size() < 2 || bytes[0] != 'P') throw FormatError("PGM: not a PNM file");
    if (bytes[1] != '5') {
        throw FormatError(std::string("PGM: unsupported format P") + static_cast<char>(bytes[1]) +
                          " (only binary P5 is supported)");
    }
    pos = 2;
    expect('\n', "newline after P5");
    const auto width = read_int("width");
    expect(' ', "space after width");
    const auto height = read_int("height");
    expect('\n', "newline after height");
    const auto maxval = read_int("maxval");
    if (width == 0 || height == 0) throw FormatError("PGM: zero-sized image");
    if (maxval != 255) throw FormatError("PGM: maxval must be 255, got " + std::to_string(maxval));
    expect('\n', "newline after maxval");
    if (bytes.size() - pos != width * height) {
        throw FormatError("PGM: expected " + std::to_string(width * height) +
                          " pixel bytes, found " + std::to_string(bytes.size() - pos));
    }
    Tensor t{TensorShape{height, width}};
    for (std::size_t e = 0; e < t.size(); ++e) t.data[e] = static_cast<double>(bytes[pos + e]) / 255.0;
    return t;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path.string() + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write to '" + path.string() + "' failed");
}

Tensor read_image(const std::filesystem::path& path) { return decode_pgm(read_file(path)); }
void write_image(const std::filesystem::path& path, const Tensor& t) { write_file(path, encode_pgm(t)); }
Tensor read_tensor(const std::filesystem::path& path) { return decode_tensor(read_file(path)); }
void write_tensor(const std::filesystem::path& path, const Tensor& t, TensorDType dtype) {
    write_file(path, encode_tensor(t, dtype));
}
Dictionary read_dict(const std::filesystem::path& path) { return decode_dictionary(read_file(path)); }
void write_dict(const std::filesystem::path& path, const Dictionary& d) {
    write_file(path, encode_dictionary(d));
}

Tensor read_any(const std::filesystem::path& path) {
    return has_extension(path, ".pgm") ? read_image(path) : read_tensor(path);
}

void write_any(const std::filesystem::path& path, const Tensor& t) {
    if (has_extension(path, ".pgm")) {
        write_image(path, t);
    } else {
        write_tensor(path, t);
    }
}

SampleMask read_mask(const std::filesystem::path& path) {
    const Tensor t = read_any(path);
    SampleMask m(t.shape);
    for (std::size_t e = 0; e < t.size(); ++e) m.observed[e] = t.data[e] != 0.0 ? 1 : 0;
    return m;
}

}  // namespace bpinpaint
