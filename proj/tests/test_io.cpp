#include <doctest.h>

#include <cstring>
#include <random>

#include "bpinpaint/io.hpp"
#include "helpers.hpp"

using namespace bpinpaint;

namespace {

// Values exactly representable in float32.
Tensor random_f32_tensor(std::mt19937& gen) {
    std::vector<std::size_t> dims(1 + gen() % 4);
    for (auto& d : dims) d = 1 + gen() % 5;
    Tensor t{TensorShape(dims)};
    std::normal_distribution<float> normal(0.0f, 10.0f);
    for (auto& v : t.data) v = static_cast<double>(normal(gen));
    return t;
}

Dictionary random_dict(std::mt19937& gen, bool with_pi) {
    Dictionary d;
    d.patch_shape.resize(1 + gen() % 3);
    for (auto& s : d.patch_shape) s = 1 + gen() % 4;
    const std::size_t k = 1 + gen() % 6;
    std::size_t p = 1;
    for (auto s : d.patch_shape) p *= s;
    std::normal_distribution<float> normal;
    for (std::size_t j = 0; j < k * p; ++j) d.atoms.push_back(normal(gen));
    std::uniform_real_distribution<float> unit(0.0f, 1.0f);
    if (with_pi) {
        for (std::size_t j = 0; j < k; ++j) d.pi.push_back(unit(gen));
    }
    return d;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("tensor codec roundtrip") {
    std::mt19937 gen(1);
    for (int i = 0; i < 200; ++i) {
        const Tensor t = random_f32_tensor(gen);
        const Tensor back = decode_tensor(encode_tensor(t));
        REQUIRE(back.shape == t.shape);
        REQUIRE(back.data == t.data);
    }
}

TEST_CASE("uint8 tensors quantize like images") {
    Tensor t(TensorShape{4}, std::vector<double>{0.0, 0.5, 1.0, 2.0});
    const auto bytes = encode_tensor(t, TensorDType::uint8);
    CHECK(bytes.size() == 4 + 4 + 4 + 4 + 4 + 4);
    const Tensor back = decode_tensor(bytes);
    CHECK(back.data == std::vector<double>{0.0, 128.0 / 255.0, 1.0, 1.0});
}

TEST_CASE("tensor header layout") {
    Tensor t(TensorShape{2, 3}, 1.0);
    const auto b = encode_tensor(t);
    REQUIRE(b.size() == 4 + 4 + 4 + 8 + 4 + 24);
    CHECK(std::memcmp(b.data(), "SATF", 4) == 0);
    CHECK(b[4] == 1);
    CHECK(b[8] == 2);
    CHECK(b[12] == 2);
    CHECK(b[16] == 3);
    CHECK(b[20] == 0);
}

TEST_CASE("dictionary codec roundtrip") {
    std::mt19937 gen(2);
    for (int i = 0; i < 200; ++i) {
        const Dictionary d = random_dict(gen, i % 2 == 0);
        const Dictionary back = decode_dictionary(encode_dictionary(d));
        REQUIRE(back.patch_shape == d.patch_shape);
        REQUIRE(back.atoms == d.atoms);
        REQUIRE(back.pi == d.pi);
    }
}

TEST_CASE("pgm decode of a 2x2 image") {
    auto bytes = bytes_of("P5\n2 2\n255\n");
    bytes.insert(bytes.end(), {0, 128, 255, 64});
    const Tensor t = decode_pgm(bytes);
    CHECK(t.shape == TensorShape{2, 2});
    CHECK(t.data == std::vector<double>{0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0});
    CHECK(encode_pgm(t) == bytes);
}

TEST_CASE("pgm header must be canonical") {
    auto with_pixels = [](const std::string& header, std::size_t n) {
        auto b = bytes_of(header);
        b.insert(b.end(), n, 7);
        return b;
    };
    CHECK(decode_pgm(with_pixels("P5\n3 1\n255\n", 3)).shape == TensorShape{1, 3});
    CHECK_THROWS_AS(decode_pgm(with_pixels("P5 # comment\n3 1\n255\n", 3)), FormatError);
    CHECK_THROWS_AS(decode_pgm(with_pixels("P5\n3\t1\n255\n", 3)), FormatError);
    CHECK_THROWS_AS(decode_pgm(with_pixels("P5\n03 1\n255\n", 3)), FormatError);
    CHECK_THROWS_AS(decode_pgm(with_pixels("P5\n0 1\n255\n", 0)), FormatError);
    CHECK_THROWS_AS(decode_pgm(bytes_of("P2\n1 1\n255\n0\n")), FormatError);
    CHECK_THROWS_AS(decode_pgm(with_pixels("P5\n1 1\n65535\n", 2)), FormatError);
    CHECK_THROWS_AS(encode_pgm(Tensor(TensorShape{2, 2, 2})), FormatError);
}

TEST_CASE("pgm roundtrip on random images") {
    std::mt19937 gen(3);
    for (int i = 0; i < 100; ++i) {
        const std::size_t h = 1 + gen() % 20, w = 1 + gen() % 20;
        auto bytes = bytes_of("P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n");
        for (std::size_t j = 0; j < h * w; ++j) bytes.push_back(static_cast<std::uint8_t>(gen()));
        REQUIRE(encode_pgm(decode_pgm(bytes)) == bytes);
    }
}

TEST_CASE("truncation and bad magic are rejected") {
    std::mt19937 gen(4);
    const auto t = encode_tensor(random_f32_tensor(gen));
    const auto d = encode_dictionary(random_dict(gen, true));
    const auto p = encode_pgm(testutil::random_tensor(TensorShape{3, 4}, 1));
    for (const auto* bytes : {&t, &d, &p}) {
        auto cut = *bytes;
        cut.pop_back();
        auto extra = *bytes;
        extra.push_back(0);
        auto magic = *bytes;
        magic[0] ^= 0x20;
        auto decode = [&](const std::vector<std::uint8_t>& b) {
            if (bytes == &t) return decode_tensor(b).size();
            if (bytes == &d) return decode_dictionary(b).atoms.size();
            return decode_pgm(b).size();
        };
        CHECK_THROWS_AS(decode(cut), FormatError);
        CHECK_THROWS_AS(decode(extra), FormatError);
        CHECK_THROWS_AS(decode(magic), FormatError);
        CHECK_NOTHROW(decode(*bytes));
    }
    CHECK_THROWS_AS(decode_tensor({}), FormatError);
    CHECK_THROWS_AS(decode_dictionary({'S', 'A'}), FormatError);
}

namespace {

template <class Decode>
std::size_t accepted_corruptions(const std::vector<std::uint8_t>& bytes, std::size_t header,
                                 Decode decode) {
    std::size_t accepted = 0;
    for (std::size_t pos = 0; pos < header; ++pos) {
        for (int v = 0; v < 256; ++v) {
            if (v == bytes[pos]) continue;
            auto bad = bytes;
            bad[pos] = static_cast<std::uint8_t>(v);
            try {
                decode(bad);
                ++accepted;
            } catch (const FormatError&) {
            }
        }
    }
    return accepted;
}

}  // namespace

TEST_CASE("header corruptions are rejected") {
    std::mt19937 gen(5);
    for (int i = 0; i < 20; ++i) {
        const Tensor t = random_f32_tensor(gen);
        const std::size_t header = 4 + 4 + 4 + 4 * t.shape.rank() + 4;
        CHECK(accepted_corruptions(encode_tensor(t), header, decode_tensor) == 0);

        // Patch dims of at least 2; unit dims are covered by the next case.
        Dictionary dict;
        dict.patch_shape.resize(1 + gen() % 3);
        std::size_t p = 1;
        for (auto& s : dict.patch_shape) p *= (s = 2 + gen() % 3);
        const std::size_t k = 1 + gen() % 4;
        dict.atoms.assign(k * p, 0.25);
        if (i % 2 == 0) dict.pi.assign(k, 0.5);
        const std::size_t dheader = 4 + 4 + 4 + 4 + 4 * dict.patch_shape.size() + 4;
        CHECK(accepted_corruptions(encode_dictionary(dict), dheader, decode_dictionary) == 0);

        const std::size_t h = 1 + gen() % 30, w = 1 + gen() % 30;
        const std::string ph = "P5\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
        auto pgm = bytes_of(ph);
        pgm.resize(ph.size() + h * w, 9);
        CHECK(accepted_corruptions(pgm, ph.size(), decode_pgm) == 0);
    }
}

TEST_CASE("unit patch dimensions make some dictionary headers ambiguous") {
    // One atom of shape (3,1) without usage probabilities: lowering ndims from 2
    // to 1 yields a well-formed file for one atom of shape (3) with pi present.
    Dictionary d;
    d.patch_shape = {3, 1};
    d.atoms = {0.5, 0.25, 0.75};
    auto bytes = encode_dictionary(d);
    bytes[12] = 1;
    const Dictionary other = decode_dictionary(bytes);
    CHECK(other.patch_shape == std::vector<std::size_t>{3});
    CHECK(other.pi.size() == 1);
    CHECK(encode_dictionary(other) == bytes);
}

TEST_CASE("files on disk") {
    const auto dir = testutil::scratch_dir("io");
    const Tensor img = decode_pgm([] {
        auto b = bytes_of("P5\n3 2\n255\n");
        b.insert(b.end(), {0, 50, 100, 150, 200, 250});
        return b;
    }());
    write_any(dir / "a.pgm", img);
    CHECK(read_any(dir / "a.pgm").data == img.data);
    write_any(dir / "a.satf", img);
    CHECK(read_any(dir / "a.satf").data == read_tensor(dir / "a.satf").data);

    Tensor mask(TensorShape{2, 3}, std::vector<double>{0, 1, 0, 2, 0, 0.5});
    write_tensor(dir / "m.satf", mask);
    const auto m = read_mask(dir / "m.satf");
    CHECK(m.observed == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1});

    CHECK_THROWS_AS(read_any(dir / "missing.satf"), FormatError);
    CHECK_THROWS_AS(write_any(dir / "no" / "such" / "dir.satf", img), FormatError);
    CHECK(to_u8(-1) == 0);
    CHECK(to_u8(0.5) == 128);
    CHECK(to_u8(7) == 255);
}
