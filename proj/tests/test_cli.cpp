#include <doctest.h>

#include <fstream>
#include <sstream>

#include "bpinpaint/io.hpp"
#include "bpinpaint/sampling.hpp"
#include "bpinpaint/synthetic.hpp"
#include "cli.hpp"
#include "helpers.hpp"

using namespace bpinpaint;

namespace {

struct Run {
    int code = -1;
    std::string out, err;
};

Run invoke(std::vector<std::string> args) {
    args.insert(args.begin(), "bpinpaint");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    Run r;
    r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::vector<std::string> lines(const std::string& text) {
    std::vector<std::string> out;
    std::istringstream in(text);
    for (std::string l; std::getline(in, l);) out.push_back(l);
    return out;
}

const std::filesystem::path& workdir() {
    static const auto dir = [] {
        auto d = testutil::scratch_dir("cli");
        write_image(d / "tex.pgm", synthetic_texture(32, 32, 7));
        write_image(d / "tex2.pgm", synthetic_texture(32, 32, 8));
        return d;
    }();
    return dir;
}

std::string path(const std::string& name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
    CHECK(invoke({}).code == cli::kUsage);
    CHECK(invoke({"inpaint", "--out", path("x.pgm")}).code == cli::kUsage);
    CHECK(invoke({"frobnicate"}).code == cli::kUsage);
    CHECK(invoke({"inpaint", "--input", path("tex.pgm"), "--out", path("x.pgm"), "--mask-ratio", "0.3",
               "--mask", path("tex.pgm")})
              .code == cli::kUsage);
    CHECK(invoke({"inpaint", "--input", path("tex.pgm"), "--out", path("x.pgm"), "--freeze-dict"}).code ==
          cli::kUsage);
    CHECK(invoke({"inpaint", "--input", path("tex.pgm"), "--out", path("x.pgm"), "--mask-ratio", "1.5"}).code ==
          cli::kUsage);
    CHECK(invoke({"inpaint", "--input", path("tex.pgm"), "--out", path("x.pgm"), "--patch", "0,3"}).code ==
          cli::kUsage);
    CHECK(invoke({"--help"}).code == cli::kOk);
}

TEST_CASE("io and config errors exit with 3") {
    const Run missing = invoke({"inpaint", "--input", path("nope.pgm"), "--out", path("x.pgm")});
    CHECK(missing.code == cli::kIo);
    CHECK(missing.err.find("nope.pgm") != std::string::npos);
    CHECK(invoke({"serve", "--port", "70000", "--source", "synthetic"}).code == cli::kIo);
    std::ofstream(workdir() / "bad.ini") << "[problem a]\nwhat = 1\n";
    CHECK(invoke({"serve", "--port", "0", "--config", path("bad.ini"), "--exit-when-done"}).code == cli::kIo);
    CHECK(invoke({"serve", "--port", "0", "--source", "dir:" + path("no_such_dir"), "--exit-when-done"}).code ==
          cli::kIo);
}

TEST_CASE("inpaint outputs are reproducible") {
    const std::vector<std::string> base = {"inpaint", "--input", path("tex.pgm"), "--mask-ratio", "0.4",
                                           "--patch", "4,4", "--atoms", "8", "--epochs", "3",
                                           "--seed", "5", "--gt", path("tex.pgm")};
    auto with = [&](std::vector<std::string> extra) {
        auto args = base;
        args.insert(args.end(), extra.begin(), extra.end());
        return invoke(args);
    };
    const Run a = with({"--out", path("a.satf"), "--mask-out", path("mask.satf"), "--dict-out",
                        path("a.sadf"), "--metrics-csv", path("a.csv")});
    REQUIRE(a.code == cli::kOk);
    CHECK(a.out.rfind("PSNR: ", 0) == 0);
    const Run b = with({"--out", path("b.satf"), "--threads", "1"});
    REQUIRE(b.code == cli::kOk);
    CHECK(slurp(workdir() / "a.satf") == slurp(workdir() / "b.satf"));
    CHECK(a.out == b.out);

    const SampleMask mask = read_mask(workdir() / "mask.satf");
    CHECK(mask.count() == sample_budget(0.4, 32 * 32));
    CHECK(read_dict(workdir() / "a.sadf").size() == 8);

    const auto rows = lines(slurp(workdir() / "a.csv"));
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "epoch,psnr_db,mse,sampling_ratio,atoms_per_patch,epoch_time_ms");
    CHECK(rows[3].rfind("3,", 0) == 0);

    // Same mask supplied explicitly gives the same file.
    const Run c = invoke({"inpaint", "--input", path("tex.pgm"), "--mask", path("mask.satf"), "--patch", "4,4",
                       "--atoms", "8", "--epochs", "3", "--seed", "5", "--out", path("c.satf")});
    REQUIRE(c.code == cli::kOk);
    CHECK(slurp(workdir() / "a.satf") == slurp(workdir() / "c.satf"));

    CHECK(invoke({"inpaint", "--input", path("tex.pgm"), "--mask-ratio", "0.4", "--patch", "4,4", "--atoms",
                  "4", "--epochs", "1", "--out", path("d.pgm")})
              .code == cli::kOk);
    CHECK(read_image(workdir() / "d.pgm").shape == TensorShape{32, 32});
}

TEST_CASE("learn, transfer and frozen inpainting") {
    const Run learned = invoke({"learn", "--input", path("tex.pgm"), "--input", path("tex2.pgm"), "--out",
                             path("learned.sadf"), "--patch", "4,4", "--atoms", "8", "--epochs", "4"});
    REQUIRE(learned.code == cli::kOk);
    CHECK(learned.out.rfind("learned 8 atoms", 0) == 0);
    const Dictionary dict = read_dict(workdir() / "learned.sadf");
    CHECK(dict.patch_shape == std::vector<std::size_t>{4, 4});

    REQUIRE(invoke({"transfer", "--dict-in", path("learned.sadf"), "--out", path("same.sadf"), "--patch", "4,4"})
                .code == cli::kOk);
    CHECK(slurp(workdir() / "learned.sadf") == slurp(workdir() / "same.sadf"));
    REQUIRE(invoke({"transfer", "--dict-in", path("learned.sadf"), "--out", path("rgb.sadf"), "--patch",
                 "4,4,3"})
                .code == cli::kOk);
    CHECK(read_dict(workdir() / "rgb.sadf").patch_shape == std::vector<std::size_t>{4, 4, 3});
    CHECK(invoke({"transfer", "--dict-in", path("learned.sadf"), "--out", path("x.sadf"), "--patch", "5,5"})
              .code == cli::kUsage);

    const Run frozen = invoke({"inpaint", "--input", path("tex.pgm"), "--mask-ratio", "0.5", "--patch", "4,4",
                            "--dict-in", path("learned.sadf"), "--freeze-dict", "--epochs", "3", "--out",
                            path("frozen.pgm"), "--dict-out", path("after.sadf")});
    REQUIRE(frozen.code == cli::kOk);
    CHECK(read_dict(workdir() / "after.sadf").atoms == dict.atoms);
}

TEST_CASE("bench csv") {
    const Run r = invoke({"bench", "--sizes", "16,24", "--atoms", "4", "--patch", "4,4", "--epochs", "1",
                       "--repeats", "3"});
    REQUIRE(r.code == cli::kOk);
    const auto rows = lines(r.out);
    REQUIRE(rows.size() == 4);
    CHECK(rows[0] == "# stride=1x1 ratio=0.2 seed=0 input=synthetic-texture");
    CHECK(rows[1] == "size,patches,atoms,patch,epochs,ratio,repeats,wall_ms,throughput_patches_per_s");
    CHECK(rows[2].rfind("16,169,4,4x4,1,0.2,3,", 0) == 0);
    CHECK(rows[3].rfind("24,441,4,4x4,1,0.2,3,", 0) == 0);
    const double first = std::stod(rows[2].substr(rows[2].rfind(',', rows[2].rfind(',') - 1) + 1));
    CHECK(first > 0.0);
    CHECK(invoke({"bench", "--sizes", "16", "--repeats", "0", "--patch", "4,4"}).code == cli::kUsage);

    REQUIRE(invoke({"bench", "--image", path("tex.pgm"), "--atoms", "4", "--patch", "4,4", "--epochs", "1",
                 "--repeats", "1", "--out", path("bench.csv")})
                .code == cli::kOk);
    const auto file_rows = lines(slurp(workdir() / "bench.csv"));
    REQUIRE(file_rows.size() == 3);
    CHECK(file_rows[0] == "# stride=1x1 ratio=0.2 seed=0 input=user-images");
    CHECK(file_rows[2].rfind("32x32,841,", 0) == 0);
}

TEST_CASE("serve runs a finite session") {
    const Run r = invoke({"serve", "--port", "0", "--source", "synthetic:16x16:3", "--patch", "4,4", "--atoms",
                       "4", "--exit-when-done"});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.find("listening on port ") != std::string::npos);
    CHECK(r.out.find("session finished: 3 frames") != std::string::npos);
}
