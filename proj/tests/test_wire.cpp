#include <doctest.h>

#include <json.hpp>
#include <map>
#include <thread>

#include "bpinpaint/io.hpp"
#include "bpinpaint/stream_server.hpp"
#include "bpinpaint/synthetic.hpp"
#include "bpinpaint/wire.hpp"
#include "helpers.hpp"
#include "ws_client.hpp"

using namespace bpinpaint;
using nlohmann::json;

namespace {

Dictionary ramp_dictionary(std::size_t k, std::size_t h, std::size_t w) {
    Dictionary d;
    d.patch_shape = {h, w};
    for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t q = 0; q < h * w; ++q) d.atoms.push_back(static_cast<double>(q) + a);
    }
    return d;
}

}  // namespace

TEST_CASE("wire frame header") {
    wire::WireFrame f;
    f.type = wire::FrameType::reconstruction;
    f.problem_id = 0x0102;
    f.frame_id = 0x0A0B0C0D;
    f.panel.width = 3;
    f.panel.height = 2;
    f.panel.pixels = {1, 2, 3, 4, 5, 6};
    const std::string bytes = wire::encode_frame(f);
    REQUIRE(bytes.size() == 26);
    const std::string header("\x01\x01\x02\x01\x03\0\0\0\x02\0\0\0\x0D\x0C\x0B\x0A\0\0\0\0", 20);
    CHECK(bytes.substr(0, 20) == header);

    const auto back = wire::decode_frame(bytes);
    CHECK(back.type == f.type);
    CHECK(back.problem_id == f.problem_id);
    CHECK(back.frame_id == f.frame_id);
    CHECK(back.panel.pixels == f.panel.pixels);

    CHECK_THROWS_AS(wire::decode_frame(bytes.substr(0, 25)), std::invalid_argument);
    CHECK_THROWS_AS(wire::decode_frame(bytes.substr(0, 10)), std::invalid_argument);
    std::string bad = bytes;
    bad[0] = 9;
    CHECK_THROWS_AS(wire::decode_frame(bad), std::invalid_argument);
    bad = bytes;
    bad[1] = 0;
    CHECK_THROWS_AS(wire::decode_frame(bad), std::invalid_argument);
    f.panel.pixels.pop_back();
    CHECK_THROWS_AS(wire::encode_frame(f), std::invalid_argument);
}

TEST_CASE("panels quantize and average trailing dimensions") {
    Tensor t(TensorShape{1, 3}, std::vector<double>{-0.5, 0.5, 1.5});
    const auto p = wire::panel_from_tensor(t);
    CHECK(p.width == 3);
    CHECK(p.height == 1);
    CHECK(p.pixels == std::vector<std::uint8_t>{0, 128, 255});

    Tensor rgb(TensorShape{1, 2, 2}, std::vector<double>{0.0, 1.0, 0.2, 0.2});
    CHECK(wire::panel_from_tensor(rgb).pixels == std::vector<std::uint8_t>{128, 51});
}

TEST_CASE("dictionary atlas layout") {
    CHECK(wire::atlas_grid_side(1) == 1);
    CHECK(wire::atlas_grid_side(5) == 3);
    CHECK(wire::atlas_grid_side(64) == 8);
    CHECK(wire::atlas_grid_side(65) == 9);

    const auto big = wire::render_dictionary_atlas(ramp_dictionary(64, 10, 10));
    CHECK(big.width == 87);
    CHECK(big.height == 87);
    CHECK(big.pixels[10] == 128);          // separator column
    CHECK(big.pixels[10 * 87 + 3] == 128);  // separator row

    const auto one = wire::render_dictionary_atlas(ramp_dictionary(1, 2, 3));
    CHECK(one.width == 3);
    CHECK(one.height == 2);
    CHECK(one.pixels == std::vector<std::uint8_t>{0, 51, 102, 153, 204, 255});

    Dictionary flat;
    flat.patch_shape = {2, 2};
    flat.atoms.assign(4, 0.5);
    CHECK(wire::render_dictionary_atlas(flat).pixels == std::vector<std::uint8_t>(4, 128));

    const auto five = wire::render_dictionary_atlas(ramp_dictionary(5, 2, 2));
    CHECK(five.width == 8);
    CHECK(five.height == 8);
    // Cells 5..8 of the 3x3 grid stay mid-grey.
    for (std::size_t cell = 5; cell < 9; ++cell) {
        const std::size_t oy = (cell / 3) * 3, ox = (cell % 3) * 3;
        for (std::size_t y = 0; y < 2; ++y) {
            for (std::size_t x = 0; x < 2; ++x) CHECK(five.pixels[(oy + y) * 8 + ox + x] == 128);
        }
    }
}

TEST_CASE("atlas orders atoms by usage and shows the first channel") {
    Dictionary d;
    d.patch_shape = {1, 2, 2};
    d.atoms = {0, 0, 1, 1, 1, 1, 0, 0};
    d.pi = {0.1, 0.9};
    const auto p = wire::render_dictionary_atlas(d);
    REQUIRE(p.width == 5);
    REQUIRE(p.height == 3);
    // Atom 1 fills the first cell; its channel-0 values are (1, 0).
    CHECK(std::vector<std::uint8_t>(p.pixels.begin(), p.pixels.begin() + 5) ==
          std::vector<std::uint8_t>{255, 0, 128, 0, 255});
}

TEST_CASE("json messages") {
    FrameMetrics m;
    m.frame_id = 7;
    m.psnr_db = kPsnrInfinite;
    m.mse = 0.0;
    m.sampling_ratio = 0.25;
    m.atoms_per_patch = 3.5;
    m.epoch_time_ms = 12.0;
    auto j = json::parse(wire::metrics_json("live", m));
    CHECK(j["kind"] == "metrics");
    CHECK(j["problem"] == "live");
    CHECK(j["frame_id"] == 7);
    CHECK(j["psnr"] == "inf");
    CHECK(j["sampling_ratio"] == 0.25);
    CHECK(j["atoms_per_patch"] == 3.5);
    CHECK(j["epoch_time_ms"] == 12.0);
    m.psnr_db = 31.5;
    CHECK(json::parse(wire::metrics_json("live", m))["psnr"] == 31.5);
    m.psnr_db.reset();
    CHECK(json::parse(wire::metrics_json("live", m))["psnr"].is_null());

    ControlReply ok{.ok = true, .cmd = "set_sampling", .applied_at_frame = 4, .error = {}};
    j = json::parse(wire::ack_json(ok, "live"));
    CHECK(j["kind"] == "ack");
    CHECK(j["cmd"] == "set_sampling");
    CHECK(j["applied_at_frame"] == 4);
    ControlReply bad{.ok = false, .cmd = "set_epochs", .error = "nope"};
    j = json::parse(wire::ack_json(bad, "live"));
    CHECK(j["kind"] == "error");
    CHECK(j["cmd"] == "set_epochs");
    CHECK(j["message"] == "nope");

    ProblemStatus s;
    s.config.name = "live";
    s.config.patch.patch_shape = {10, 10};
    s.frame_shape = TensorShape{64, 48};
    s.atoms = 32;
    j = json::parse(wire::session_descriptor_json({s}, 3, 1));
    CHECK(j["kind"] == "session");
    CHECK(j["dropped_frames"] == 3);
    REQUIRE(j["problems"].size() == 1);
    CHECK(j["problems"][0]["name"] == "live");
    CHECK(j["problems"][0]["shape"] == json::array({64, 48}));
    CHECK(j["problems"][0]["stride"] == json::array({1, 1}));
    CHECK(j["problems"][0]["atoms"] == 32);

    SessionSummary sum;
    sum.frames["live"] = 10;
    sum.frames_total = 10;
    j = json::parse(wire::end_json(sum));
    CHECK(j["kind"] == "end");
    CHECK(j["frames"]["live"] == 10);
}

TEST_CASE("control parsing") {
    auto c = wire::parse_control(R"({"cmd":"set_sampling","problem":"live","value":0.5})");
    REQUIRE(c.command);
    CHECK(c.command->cmd == "set_sampling");
    CHECK(c.command->problem == "live");
    CHECK(std::get<double>(c.command->value) == 0.5);

    c = wire::parse_control(R"({"cmd":"transfer_dict","problem":"b","value":"a"})");
    REQUIRE(c.command);
    CHECK(std::get<std::string>(c.command->value) == "a");
    c = wire::parse_control(R"({"cmd":"pause","problem":"b"})");
    REQUIRE(c.command);
    CHECK(std::holds_alternative<std::monostate>(c.command->value));

    CHECK_FALSE(wire::parse_control("not json").command);
    CHECK_FALSE(wire::parse_control("[1,2]").command);
    CHECK_FALSE(wire::parse_control(R"({"problem":"a"})").command);
    c = wire::parse_control(R"({"cmd":"reboot","problem":"a"})");
    CHECK_FALSE(c.command);
    CHECK(c.cmd == "reboot");
    CHECK_FALSE(wire::parse_control(R"({"cmd":"pause"})").command);
    CHECK_FALSE(wire::parse_control(R"({"cmd":"set_epochs","problem":"a","value":[1]})").command);
}

TEST_CASE("server session with one viewer") {
    const auto dir = testutil::scratch_dir("wire_server");
    for (int f = 0; f < 6; ++f) {
        write_image(dir / ("f" + std::to_string(f) + ".pgm"), synthetic_texture(24, 24, 2, 0.1 * f));
    }
    Pipeline pl;
    ProblemConfig cfg;
    cfg.name = "live";
    cfg.patch.patch_shape = {4, 4};
    cfg.hyper.K = 8;
    cfg.sampler.ratio = 0.2;
    cfg.reference_available = true;
    const auto h = pl.create_problem(cfg);
    std::vector<LiveSession::Pairing> pairs;
    pairs.push_back({std::make_unique<DirectorySource>(dir), h});
    pairs.back().source->fps_cap = 20.0;
    LiveSession session(pl, std::move(pairs));
    StreamServer server(pl, session, ServerOptions{.port = 0, .descriptor_every = 4});
    const auto port = server.start();

    std::thread runner([&] {
        REQUIRE(server.wait_for_viewer(std::chrono::seconds(10)));
        const auto summary = session.run([&](const FrameResult& r) { server.publish(r); });
        server.publish_end(summary);
        server.wait_drained(std::chrono::seconds(5));
    });

    auto client_ptr = std::make_unique<testutil::WsClient>("127.0.0.1", port);
    auto& client = *client_ptr;
    auto first = client.read();
    REQUIRE(first);
    CHECK_FALSE(first->binary);
    auto desc = json::parse(first->data);
    CHECK(desc["kind"] == "session");
    CHECK(desc["problems"][0]["name"] == "live");

    std::map<int, std::int64_t> last_id;
    std::vector<json> metrics, acks, errors;
    bool sent = false;
    std::uint64_t applied = 0;
    while (auto msg = client.read()) {
        if (msg->binary) {
            const auto f = wire::decode_frame(msg->data);
            const int type = static_cast<int>(f.type);
            CHECK(static_cast<std::int64_t>(f.frame_id) > (last_id.count(type) ? last_id[type] : -1));
            last_id[type] = f.frame_id;
            continue;
        }
        const auto j = json::parse(msg->data);
        if (j["kind"] == "metrics") {
            metrics.push_back(j);
            if (!sent) {
                client.send_text(R"({"cmd":"set_sampling","problem":"live","value":0.5})");
                client.send_text("{broken");
                client.send_text(R"({"cmd":"set_epochs","problem":"ghost","value":2})");
                sent = true;
            }
        } else if (j["kind"] == "ack") {
            acks.push_back(j);
            applied = j["applied_at_frame"].get<std::uint64_t>();
        } else if (j["kind"] == "error") {
            errors.push_back(j);
        } else if (j["kind"] == "end") {
            CHECK(j["frames_total"] == 6);
            break;
        }
    }
    runner.join();
    client_ptr.reset();
    CHECK(metrics.size() == 6);
    CHECK(acks.size() == 1);
    CHECK(errors.size() == 2);
    CHECK(last_id.size() == 4);
    REQUIRE(applied >= 1);
    REQUIRE(applied < metrics.size());
    for (const auto& m : metrics) {
        const auto id = m["frame_id"].get<std::uint64_t>();
        const double ratio = m["sampling_ratio"];
        CHECK(ratio == doctest::Approx(id < applied ? 0.2 : 0.5).epsilon(0.01));
    }
    server.stop();
}
