#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "bpinpaint/bpfa.hpp"
#include "bpinpaint/config.hpp"
#include "bpinpaint/io.hpp"
#include "bpinpaint/metrics.hpp"
#include "bpinpaint/pipeline.hpp"
#include "bpinpaint/sampling.hpp"
#include "bpinpaint/stream_server.hpp"
#include "bpinpaint/synthetic.hpp"
#include "bpinpaint/tensor.hpp"

namespace bpinpaint::cli {

namespace fs = std::filesystem;

namespace {

/// Wraps errors that should map to the I/O exit code.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

PatchSpec patch_spec(const std::string& patch, const std::string& stride) {
    PatchSpec spec;
    spec.patch_shape = parse_dims(patch);
    if (!stride.empty()) spec.stride = parse_dims(stride);
    return spec;
}

InitMode init_mode(const std::string& name) {
    return name == "data" ? InitMode::data : InitMode::prior;
}

std::string join_dims(const std::vector<std::size_t>& dims, char sep) {
    std::string s;
    for (std::size_t i = 0; i < dims.size(); ++i) {
        if (i) s += sep;
        s += std::to_string(dims[i]);
    }
    return s;
}

std::vector<fs::path> list_frames(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto ext = entry.path().extension();
        if (entry.is_regular_file() && (ext == ".pgm" || ext == ".satf")) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    return files;
}

// ---------------------------------------------------------------------------
// inpaint

struct InpaintArgs {
    std::string input, out, mask_path, mask_out, sampler = "uniform-random";
    std::optional<double> mask_ratio;
    std::optional<std::uint64_t> mask_seed;
    std::string patch = "10,10", stride;
    std::size_t atoms = 64, epochs = 10, tail_average = 0;
    std::uint64_t seed = 0;
    std::string dict_in, dict_out, gt, metrics_csv, init = "prior";
    bool freeze_dict = false, no_mean_subtract = false, no_data_consistency = false;
    double peak = 1.0;
};

int cmd_inpaint(const InpaintArgs& a, std::ostream& out) {
    Tensor input = read_any(a.input);

    SampleMask mask;
    if (!a.mask_path.empty()) {
        mask = read_mask(a.mask_path);
        if (!(mask.shape == input.shape)) {
            throw ShapeError("mask shape " + mask.shape.to_string() + " does not match input " +
                             input.shape.to_string());
        }
    } else {
        SamplerSpec sampler;
        sampler.kind = sampler_kind_from_string(a.sampler);
        sampler.ratio = a.mask_ratio.value_or(1.0);
        sampler.seed = a.mask_seed.value_or(a.seed);
        mask = make_mask(sampler, input.shape);
    }
    if (!a.mask_out.empty()) {
        Tensor m(mask.shape);
        for (std::size_t j = 0; j < m.size(); ++j) m[j] = mask.observed[j];
        write_tensor(a.mask_out, m, TensorDType::uint8);
    }

    const Normalization norm = normalize_observed(input, mask);
    const PatchSpec spec = patch_spec(a.patch, a.stride);
    spec.validate(input.shape);
    const PatchMatrix pm = extract_patches(norm.tensor, mask, spec, !a.no_mean_subtract);

    Hyperparams hp;
    hp.K = a.atoms;
    std::optional<Dictionary> dict_in;
    if (!a.dict_in.empty()) {
        dict_in = transfer_dictionary(read_dict(a.dict_in), spec.patch_shape);
        hp.K = dict_in->size();
    }
    hp.validate();

    std::optional<Tensor> gt;
    if (!a.gt.empty()) {
        gt = read_any(a.gt);
        if (!(gt->shape == input.shape)) throw ShapeError("--gt shape does not match input");
    }

    GibbsState state = dict_in ? install_dictionary(pm, hp, a.seed, *dict_in)
                               : init_state(pm, hp, a.seed, init_mode(a.init));

    auto finish = [&](const std::vector<double>& estimates) {
        Reconstitution rec = reconstitute(pm, estimates);
        Tensor t = apply_data_consistency(rec.tensor, norm.tensor, mask, !a.no_data_consistency);
        return denormalize(t, norm.scale, norm.offset);
    };

    std::ofstream csv;
    if (!a.metrics_csv.empty()) {
        csv.open(a.metrics_csv);
        if (!csv) throw IoError("cannot write " + a.metrics_csv);
        csv << "epoch,psnr_db,mse,sampling_ratio,atoms_per_patch,epoch_time_ms\n";
    }
    auto log_epoch = [&](std::size_t epoch, const GibbsState& st, const Tensor& recon, double ms) {
        if (!csv.is_open()) return;
        const ModelStats stats = model_stats(st);
        csv << epoch << ',';
        if (gt) {
            csv << format_metric(psnr(recon, *gt, a.peak)) << ',' << format_metric(mse(recon, *gt));
        } else {
            csv << ",";
        }
        csv << ',' << format_metric(mask.ratio()) << ',' << format_metric(stats.atoms_per_patch) << ','
            << format_metric(ms) << '\n';
    };

    Tensor recon;
    using Clock = std::chrono::steady_clock;
    if (a.tail_average > 0 || a.epochs == 0) {
        const auto t0 = Clock::now();
        InferResult r = continue_inference(std::move(state), pm, hp, a.epochs, a.freeze_dict,
                                           a.tail_average);
        const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
        recon = finish(r.estimates);
        state = std::move(r.state);
        log_epoch(a.epochs, state, recon, a.epochs ? ms / static_cast<double>(a.epochs) : 0.0);
    } else {
        for (std::size_t e = 1; e <= a.epochs; ++e) {
            const auto t0 = Clock::now();
            InferResult r = continue_inference(std::move(state), pm, hp, 1, a.freeze_dict);
            const double ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
            state = std::move(r.state);
            if (e == a.epochs || csv.is_open()) recon = finish(r.estimates);
            log_epoch(e, state, recon, ms);
        }
    }

    write_any(a.out, recon);
    if (!a.dict_out.empty()) write_dict(a.dict_out, state.dict);
    if (gt) {
        out << "PSNR: " << format_metric(psnr(recon, *gt, a.peak)) << " dB\n";
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// bench

struct BenchArgs {
    std::string sizes = "128,256,512";
    std::vector<std::string> images;
    std::size_t atoms = 64, epochs = 2, repeats = 3;
    std::string patch = "10,10", stride = "1,1", out;
    std::uint64_t seed = 0;
    double ratio = 0.2;
};

int cmd_bench(const BenchArgs& a, std::ostream& out) {
    std::vector<std::pair<std::string, Tensor>> inputs;
    if (!a.images.empty()) {
        for (const auto& path : a.images) {
            Tensor t = read_any(path);
            inputs.emplace_back(join_dims(t.shape.dims(), 'x'), normalize(t).tensor);
        }
    } else {
        for (std::size_t n : parse_dims(a.sizes)) {
            inputs.emplace_back(std::to_string(n), synthetic_texture(n, n, a.seed));
        }
    }
    if (a.repeats == 0) throw CLI::ValidationError("--repeats", "must be at least 1");

    const PatchSpec spec = patch_spec(a.patch, a.stride);
    std::vector<std::size_t> stride = spec.stride;
    if (stride.empty()) stride.assign(spec.patch_shape.size(), 1);
    std::ostringstream csv;
    csv << "# stride=" << join_dims(stride, 'x') << " ratio=" << a.ratio << " seed=" << a.seed
        << " input=" << (a.images.empty() ? "synthetic-texture" : "user-images") << '\n';
    csv << "size,patches,atoms,patch,epochs,ratio,repeats,wall_ms,throughput_patches_per_s\n";
    Hyperparams hp;
    hp.K = a.atoms;
    hp.validate();
    for (const auto& [label, image] : inputs) {
        spec.validate(image.shape);
        SamplerSpec sampler;
        sampler.ratio = a.ratio;
        sampler.seed = a.seed;
        const SampleMask mask = make_mask(sampler, image.shape);
        const PatchMatrix pm = extract_patches(image, mask, spec, true);
        InferOptions opt;
        opt.epochs = a.epochs;
        opt.seed = a.seed;
        std::vector<double> times;
        for (std::size_t r = 0; r < a.repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const InferResult res = infer(pm, hp, opt);
            (void)res;
            times.push_back(
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
        }
        std::sort(times.begin(), times.end());
        const std::size_t m = times.size();
        const double median = m % 2 ? times[m / 2] : 0.5 * (times[m / 2 - 1] + times[m / 2]);
        const double throughput =
            median > 0 ? static_cast<double>(pm.n * a.epochs) / (median / 1000.0) : 0.0;
        csv << label << ',' << pm.n << ',' << a.atoms << ',' << join_dims(spec.patch_shape, 'x') << ','
            << a.epochs << ',' << a.ratio << ',' << a.repeats << ',' << std::fixed
            << std::setprecision(3) << median << ',' << std::setprecision(1) << throughput
            << std::defaultfloat << '\n';
    }
    if (a.out.empty()) {
        out << csv.str();
    } else {
        std::ofstream f(a.out);
        if (!(f << csv.str())) throw IoError("cannot write " + a.out);
    }
    return kOk;
}

// ---------------------------------------------------------------------------
// learn

struct LearnArgs {
    std::string corpus, out, patch = "10,10", stride, init = "prior";
    std::vector<std::string> inputs;
    std::size_t atoms = 64, epochs = 10;
    std::uint64_t seed = 0;
    double ratio = 1.0;
};

int cmd_learn(const LearnArgs& a, std::ostream& out) {
    std::vector<fs::path> files(a.inputs.begin(), a.inputs.end());
    if (!a.corpus.empty()) {
        auto listed = list_frames(a.corpus);
        files.insert(files.end(), listed.begin(), listed.end());
    }
    if (files.empty()) throw CLI::ValidationError("learn", "no training images (use --corpus or --input)");

    const PatchSpec spec = patch_spec(a.patch, a.stride);
    std::vector<PatchMatrix> parts;
    for (std::size_t i = 0; i < files.size(); ++i) {
        const Tensor image = normalize(read_any(files[i])).tensor;
        spec.validate(image.shape);
        SamplerSpec sampler;
        sampler.ratio = a.ratio;
        sampler.seed = a.seed;
        const SampleMask mask = make_mask(sampler, image.shape, i);
        parts.push_back(extract_patches(image, mask, spec, true));
    }
    const PatchMatrix pm = stack_patches(parts);

    Hyperparams hp;
    hp.K = a.atoms;
    hp.validate();
    InferOptions opt;
    opt.epochs = a.epochs;
    opt.seed = a.seed;
    opt.init = init_mode(a.init);
    InferResult r = infer(pm, hp, opt);
    write_dict(a.out, r.state.dict);
    const ModelStats stats = model_stats(r.state);
    out << "learned " << r.state.dict.size() << " atoms from " << pm.n << " patches ("
        << files.size() << " images), atoms/patch " << format_metric(stats.atoms_per_patch) << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------
// transfer

int cmd_transfer(const std::string& dict_in, const std::string& out_path, const std::string& patch) {
    const Dictionary src = read_dict(dict_in);
    write_dict(out_path, transfer_dictionary(src, parse_dims(patch)));
    return kOk;
}

// ---------------------------------------------------------------------------
// serve

struct ServeArgs {
    std::string source = "synthetic", config, bind = "127.0.0.1";
    long port = 8765;
    double fps = 0.0, wait_for_viewer = 0.0;
    bool exit_when_done = false;
    std::string patch = "10,10";
    std::size_t atoms = 32, epochs = 1;
    double ratio = 0.2;
    std::uint64_t seed = 0;
};

std::unique_ptr<FrameSource> open_source(const std::string& desc, std::uint64_t seed) {
    if (desc.rfind("dir:", 0) == 0) {
        const fs::path dir = desc.substr(4);
        if (!fs::is_directory(dir)) throw IoError("source directory not found: " + dir.string());
        return std::make_unique<DirectorySource>(dir);
    }
    if (desc.rfind("synthetic", 0) == 0) {
        std::size_t rows = 128, cols = 128, frames = 0;
        std::string rest = desc.substr(9);
        if (!rest.empty()) {
            if (rest.front() != ':') throw CLI::ValidationError("--source", "bad source '" + desc + "'");
            rest.erase(0, 1);
            const auto colon = rest.find(':');
            const std::string dims = rest.substr(0, colon);
            const auto x = dims.find('x');
            if (x == std::string::npos) throw CLI::ValidationError("--source", "expected WxH in '" + desc + "'");
            try {
                cols = std::stoul(dims.substr(0, x));
                rows = std::stoul(dims.substr(x + 1));
                if (colon != std::string::npos) frames = std::stoul(rest.substr(colon + 1));
            } catch (const std::exception&) {
                throw CLI::ValidationError("--source", "bad source '" + desc + "'");
            }
        }
        return std::make_unique<SyntheticSource>(rows, cols, frames, seed);
    }
    throw CLI::ValidationError("--source", "expected dir:PATH or synthetic[:WxH[:frames]]");
}

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream& err) {
    if (a.port < 0 || a.port > 65535) throw IoError("port out of range: " + std::to_string(a.port));

    std::vector<ProblemConfig> configs;
    if (!a.config.empty()) {
        configs = load_problem_config(a.config);
        if (configs.empty()) throw ConfigError("config defines no [problem NAME] sections");
    } else {
        ProblemConfig cfg;
        cfg.name = "live";
        cfg.patch.patch_shape = parse_dims(a.patch);
        cfg.hyper.K = a.atoms;
        cfg.epochs_per_frame = a.epochs;
        cfg.sampler.ratio = a.ratio;
        cfg.sampler.seed = a.seed;
        cfg.seed = a.seed;
        cfg.validate();
        configs.push_back(cfg);
    }

    Pipeline pipeline;
    std::vector<LiveSession::Pairing> pairings;
    for (auto& cfg : configs) {
        auto src = open_source(a.source, a.seed);
        if (a.fps > 0) src->fps_cap = a.fps;
        pairings.push_back({std::move(src), pipeline.create_problem(cfg)});
    }
    LiveSession session(pipeline, std::move(pairings));

    ServerOptions opts;
    opts.bind_address = a.bind;
    opts.port = static_cast<std::uint16_t>(a.port);
    StreamServer server(pipeline, session, opts);
    std::uint16_t port = 0;
    try {
        port = server.start();
    } catch (const std::exception& ex) {
        throw IoError(std::string("cannot listen: ") + ex.what());
    }
    out << "listening on port " << port << std::endl;

    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);

    if (a.wait_for_viewer > 0) {
        const auto timeout = std::chrono::milliseconds(static_cast<long>(a.wait_for_viewer * 1000));
        if (!server.wait_for_viewer(timeout)) err << "no viewer connected; starting anyway\n";
    }

    std::thread watcher([&] {
        while (!session.finished()) {
            if (g_interrupted) session.request_stop();
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    });
    const SessionSummary summary = session.run([&](const FrameResult& r) { server.publish(r); });
    watcher.join();
    server.publish_end(summary);
    server.wait_drained(std::chrono::seconds(5));
    out << "session finished: " << summary.frames_total << " frames, " << summary.read_failures
        << " read failures, " << summary.controls_applied << " controls applied" << std::endl;

    if (!a.exit_when_done) {
        while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    server.stop();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Patch-dictionary inpainting for subsampled images and live streams", "bpinpaint"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);
    int threads = 0;
    app.add_option("--threads", threads, "Cap on worker threads (0 = runtime default)")
        ->check(CLI::NonNegativeNumber);

    InpaintArgs ia;
    auto* inpaint = app.add_subcommand("inpaint", "Reconstruct one subsampled image or volume");
    inpaint->add_option("--input", ia.input, "Input tensor (.pgm or .satf)")->required();
    inpaint->add_option("--out", ia.out, "Reconstruction output path")->required();
    auto* ratio_opt = inpaint->add_option("--mask-ratio", ia.mask_ratio, "Fraction of elements sampled");
    inpaint->add_option("--mask", ia.mask_path, "Mask tensor; nonzero = observed")->excludes(ratio_opt);
    inpaint->add_option("--sampler", ia.sampler, "Sampling strategy for --mask-ratio");
    inpaint->add_option("--mask-seed", ia.mask_seed, "Mask seed (defaults to --seed)");
    inpaint->add_option("--mask-out", ia.mask_out, "Write the mask used");
    inpaint->add_option("--patch", ia.patch, "Patch shape, e.g. 10,10");
    inpaint->add_option("--stride", ia.stride, "Patch stride, e.g. 1,1");
    inpaint->add_option("--atoms", ia.atoms, "Dictionary size K");
    inpaint->add_option("--epochs", ia.epochs, "Gibbs sweeps");
    inpaint->add_option("--seed", ia.seed, "Random seed");
    inpaint->add_option("--init", ia.init, "Dictionary initialisation")
        ->check(CLI::IsMember({"prior", "data"}));
    inpaint->add_option("--tail-average", ia.tail_average, "Average estimates over the last T epochs");
    auto* dict_in = inpaint->add_option("--dict-in", ia.dict_in, "Start from this dictionary");
    inpaint->add_flag("--freeze-dict", ia.freeze_dict, "Keep the dictionary fixed")->needs(dict_in);
    inpaint->add_option("--dict-out", ia.dict_out, "Write the final dictionary");
    inpaint->add_option("--gt", ia.gt, "Reference for PSNR");
    inpaint->add_option("--peak", ia.peak, "PSNR peak value")->check(CLI::PositiveNumber);
    inpaint->add_flag("--no-mean-subtract", ia.no_mean_subtract);
    inpaint->add_flag("--no-data-consistency", ia.no_data_consistency);
    inpaint->add_option("--metrics-csv", ia.metrics_csv, "Per-epoch metrics");

    BenchArgs ba;
    auto* bench = app.add_subcommand("bench", "Time-to-solution benchmark over image sizes");
    bench->add_option("--sizes", ba.sizes, "Square synthetic image sides");
    bench->add_option("--image", ba.images, "Benchmark these images instead");
    bench->add_option("--atoms", ba.atoms);
    bench->add_option("--patch", ba.patch);
    bench->add_option("--stride", ba.stride);
    bench->add_option("--epochs", ba.epochs);
    bench->add_option("--repeats", ba.repeats);
    bench->add_option("--seed", ba.seed);
    bench->add_option("--ratio", ba.ratio, "Sampling ratio of the benchmark mask");
    bench->add_option("--out", ba.out, "CSV path (default stdout)");

    LearnArgs la;
    auto* learn = app.add_subcommand("learn", "Learn a dictionary from a corpus of images");
    learn->add_option("--corpus", la.corpus, "Directory of .pgm/.satf images");
    learn->add_option("--input", la.inputs, "Training image (repeatable)");
    learn->add_option("--out", la.out, "Dictionary output path")->required();
    learn->add_option("--patch", la.patch);
    learn->add_option("--stride", la.stride);
    learn->add_option("--atoms", la.atoms);
    learn->add_option("--epochs", la.epochs);
    learn->add_option("--seed", la.seed);
    learn->add_option("--ratio", la.ratio, "Sampling ratio of training images");
    learn->add_option("--init", la.init)->check(CLI::IsMember({"prior", "data"}));

    std::string tr_in, tr_out, tr_patch;
    auto* transfer = app.add_subcommand("transfer", "Adapt a dictionary to another patch shape");
    transfer->add_option("--dict-in", tr_in)->required();
    transfer->add_option("--out", tr_out)->required();
    transfer->add_option("--patch", tr_patch, "Target patch shape")->required();

    ServeArgs sa;
    auto* serve = app.add_subcommand("serve", "Run a live session and stream it to viewers");
    serve->add_option("--source", sa.source, "dir:PATH or synthetic[:WxH[:frames]]");
    serve->add_option("--port", sa.port, "TCP port (0 = ephemeral)");
    serve->add_option("--bind", sa.bind, "Bind address");
    serve->add_option("--config", sa.config, "Problem definitions");
    serve->add_option("--fps", sa.fps, "Frame rate cap per source");
    serve->add_option("--wait-for-viewer", sa.wait_for_viewer, "Seconds to wait for a viewer");
    serve->add_flag("--exit-when-done", sa.exit_when_done, "Exit once the sources are exhausted");
    serve->add_option("--patch", sa.patch, "Default problem patch shape");
    serve->add_option("--atoms", sa.atoms, "Default problem dictionary size");
    serve->add_option("--epochs", sa.epochs, "Default problem epochs per frame");
    serve->add_option("--ratio", sa.ratio, "Default problem sampling ratio");
    serve->add_option("--seed", sa.seed);

    for (auto* sub : {inpaint, bench, learn, transfer, serve}) {
        sub->add_option("--threads", threads, "Cap on worker threads (0 = runtime default)")
            ->check(CLI::NonNegativeNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? kOk : kUsage;
    }

    set_worker_count(threads);
    try {
        if (*inpaint) return cmd_inpaint(ia, out);
        if (*bench) return cmd_bench(ba, out);
        if (*learn) return cmd_learn(la, out);
        if (*transfer) return cmd_transfer(tr_in, tr_out, tr_patch);
        if (*serve) return cmd_serve(sa, out, err);
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kDivergence;
    } catch (const CLI::ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    }
    return kUsage;
}

}  // namespace bpinpaint::cli
