#include "bpinpaint/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <stdexcept>

#include "bpinpaint/io.hpp"
#include "bpinpaint/synthetic.hpp"

namespace bpinpaint {

using Clock = std::chrono::steady_clock;

void ProblemConfig::validate() const {
    if (name.empty()) throw std::invalid_argument("problem name must not be empty");
    if (epochs_per_frame < 1) throw std::invalid_argument("epochs_per_frame must be >= 1");
    if (patch.patch_shape.empty()) throw std::invalid_argument("problem needs a patch shape");
    hyper.validate();
    sampler.validate();
    if (!StrategyRegistry::global().contains(strategy_name())) {
        throw std::invalid_argument("unknown sampling strategy '" + strategy_name() + "'");
    }
}

std::string ProblemConfig::strategy_name() const {
    return strategy.empty() ? to_string(sampler.kind) : strategy;
}

struct Pipeline::Problem {
    ProblemHandle handle = 0;
    mutable std::mutex mu;
    ProblemConfig config;
    std::optional<TensorShape> shape;
    std::optional<GibbsState> state;
    std::optional<Dictionary> installed;
    SampleMask last_mask;
    Tensor last_recon;
    Tensor residual;
    std::uint64_t frames_done = 0;
    bool paused = false;
    std::optional<FrameMetrics> metrics;
};

Pipeline::Pipeline() = default;
Pipeline::~Pipeline() = default;

Pipeline::Problem& Pipeline::get(ProblemHandle h) const {
    std::lock_guard lock(registry_mutex_);
    if (h >= problems_.size()) throw std::out_of_range("unknown problem handle " + std::to_string(h));
    return *problems_[h];
}

ProblemHandle Pipeline::create_problem(ProblemConfig cfg) {
    cfg.validate();
    std::lock_guard lock(registry_mutex_);
    for (const auto& p : problems_) {
        if (p->config.name == cfg.name) {
            throw std::invalid_argument("a problem named '" + cfg.name + "' already exists");
        }
    }
    auto p = std::make_unique<Problem>();
    p->handle = problems_.size();
    p->config = std::move(cfg);
    problems_.push_back(std::move(p));
    return problems_.back()->handle;
}

std::optional<ProblemHandle> Pipeline::find(const std::string& name) const {
    std::lock_guard lock(registry_mutex_);
    for (const auto& p : problems_) {
        if (p->config.name == name) return p->handle;
    }
    return std::nullopt;
}

ProblemStatus Pipeline::status(ProblemHandle h) const {
    const Problem& p = get(h);
    std::lock_guard lock(p.mu);
    ProblemStatus s;
    s.handle = h;
    s.config = p.config;
    s.frame_shape = p.shape;
    s.frames_done = p.frames_done;
    s.paused = p.paused;
    s.last_metrics = p.metrics;
    if (p.state) {
        s.atoms = p.state->dict.size();
    } else if (p.installed) {
        s.atoms = p.installed->size();
    } else {
        s.atoms = p.config.hyper.K;
    }
    return s;
}

std::vector<ProblemStatus> Pipeline::status() const {
    std::size_t count = 0;
    {
        std::lock_guard lock(registry_mutex_);
        count = problems_.size();
    }
    std::vector<ProblemStatus> out;
    for (std::size_t h = 0; h < count; ++h) out.push_back(status(h));
    return out;
}

std::optional<FrameMetrics> Pipeline::last_metrics(ProblemHandle h) const {
    const Problem& p = get(h);
    std::lock_guard lock(p.mu);
    return p.metrics;
}

std::optional<GibbsState> Pipeline::state(ProblemHandle h) const {
    const Problem& p = get(h);
    std::lock_guard lock(p.mu);
    return p.state;
}

std::optional<Dictionary> Pipeline::dictionary(ProblemHandle h) const {
    const Problem& p = get(h);
    std::lock_guard lock(p.mu);
    if (p.state) return p.state->dict;
    return p.installed;
}

namespace {

void reset_codes(GibbsState& st, std::size_t n) {
    st.code.n = n;
    st.code.k = st.dict.size();
    st.code.z.assign(n * st.code.k, 0);
    st.code.s.assign(n * st.code.k, 0.0);
}

Tensor squared_difference(const Tensor& a, const Tensor& b) {
    Tensor out(a.shape);
    for (std::size_t e = 0; e < a.size(); ++e) {
        const double d = a.data[e] - b.data[e];
        out.data[e] = d * d;
    }
    return out;
}

}  // namespace

FrameResult Pipeline::submit_frame(ProblemHandle h, const Tensor& frame_in,
                                   const Tensor* ground_truth) {
    Problem& p = get(h);
    std::lock_guard lock(p.mu);
    const ProblemConfig cfg = p.config;
    if (p.shape && !(*p.shape == frame_in.shape)) {
        throw ShapeError("frame shape " + frame_in.shape.to_string() + " differs from the session shape " +
                         p.shape->to_string());
    }
    cfg.patch.validate(frame_in.shape);
    if (ground_truth && !(ground_truth->shape == frame_in.shape)) {
        throw ShapeError("ground truth shape does not match the frame");
    }

    const Normalization norm = normalize(frame_in);
    const Tensor& frame = norm.tensor;
    const std::uint64_t frame_id = p.frames_done;

    const std::uint64_t mask_frame =
        cfg.refresh_mask || cfg.sampler.kind == SamplerKind::adaptive_residual ? frame_id : 0;
    const Strategy& strategy = StrategyRegistry::global().get(cfg.strategy_name());
    SampleMask mask = strategy(p.last_mask, p.residual, cfg.sampler, frame.shape, mask_frame);

    FrameResult result;
    result.problem = h;
    result.problem_name = cfg.name;
    result.frame_id = frame_id;
    result.masked_input = masked(frame, mask);

    const PatchMatrix pm = extract_patches(frame, mask, cfg.patch, cfg.mean_subtract);
    GibbsState st;
    if (cfg.warm_start && p.state) {
        st = std::move(*p.state);
        reset_codes(st, pm.n);
    } else if (p.installed) {
        st = install_dictionary(pm, cfg.hyper, cfg.seed, *p.installed);
    } else {
        st = init_state(pm, cfg.hyper, cfg.seed, cfg.init);
    }
    p.state.reset();
    Hyperparams hp = cfg.hyper;
    hp.K = st.dict.size();

    const auto t0 = Clock::now();
    InferResult inferred = continue_inference(std::move(st), pm, hp, cfg.epochs_per_frame,
                                              cfg.freeze_dict);
    const double elapsed_ms =
        std::chrono::duration<double, std::milli>(Clock::now() - t0).count();

    Reconstitution rec = reconstitute(pm, inferred.estimates);
    result.reconstruction = apply_data_consistency(rec.tensor, frame, mask, cfg.data_consistency);

    FrameMetrics m;
    m.frame_id = frame_id;
    m.sampling_ratio = mask.ratio();
    m.epochs_run = cfg.epochs_per_frame;
    m.epoch_time_ms = elapsed_ms / static_cast<double>(cfg.epochs_per_frame);
    const ModelStats stats = model_stats(inferred.state);
    m.atoms_per_patch = stats.atoms_per_patch;
    m.pi_histogram = stats.pi_histogram;
    if (ground_truth) {
        Tensor gt = *ground_truth;
        for (auto& v : gt.data) v = (v - norm.offset) / norm.scale;
        m.mse = mse(result.reconstruction, gt);
        m.psnr_db = psnr(result.reconstruction, gt, 1.0);
        result.ground_truth = std::move(gt);
    } else {
        double acc = 0.0;
        const std::size_t count = mask.count();
        for (std::size_t e = 0; e < frame.size(); ++e) {
            if (!mask.observed[e]) continue;
            const double d = result.reconstruction.data[e] - frame.data[e];
            acc += d * d;
        }
        m.mse = count ? acc / static_cast<double>(count) : 0.0;
    }
    result.metrics = m;
    result.config = cfg;
    result.dictionary = inferred.state.dict;
    result.mask = mask;

    p.residual = p.last_recon.data.empty() ? Tensor(frame.shape, 0.0)
                                           : squared_difference(result.reconstruction, p.last_recon);
    p.last_recon = result.reconstruction;
    p.last_mask = std::move(mask);
    p.shape = frame.shape;
    p.state = std::move(inferred.state);
    p.metrics = m;
    ++p.frames_done;
    return result;
}

void Pipeline::transfer_between(ProblemHandle src_h, ProblemHandle dst_h, bool freeze) {
    Problem& src = get(src_h);
    std::optional<Dictionary> source;
    {
        std::lock_guard lock(src.mu);
        source = src.state ? std::optional<Dictionary>(src.state->dict) : src.installed;
    }
    if (!source) {
        throw std::invalid_argument("problem '" + src.config.name + "' has no dictionary yet");
    }
    install(dst_h, *source, freeze);
}

void Pipeline::install(ProblemHandle dst_h, const Dictionary& dict, bool freeze) {
    Problem& dst = get(dst_h);
    std::lock_guard lock(dst.mu);
    Dictionary adapted = transfer_dictionary(dict, dst.config.patch.patch_shape);
    if (dst.state) {
        dst.state->dict = adapted;
        reset_codes(*dst.state, dst.state->code.n);
    }
    dst.installed = std::move(adapted);
    dst.config.freeze_dict = freeze;
}

std::uint64_t Pipeline::set_sampling(ProblemHandle h, double ratio) {
    Problem& p = get(h);
    std::lock_guard lock(p.mu);
    SamplerSpec next = p.config.sampler;
    next.ratio = ratio;
    next.validate();
    p.config.sampler = next;
    return p.frames_done;
}

std::uint64_t Pipeline::set_epochs(ProblemHandle h, std::size_t epochs) {
    if (epochs < 1) throw std::invalid_argument("epochs per frame must be >= 1");
    Problem& p = get(h);
    std::lock_guard lock(p.mu);
    p.config.epochs_per_frame = epochs;
    return p.frames_done;
}

std::uint64_t Pipeline::set_strategy(ProblemHandle h, const std::string& strategy) {
    if (!StrategyRegistry::global().contains(strategy)) {
        throw std::invalid_argument("unknown sampling strategy '" + strategy + "'");
    }
    Problem& p = get(h);
    std::lock_guard lock(p.mu);
    p.config.strategy = strategy;
    try {
        p.config.sampler.kind = sampler_kind_from_string(strategy);
        p.config.strategy.clear();
    } catch (const std::invalid_argument&) {
        // custom plug-in strategy; the sampler kind stays as configured
    }
    return p.frames_done;
}

std::uint64_t Pipeline::set_paused(ProblemHandle h, bool paused) {
    Problem& p = get(h);
    std::lock_guard lock(p.mu);
    p.paused = paused;
    return p.frames_done;
}

bool Pipeline::paused(ProblemHandle h) const {
    const Problem& p = get(h);
    std::lock_guard lock(p.mu);
    return p.paused;
}

// ---------------------------------------------------------------------------
// Frame sources

DirectorySource::DirectorySource(const std::filesystem::path& dir) : dir_(dir) {
    std::error_code ec;
    if (!std::filesystem::is_directory(dir, ec)) {
        throw FormatError("frame source '" + dir.string() + "' is not a directory");
    }
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        auto ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext == ".pgm" || ext == ".satf") files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end(),
              [](const auto& a, const auto& b) { return a.filename().string() < b.filename().string(); });
}

std::optional<Tensor> DirectorySource::next() {
    if (pos_ >= files_.size()) return std::nullopt;
    return read_any(files_[pos_++]);
}

std::string DirectorySource::describe() const { return "dir:" + dir_.string(); }

TensorSequenceSource::TensorSequenceSource(std::vector<std::filesystem::path> files)
    : files_(std::move(files)) {}

std::optional<Tensor> TensorSequenceSource::next() {
    if (pos_ >= files_.size()) return std::nullopt;
    return read_any(files_[pos_++]);
}

std::string TensorSequenceSource::describe() const {
    return "tensor-sequence:" + std::to_string(files_.size()) + " files";
}

SyntheticSource::SyntheticSource(std::size_t rows, std::size_t cols, std::size_t frames,
                                 std::uint64_t seed, double drift_per_frame)
    : rows_(rows), cols_(cols), frames_(frames), seed_(seed), drift_(drift_per_frame) {}

std::optional<Tensor> SyntheticSource::next() {
    if (frames_ != 0 && pos_ >= frames_) return std::nullopt;
    const double t = drift_ * static_cast<double>(pos_++);
    return synthetic_texture(rows_, cols_, seed_, t);
}

std::string SyntheticSource::describe() const {
    return "synthetic:" + std::to_string(rows_) + "x" + std::to_string(cols_);
}

// ---------------------------------------------------------------------------
// Live session

LiveSession::LiveSession(Pipeline& pipeline, std::vector<Pairing> pairings)
    : pipeline_(pipeline), pairings_(std::move(pairings)) {
    if (pairings_.empty()) throw std::invalid_argument("live session needs at least one source");
}

void LiveSession::post_control(ControlCommand cmd, ControlCallback reply) {
    {
        std::lock_guard lock(mutex_);
        if (!finished_) {
            controls_.emplace_back(std::move(cmd), std::move(reply));
            cv_.notify_all();
            return;
        }
    }
    reply(ControlReply{.ok = false, .cmd = cmd.cmd, .error = "session finished"});
}

void LiveSession::request_stop() {
    stop_ = true;
    cv_.notify_all();
}

ControlReply LiveSession::apply(const ControlCommand& cmd) {
    ControlReply reply;
    reply.cmd = cmd.cmd;
    const auto handle = pipeline_.find(cmd.problem);
    if (!handle) {
        reply.error = "unknown problem '" + cmd.problem + "'";
        return reply;
    }
    const double* number = std::get_if<double>(&cmd.value);
    const std::string* text = std::get_if<std::string>(&cmd.value);
    try {
        if (cmd.cmd == "set_sampling") {
            if (!number) throw std::invalid_argument("set_sampling needs a numeric value");
            reply.applied_at_frame = pipeline_.set_sampling(*handle, *number);
        } else if (cmd.cmd == "set_epochs") {
            if (!number || *number < 1 || *number != std::floor(*number)) {
                throw std::invalid_argument("set_epochs needs a positive integer value");
            }
            reply.applied_at_frame = pipeline_.set_epochs(*handle, static_cast<std::size_t>(*number));
        } else if (cmd.cmd == "pause" || cmd.cmd == "resume") {
            reply.applied_at_frame = pipeline_.set_paused(*handle, cmd.cmd == "pause");
        } else if (cmd.cmd == "set_strategy") {
            if (!text) throw std::invalid_argument("set_strategy needs a strategy name");
            reply.applied_at_frame = pipeline_.set_strategy(*handle, *text);
        } else if (cmd.cmd == "transfer_dict") {
            if (!text) throw std::invalid_argument("transfer_dict needs a source problem name");
            std::string source = *text;
            bool freeze = true;
            if (auto colon = source.rfind(":finetune"); colon != std::string::npos &&
                                                         colon + 9 == source.size()) {
                source.resize(colon);
                freeze = false;
            }
            const auto src = pipeline_.find(source);
            if (!src) throw std::invalid_argument("unknown source problem '" + source + "'");
            pipeline_.transfer_between(*src, *handle, freeze);
            reply.applied_at_frame = pipeline_.status(*handle).frames_done;
        } else {
            throw std::invalid_argument("unknown command '" + cmd.cmd + "'");
        }
        reply.ok = true;
    } catch (const std::exception& ex) {
        reply.ok = false;
        reply.error = ex.what();
    }
    return reply;
}

void LiveSession::drain_controls(SessionSummary& summary) {
    std::deque<std::pair<ControlCommand, ControlCallback>> batch;
    {
        std::lock_guard lock(mutex_);
        batch.swap(controls_);
    }
    for (auto& [cmd, reply] : batch) {
        const ControlReply r = apply(cmd);
        (r.ok ? summary.controls_applied : summary.controls_rejected)++;
        if (reply) reply(r);
    }
}

SessionSummary LiveSession::run(const Sink& sink) {
    SessionSummary summary;
    std::vector<bool> exhausted(pairings_.size(), false);
    std::vector<Clock::time_point> due(pairings_.size(), Clock::now());
    for (const auto& pr : pairings_) summary.frames[pipeline_.status(pr.problem).config.name] = 0;

    while (!stop_) {
        drain_controls(summary);
        bool all_done = true;
        bool progressed = false;
        auto wake = Clock::now() + std::chrono::milliseconds(50);
        for (std::size_t j = 0; j < pairings_.size() && !stop_; ++j) {
            if (exhausted[j]) continue;
            all_done = false;
            auto& pr = pairings_[j];
            if (pipeline_.paused(pr.problem)) continue;
            if (Clock::now() < due[j]) {
                wake = std::min(wake, due[j]);
                continue;
            }
            std::optional<Tensor> frame;
            try {
                frame = pr.source->next();
            } catch (const std::exception& ex) {
                std::cerr << "warning: skipping unreadable frame from " << pr.source->describe()
                          << ": " << ex.what() << "\n";
                ++summary.read_failures;
                progressed = true;
                continue;
            }
            if (!frame) {
                exhausted[j] = true;
                continue;
            }
            const bool with_reference = pipeline_.status(pr.problem).config.reference_available;
            FrameResult result =
                pipeline_.submit_frame(pr.problem, *frame, with_reference ? &*frame : nullptr);
            ++summary.frames[result.problem_name];
            ++summary.frames_total;
            progressed = true;
            if (pr.source->fps_cap && *pr.source->fps_cap > 0) {
                due[j] = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                            std::chrono::duration<double>(1.0 / *pr.source->fps_cap));
            }
            if (sink) sink(result);
            // Controls that arrived during this frame apply before the next one.
            drain_controls(summary);
        }
        if (all_done) break;
        if (!progressed) {
            std::unique_lock lock(mutex_);
            cv_.wait_until(lock, wake, [&] { return stop_ || !controls_.empty(); });
        }
    }
    {
        std::lock_guard lock(mutex_);
        finished_ = true;
    }
    // Anything still queued is answered so every control gets exactly one reply.
    std::deque<std::pair<ControlCommand, ControlCallback>> late;
    {
        std::lock_guard lock(mutex_);
        late.swap(controls_);
    }
    for (auto& [cmd, reply] : late) {
        ++summary.controls_rejected;
        if (reply) reply(ControlReply{.ok = false, .cmd = cmd.cmd, .error = "session finished"});
    }
    return summary;
}

SessionSummary run_live(Pipeline& pipeline, std::vector<LiveSession::Pairing> pairings,
                        const LiveSession::Sink& sink) {
    LiveSession session(pipeline, std::move(pairings));
    return session.run(sink);
}

}  // namespace bpinpaint
