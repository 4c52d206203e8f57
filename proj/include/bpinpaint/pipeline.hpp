#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bpinpaint/bpfa.hpp"
#include "bpinpaint/metrics.hpp"
#include "bpinpaint/sampling.hpp"
#include "bpinpaint/tensor.hpp"

namespace bpinpaint {

struct ProblemConfig {
    std::string name;
    PatchSpec patch;
    Hyperparams hyper;
    SamplerSpec sampler;
    /// Registered strategy name; empty means the sampler kind's own name.
    std::string strategy;
    std::size_t epochs_per_frame = 1;
    bool freeze_dict = false;
    bool warm_start = true;
    bool data_consistency = false;
    bool reference_available = false;
    bool mean_subtract = true;
    InitMode init = InitMode::prior;
    std::uint64_t seed = 0;
    /// Redraw pre-determined masks every frame instead of keeping one pattern.
    bool refresh_mask = false;

    void validate() const;
    std::string strategy_name() const;
};

using ProblemHandle = std::size_t;

struct FrameResult {
    ProblemHandle problem = 0;
    std::string problem_name;
    std::uint64_t frame_id = 0;
    Tensor reconstruction;
    Tensor masked_input;
    std::optional<Tensor> ground_truth;
    SampleMask mask;
    FrameMetrics metrics;
    ProblemConfig config;  // snapshot the frame was computed with
    Dictionary dictionary;
};

struct ProblemStatus {
    ProblemHandle handle = 0;
    ProblemConfig config;
    std::optional<TensorShape> frame_shape;
    std::uint64_t frames_done = 0;
    bool paused = false;
    std::size_t atoms = 0;
    std::optional<FrameMetrics> last_metrics;
};

/// Registry of simultaneous reconstruction problems. Calls on one handle are
/// serialized; distinct handles can be driven from different threads.
class Pipeline {
public:
    Pipeline();
    ~Pipeline();
    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    ProblemHandle create_problem(ProblemConfig cfg);
    std::optional<ProblemHandle> find(const std::string& name) const;
    std::vector<ProblemStatus> status() const;
    ProblemStatus status(ProblemHandle h) const;
    std::optional<FrameMetrics> last_metrics(ProblemHandle h) const;
    std::optional<GibbsState> state(ProblemHandle h) const;
    std::optional<Dictionary> dictionary(ProblemHandle h) const;

    FrameResult submit_frame(ProblemHandle h, const Tensor& frame,
                             const Tensor* ground_truth = nullptr);

    /// Installs src's dictionary into dst (adapted to dst's patch shape) and sets
    /// dst's freeze flag. dst keeps no codes; it may be idle.
    void transfer_between(ProblemHandle src, ProblemHandle dst, bool freeze);
    /// Same as transfer_between with a dictionary from outside the registry.
    void install(ProblemHandle dst, const Dictionary& dict, bool freeze);

    /// Config mutations; each returns the id of the first frame that sees it.
    std::uint64_t set_sampling(ProblemHandle h, double ratio);
    std::uint64_t set_epochs(ProblemHandle h, std::size_t epochs);
    std::uint64_t set_strategy(ProblemHandle h, const std::string& strategy);
    std::uint64_t set_paused(ProblemHandle h, bool paused);
    bool paused(ProblemHandle h) const;

private:
    struct Problem;
    Problem& get(ProblemHandle h) const;

    mutable std::mutex registry_mutex_;
    std::vector<std::unique_ptr<Problem>> problems_;
};

/// Yields frames of constant shape; returns nullopt when exhausted. Read
/// failures are reported by throwing.
class FrameSource {
public:
    virtual ~FrameSource() = default;
    virtual std::optional<Tensor> next() = 0;
    virtual std::string describe() const = 0;
    std::optional<double> fps_cap;
};

/// PGM or SATF files of one directory, in lexicographic filename order.
class DirectorySource : public FrameSource {
public:
    explicit DirectorySource(const std::filesystem::path& dir);
    std::optional<Tensor> next() override;
    std::string describe() const override;
    std::size_t size() const { return files_.size(); }

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> files_;
    std::size_t pos_ = 0;
};

/// An explicit list of tensor files.
class TensorSequenceSource : public FrameSource {
public:
    explicit TensorSequenceSource(std::vector<std::filesystem::path> files);
    std::optional<Tensor> next() override;
    std::string describe() const override;

private:
    std::vector<std::filesystem::path> files_;
    std::size_t pos_ = 0;
};

/// Drifting synthetic texture; `frames` = 0 means unbounded.
class SyntheticSource : public FrameSource {
public:
    SyntheticSource(std::size_t rows, std::size_t cols, std::size_t frames, std::uint64_t seed,
                    double drift_per_frame = 0.1);
    std::optional<Tensor> next() override;
    std::string describe() const override;

private:
    std::size_t rows_, cols_, frames_;
    std::uint64_t seed_;
    double drift_;
    std::size_t pos_ = 0;
};

struct ControlCommand {
    std::string cmd;
    std::string problem;
    std::variant<std::monostate, double, std::string> value;
};

struct ControlReply {
    bool ok = false;
    std::string cmd;
    std::uint64_t applied_at_frame = 0;
    std::string error;
};

using ControlCallback = std::function<void(const ControlReply&)>;

struct SessionSummary {
    std::map<std::string, std::uint64_t> frames;  // per problem
    std::size_t frames_total = 0;
    std::size_t read_failures = 0;
    std::size_t controls_applied = 0;
    std::size_t controls_rejected = 0;
};

/// Pumps frames from sources into problems. Control commands posted from any
/// thread are applied between frames, never during one.
class LiveSession {
public:
    struct Pairing {
        std::unique_ptr<FrameSource> source;
        ProblemHandle problem;
    };
    using Sink = std::function<void(const FrameResult&)>;

    LiveSession(Pipeline& pipeline, std::vector<Pairing> pairings);

    void post_control(ControlCommand cmd, ControlCallback reply);
    void request_stop();
    bool finished() const { return finished_; }

    /// Runs until every source is exhausted or stop is requested.
    SessionSummary run(const Sink& sink);

private:
    void drain_controls(SessionSummary& summary);
    ControlReply apply(const ControlCommand& cmd);

    Pipeline& pipeline_;
    std::vector<Pairing> pairings_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<std::pair<ControlCommand, ControlCallback>> controls_;
    std::atomic<bool> stop_{false};
    std::atomic<bool> finished_{false};
};

SessionSummary run_live(Pipeline& pipeline, std::vector<LiveSession::Pairing> pairings,
                        const LiveSession::Sink& sink);

}  // namespace bpinpaint
