#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <string>

#include "bpinpaint/pipeline.hpp"

namespace bpinpaint {

struct ServerOptions {
    std::string bind_address = "127.0.0.1";
    std::uint16_t port = 8765;  // 0 picks an ephemeral port
    int io_threads = 2;
    /// Re-send the session descriptor (with the viewer's drop count) every N frames.
    std::size_t descriptor_every = 10;
};

/// WebSocket endpoint for live viewers. Binary messages carry wire frames; text
/// messages carry JSON (session descriptor, metrics, acks, errors). Control
/// messages from viewers are forwarded to the live session and applied at the
/// next frame boundary.
class StreamServer {
public:
    StreamServer(Pipeline& pipeline, LiveSession& session, ServerOptions options);
    ~StreamServer();
    StreamServer(const StreamServer&) = delete;
    StreamServer& operator=(const StreamServer&) = delete;

    /// Binds and starts accepting. Throws std::runtime_error when the address
    /// cannot be bound. Returns the bound port.
    std::uint16_t start();

    /// Fans one frame result out to every viewer. Never blocks on slow viewers:
    /// an unsent image of the same (problem, type) is replaced and counted as dropped.
    void publish(const FrameResult& result);

    /// Broadcasts the end-of-session message.
    void publish_end(const SessionSummary& summary);

    std::size_t viewer_count() const;
    bool wait_for_viewer(std::chrono::milliseconds timeout);
    /// Waits until every viewer's outbound queue is empty.
    bool wait_drained(std::chrono::milliseconds timeout);

    void stop();

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
};

}  // namespace bpinpaint
