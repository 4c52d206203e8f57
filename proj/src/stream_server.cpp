#include "bpinpaint/stream_server.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <deque>
#include <iostream>
#include <mutex>
#include <set>
#include <thread>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "bpinpaint/wire.hpp"

namespace bpinpaint {

namespace beast = boost::beast;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

struct Outgoing {
    std::shared_ptr<const std::string> data;
    bool text = true;
    int slot = -1;  // (problem << 2) | type for droppable images
};

Outgoing text_message(std::string s) {
    return {std::make_shared<const std::string>(std::move(s)), true, -1};
}

}  // namespace

class Viewer;

struct StreamServer::Impl {
    Impl(Pipeline& p, LiveSession& s, ServerOptions o)
        : pipeline(p), session(s), options(std::move(o)), acceptor(ioc) {}

    void do_accept();
    void add(const std::shared_ptr<Viewer>& v);
    void remove(const Viewer* v);
    void on_control(const std::shared_ptr<Viewer>& v, const std::string& text);
    std::string descriptor(std::uint64_t dropped) const;
    std::vector<std::shared_ptr<Viewer>> snapshot() const;

    Pipeline& pipeline;
    LiveSession& session;
    ServerOptions options;
    net::io_context ioc;
    tcp::acceptor acceptor;
    std::vector<std::thread> threads;
    mutable std::mutex mu;
    std::condition_variable cv;
    std::vector<std::shared_ptr<Viewer>> viewers;
    std::size_t published = 0;
    bool stopped = false;
};

class Viewer : public std::enable_shared_from_this<Viewer> {
public:
    Viewer(tcp::socket&& socket, StreamServer::Impl& server)
        : ws_(std::move(socket)), server_(server) {}

    void run() {
        net::dispatch(ws_.get_executor(), [self = shared_from_this()] { self->on_run(); });
    }

    void send(Outgoing m) {
        ++queued_;
        net::post(ws_.get_executor(),
                  [self = shared_from_this(), m = std::move(m)]() mutable { self->enqueue(std::move(m)); });
    }

    /// Descriptor refresh carrying this viewer's own drop count.
    void send_descriptor() {
        ++queued_;
        net::post(ws_.get_executor(), [self = shared_from_this()] {
            self->enqueue(text_message(self->server_.descriptor(self->dropped_)));
        });
    }

    std::size_t queued() const { return queued_; }

private:
    void on_run() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept([self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
    }

    void on_accept(beast::error_code ec) {
        if (ec) return;
        // The descriptor is queued before registration, so it precedes every broadcast.
        ++queued_;
        enqueue(text_message(server_.descriptor(0)));
        server_.add(shared_from_this());
        do_read();
    }

    void do_read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            self->on_read(ec);
        });
    }

    void on_read(beast::error_code ec) {
        if (ec) {
            server_.remove(this);
            return;
        }
        if (ws_.got_text()) {
            server_.on_control(shared_from_this(), beast::buffers_to_string(buffer_.data()));
        } else {
            send(text_message(wire::error_json("control messages must be JSON text")));
        }
        buffer_.consume(buffer_.size());
        do_read();
    }

    void enqueue(Outgoing m) {
        if (closed_) {
            --queued_;
            return;
        }
        if (m.slot >= 0) {
            // Latest wins: replace an image of the same slot that is not yet on the wire.
            const std::size_t first_idle = writing_ ? 1 : 0;
            for (std::size_t j = first_idle; j < queue_.size(); ++j) {
                if (queue_[j].slot == m.slot) {
                    queue_.erase(queue_.begin() + static_cast<std::ptrdiff_t>(j));
                    --queued_;
                    ++dropped_;
                    break;
                }
            }
        }
        queue_.push_back(std::move(m));
        if (!writing_) write_next();
    }

    void write_next() {
        writing_ = true;
        ws_.text(queue_.front().text);
        ws_.async_write(net::buffer(*queue_.front().data),
                        [self = shared_from_this()](beast::error_code ec, std::size_t) {
                            self->on_write(ec);
                        });
    }

    void on_write(beast::error_code ec) {
        queue_.pop_front();
        --queued_;
        if (ec) {
            closed_ = true;
            queued_ -= queue_.size();
            queue_.clear();
            writing_ = false;
            server_.remove(this);
            return;
        }
        if (queue_.empty()) {
            writing_ = false;
        } else {
            write_next();
        }
    }

    websocket::stream<beast::tcp_stream> ws_;
    StreamServer::Impl& server_;
    beast::flat_buffer buffer_;
    std::deque<Outgoing> queue_;
    bool writing_ = false;
    bool closed_ = false;
    std::uint64_t dropped_ = 0;
    std::atomic<std::size_t> queued_{0};
};

void StreamServer::Impl::do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec != net::error::operation_aborted) do_accept();
            return;
        }
        std::make_shared<Viewer>(std::move(socket), *this)->run();
        do_accept();
    });
}

void StreamServer::Impl::add(const std::shared_ptr<Viewer>& v) {
    {
        std::lock_guard lock(mu);
        viewers.push_back(v);
    }
    cv.notify_all();
}

void StreamServer::Impl::remove(const Viewer* v) {
    std::lock_guard lock(mu);
    viewers.erase(std::remove_if(viewers.begin(), viewers.end(),
                                 [v](const auto& p) { return p.get() == v; }),
                  viewers.end());
    cv.notify_all();
}

std::vector<std::shared_ptr<Viewer>> StreamServer::Impl::snapshot() const {
    std::lock_guard lock(mu);
    return viewers;
}

std::string StreamServer::Impl::descriptor(std::uint64_t dropped) const {
    std::size_t count = 0;
    {
        std::lock_guard lock(mu);
        count = viewers.size();
    }
    return wire::session_descriptor_json(pipeline.status(), dropped, count);
}

void StreamServer::Impl::on_control(const std::shared_ptr<Viewer>& v, const std::string& text) {
    wire::ParsedControl parsed = wire::parse_control(text);
    if (!parsed.command) {
        v->send(text_message(wire::error_json(parsed.error, parsed.cmd)));
        return;
    }
    std::weak_ptr<Viewer> weak = v;
    const std::string problem = parsed.command->problem;
    session.post_control(std::move(*parsed.command), [weak, problem](const ControlReply& reply) {
        if (auto viewer = weak.lock()) viewer->send(text_message(wire::ack_json(reply, problem)));
    });
}

StreamServer::StreamServer(Pipeline& pipeline, LiveSession& session, ServerOptions options)
    : impl_(std::make_unique<Impl>(pipeline, session, std::move(options))) {}

StreamServer::~StreamServer() { stop(); }

std::uint16_t StreamServer::start() {
    beast::error_code ec;
    const auto address = net::ip::make_address(impl_->options.bind_address, ec);
    if (ec) throw std::runtime_error("invalid bind address '" + impl_->options.bind_address + "'");
    const tcp::endpoint endpoint{address, impl_->options.port};
    auto& acc = impl_->acceptor;
    acc.open(endpoint.protocol(), ec);
    if (!ec) acc.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acc.bind(endpoint, ec);
    if (!ec) acc.listen(net::socket_base::max_listen_connections, ec);
    if (ec) {
        throw std::runtime_error("cannot listen on " + impl_->options.bind_address + ":" +
                                 std::to_string(impl_->options.port) + ": " + ec.message());
    }
    const std::uint16_t port = acc.local_endpoint().port();
    impl_->do_accept();
    const int n = std::max(1, impl_->options.io_threads);
    for (int t = 0; t < n; ++t) impl_->threads.emplace_back([this] { impl_->ioc.run(); });
    return port;
}

void StreamServer::publish(const FrameResult& r) {
    auto image = [&](wire::FrameType type, wire::Panel panel) {
        wire::WireFrame f;
        f.type = type;
        f.problem_id = static_cast<std::uint16_t>(r.problem);
        f.frame_id = static_cast<std::uint32_t>(r.frame_id);
        f.panel = std::move(panel);
        return Outgoing{std::make_shared<const std::string>(wire::encode_frame(f)), false,
                        static_cast<int>((r.problem << 2) | static_cast<std::size_t>(type))};
    };
    std::vector<Outgoing> messages;
    messages.push_back(image(wire::FrameType::masked_input, wire::panel_from_tensor(r.masked_input)));
    messages.push_back(image(wire::FrameType::reconstruction, wire::panel_from_tensor(r.reconstruction)));
    messages.push_back(image(wire::FrameType::dictionary_atlas, wire::render_dictionary_atlas(r.dictionary)));
    if (r.ground_truth) {
        messages.push_back(image(wire::FrameType::ground_truth, wire::panel_from_tensor(*r.ground_truth)));
    }
    messages.push_back(text_message(wire::metrics_json(r.problem_name, r.metrics)));

    bool refresh = false;
    {
        std::lock_guard lock(impl_->mu);
        ++impl_->published;
        refresh = impl_->options.descriptor_every > 0 &&
                  impl_->published % impl_->options.descriptor_every == 0;
    }
    for (const auto& v : impl_->snapshot()) {
        for (const auto& m : messages) v->send(m);
        if (refresh) v->send_descriptor();
    }
}

void StreamServer::publish_end(const SessionSummary& summary) {
    const auto msg = text_message(wire::end_json(summary));
    for (const auto& v : impl_->snapshot()) v->send(msg);
}

std::size_t StreamServer::viewer_count() const {
    std::lock_guard lock(impl_->mu);
    return impl_->viewers.size();
}

bool StreamServer::wait_for_viewer(std::chrono::milliseconds timeout) {
    std::unique_lock lock(impl_->mu);
    return impl_->cv.wait_for(lock, timeout, [&] { return !impl_->viewers.empty() || impl_->stopped; }) &&
           !impl_->viewers.empty();
}

bool StreamServer::wait_drained(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
        const auto viewers = impl_->snapshot();
        const bool drained = std::all_of(viewers.begin(), viewers.end(),
                                         [](const auto& v) { return v->queued() == 0; });
        if (drained) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    return false;
}

void StreamServer::stop() {
    if (!impl_) return;
    {
        std::lock_guard lock(impl_->mu);
        if (impl_->stopped) return;
        impl_->stopped = true;
        impl_->viewers.clear();
    }
    impl_->cv.notify_all();
    beast::error_code ec;
    impl_->acceptor.close(ec);
    impl_->ioc.stop();
    for (auto& t : impl_->threads) {
        if (t.joinable()) t.join();
    }
}

}  // namespace bpinpaint
