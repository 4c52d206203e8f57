#pragma once

// Minimal blocking WebSocket viewer for tests.

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <chrono>
#include <optional>
#include <string>

namespace testutil {

class WsClient {
public:
    struct Message {
        bool binary = false;
        std::string data;
    };

    WsClient(const std::string& host, std::uint16_t port) : ws_(ioc_) {
        namespace asio = boost::asio;
        asio::ip::tcp::resolver resolver(ioc_);
        asio::connect(ws_.next_layer(), resolver.resolve(host, std::to_string(port)));
        ws_.handshake(host, "/");
    }

    ~WsClient() {
        boost::beast::error_code ec;
        ws_.close(boost::beast::websocket::close_code::normal, ec);
    }

    void send_text(const std::string& text) {
        ws_.text(true);
        ws_.write(boost::asio::buffer(text));
    }

    /// Next message, or nullopt once the server closes the connection.
    std::optional<Message> read() {
        boost::beast::flat_buffer buffer;
        boost::beast::error_code ec;
        ws_.read(buffer, ec);
        if (ec) return std::nullopt;
        return Message{ws_.got_binary(), boost::beast::buffers_to_string(buffer.data())};
    }

private:
    boost::asio::io_context ioc_;
    boost::beast::websocket::stream<boost::asio::ip::tcp::socket> ws_;
};

}  // namespace testutil
