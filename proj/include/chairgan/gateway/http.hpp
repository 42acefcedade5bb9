#pragma once

#include <functional>
#include <memory>
#include <string>

// Eigen must be parsed before httplib: <resolv.h> defines a `_res` macro
// that clashes with Eigen parameter names.
#include "chairgan/core/error.hpp"
#include "chairgan/gateway/service.hpp"

#include <httplib.h>

namespace chairgan::gateway {

/// Binds a Service to an HTTP listener. bind() fails fast when the port is
/// taken; listen() blocks until stop().
class HttpServer {
 public:
  explicit HttpServer(Service& service) : service_(service) {
    auto adapt = [this](const httplib::Request& in, httplib::Response& out) {
      Request req;
      req.method = in.method;
      req.path = in.path;
      for (const auto& [k, v] : in.params) req.query.emplace(k, v);
      req.body = in.body;
      const Response res = service_.handle(req);
      out.status = res.status;
      out.set_content(res.body, res.content_type);
    };
    // httplib's default adds SO_REUSEPORT, which would let a second server
    // share a busy port instead of failing.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
    });
    server_.Get(R"(/.*)", adapt);
    server_.Post(R"(/.*)", adapt);
    server_.Put(R"(/.*)", adapt);
    server_.Delete(R"(/.*)", adapt);
  }

  /// Port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = server_.bind_to_any_port(host);
      if (port_ < 0) throw IoError("cannot bind " + host);
    } else {
      if (!server_.bind_to_port(host, port)) throw IoError("port " + std::to_string(port) + " on " + host + " is busy");
      port_ = port;
    }
    return port_;
  }

  void listen() {
    if (port_ < 0) throw IoError("listen before bind");
    server_.listen_after_bind();
  }

  void stop() { server_.stop(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  int port() const { return port_; }

 private:
  Service& service_;
  httplib::Server server_;
  int port_ = -1;
};

}  // namespace chairgan::gateway
