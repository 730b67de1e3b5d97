// SPDX-License-Identifier: Apache-2.0

#include "scenechat/chat/http.hpp"

#include "scenechat/core/error.hpp"
#include "scenechat/core/text.hpp"

// After the Eigen-dependent headers: resolv.h defines a `_res` macro.
#include <httplib.h>

namespace scenechat::chat {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

int status_for(const std::exception_ptr& ep, std::string& message) {
  try {
    std::rethrow_exception(ep);
  } catch (const NotFound& e) {
    message = e.what();
    return 404;
  } catch (const BusyError& e) {
    message = e.what();
    return 409;
  } catch (const ContextOverflow& e) {
    message = e.what();
    return 422;
  } catch (const InvalidInput& e) {
    message = e.what();
    return 400;
  } catch (const ParseError& e) {
    message = e.what();
    return 400;
  } catch (const ValidationError& e) {
    message = e.what();
    return 400;
  } catch (const nlohmann::json::exception& e) {
    message = std::string("malformed request body: ") + e.what();
    return 400;
  } catch (const std::exception& e) {
    message = e.what();
    return 500;
  } catch (...) {
    message = "unknown error";
    return 500;
  }
}

bool flag(const httplib::Request& req, const char* name) {
  if (!req.has_param(name)) return false;
  const auto v = to_lower(req.get_param_value(name));
  return v == "1" || v == "true" || v == "yes";
}

nlohmann::json parse_body(const httplib::Request& req) {
  auto j = nlohmann::json::parse(req.body);
  if (!j.is_object()) throw InvalidInput("request body must be a JSON object");
  return j;
}

}  // namespace

struct HttpServer::Impl {
  ChatService& service;
  httplib::Server server;

  explicit Impl(ChatService& s) : service(s) { routes(); }

  template <typename F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (...) {
        std::string message;
        const int status = status_for(std::current_exception(), message);
        send_json(res, status, {{"error", message}});
      }
    };
  }

  void routes() {
    server.Get("/scenes", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const bool points = flag(req, "points");
                 nlohmann::json arr = nlohmann::json::array();
                 for (const auto& s : service.scenes().list()) {
                   arr.push_back(points ? summarize(service.scenes().get(s.scene_id), true).to_json(true) : s.to_json());
                 }
                 send_json(res, 200, {{"scenes", std::move(arr)}});
               }));
    server.Get(R"(/scenes/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 const bool points = flag(req, "points");
                 send_json(res, 200, summarize(service.scenes().get(req.matches[1]), points).to_json(points));
               }));
    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  if (!body.contains("scene_id") || !body.contains("target_object_id")) {
                    throw InvalidInput("scene_id and target_object_id are required");
                  }
                  std::optional<lm::DecodingOptions> dec;
                  if (body.contains("decoding")) {
                    dec = decoding_from_json(body.at("decoding"), service.options().decoding);
                  }
                  const auto info = service.create_session(body.at("scene_id").get<std::string>(),
                                                           body.at("target_object_id").get<int>(), dec);
                  send_json(res, 201, info.to_json());
                }));
    server.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, 200, service.session(req.matches[1]).to_json());
               }));
    server.Delete(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
                    service.delete_session(req.matches[1]);
                    res.status = 204;
                  }));
    server.Post(R"(/sessions/([^/]+)/messages)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  const auto body = parse_body(req);
                  if (!body.contains("text") || !body.at("text").is_string()) throw InvalidInput("text is required");
                  auto text = service.post_message(req.matches[1], body.at("text").get<std::string>());
                  if (!flag(req, "stream")) {
                    send_json(res, 200, {{"response", text}});
                    return;
                  }
                  // One chunk per word, separators included.
                  auto pieces = std::make_shared<std::vector<std::string>>();
                  std::size_t start = 0;
                  for (std::size_t i = 1; i <= text.size(); ++i) {
                    if (i == text.size() || text[i] == ' ') {
                      pieces->push_back(text.substr(start, i - start));
                      start = i;
                    }
                  }
                  res.status = 200;
                  auto next = std::make_shared<std::size_t>(0);
                  res.set_chunked_content_provider("text/plain", [pieces, next](std::size_t, httplib::DataSink& sink) {
                    if (*next < pieces->size()) {
                      const auto& p = (*pieces)[(*next)++];
                      sink.write(p.data(), p.size());
                    } else {
                      sink.done();
                    }
                    return true;
                  });
                }));
  }
};

HttpServer::HttpServer(ChatService& service) : impl_(std::make_unique<Impl>(service)) {}
HttpServer::~HttpServer() = default;

int HttpServer::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool HttpServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
bool HttpServer::serve() { return impl_->server.listen_after_bind(); }
void HttpServer::stop() { impl_->server.stop(); }
void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace scenechat::chat
