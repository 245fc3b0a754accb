#include "pesao/recorder/api.hpp"

#include <sys/socket.h>

#include <atomic>
#include <deque>
#include <list>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <fmt/format.h>

#include "pesao/util/io.hpp"

namespace pesao::recorder {

namespace fs = std::filesystem;
namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

ApiResponse json_reply(int status, const json& j) { return {status, "application/json", j.dump()}; }
ApiResponse error_reply(int status, const std::string& msg) { return json_reply(status, {{"error", msg}}); }

json marker_json(const MarkerEvent& e) {
  return {{"t", e.t.seconds}, {"kind", std::string(to_string(e.kind))}, {"payload", e.payload}};
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  json j = json::parse(body, nullptr, false);
  if (j.is_discarded()) throw RecorderError("request body is not valid JSON");
  if (!j.is_object()) throw RecorderError("request body must be a JSON object");
  return j;
}

template <class T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw RecorderError(fmt::format("missing field '{}'", key));
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw RecorderError(fmt::format("field '{}' has the wrong type", key));
  }
}

std::string content_type_for(const fs::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json" || ext == ".map") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  if (ext == ".ico") return "image/x-icon";
  return "application/octet-stream";
}

ApiResponse serve_static(const std::optional<fs::path>& root, std::string path) {
  if (!root || !fs::is_directory(*root)) return error_reply(404, "console assets are not installed");
  std::string rel = path.size() > 3 ? path.substr(4) : "";
  if (rel.empty() || rel.back() == '/') rel += "index.html";
  const fs::path full = (*root / rel).lexically_normal();
  const fs::path base = root->lexically_normal();
  const auto [r, _] = std::mismatch(base.begin(), base.end(), full.begin(), full.end());
  if (r != base.end() || rel.find("..") != std::string::npos) return error_reply(404, "not found");
  if (!fs::is_regular_file(full)) return error_reply(404, "not found");
  return {200, content_type_for(full), util::read_file(full)};
}

std::pair<std::string, std::string> split_target(const std::string& target) {
  const auto q = target.find('?');
  if (q == std::string::npos) return {target, ""};
  return {target.substr(0, q), target.substr(q + 1)};
}

bool query_flag(const std::string& query, const std::string& key) {
  for (const auto& part : util::split(query, '&')) {
    if (part == key || part == key + "=true" || part == key + "=1") return true;
  }
  return false;
}

ApiResponse route(RecorderService& svc, const std::string& method, const std::string& path,
                  const std::string& query, const std::string& body, const std::optional<fs::path>& ui_root) {
  const auto want = [&](const char* m) {
    if (method != m) throw std::invalid_argument(fmt::format("{} not allowed on {}", method, path));
  };
  if (path == "/ui" || path.rfind("/ui/", 0) == 0) {
    want("GET");
    return serve_static(ui_root, path);
  }
  if (path == "/streams") {
    want("GET");
    const auto list = query_flag(query, "refresh") ? svc.refresh_streams() : svc.streams();
    json out = json::array();
    for (const auto& s : list) out.push_back(to_json(s));
    return json_reply(200, out);
  }
  if (path == "/selection") {
    want("POST");
    svc.select(field<std::vector<std::string>>(parse_body(body), "selection"));
    return json_reply(200, svc.status());
  }
  if (path == "/status") {
    want("GET");
    return json_reply(200, svc.status());
  }
  if (path == "/recording/start") {
    want("POST");
    const json j = parse_body(body);
    const auto selection = field<std::vector<std::string>>(j, "selection");
    const SessionMeta meta = session_from_json(j.contains("session") ? j.at("session") : json::object());
    return json_reply(200, svc.start_recording(selection, meta));
  }
  if (path == "/recording/stop") {
    want("POST");
    return json_reply(200, svc.stop_recording());
  }
  if (path == "/notes") {
    want("POST");
    return json_reply(200, marker_json(svc.post_note(field<std::string>(parse_body(body), "text"))));
  }
  if (path == "/answers") {
    want("POST");
    const json j = parse_body(body);
    return json_reply(200, marker_json(svc.post_answer(field<int>(j, "trial_index"), field<std::string>(j, "answer"))));
  }
  if (path == "/trials") {
    want("GET");
    const auto plan = svc.trials();
    if (!plan) return error_reply(404, "no trial plan");
    return json_reply(200, sim::to_json(*plan));
  }
  if (path == "/trials/generate") {
    want("POST");
    const json j = parse_body(body);
    const int reps = j.contains("repetitions") ? field<int>(j, "repetitions") : 1;
    const auto plan = svc.generate_trials(field<std::uint64_t>(j, "seed"),
                                          field<std::vector<std::string>>(j, "conditions"), reps);
    return json_reply(200, sim::to_json(plan));
  }
  if (path == "/trials/mark") {
    want("POST");
    const json j = parse_body(body);
    const auto kind = marker_kind_from_string(field<std::string>(j, "kind"));
    if (!kind) throw RecorderError("kind must be trial_start or trial_end");
    return json_reply(200, marker_json(svc.mark_trial(*kind, field<int>(j, "trial_index"))));
  }
  return error_reply(404, "no route for " + path);
}

}  // namespace

ApiResponse handle_request(RecorderService& service, const std::string& method, const std::string& target,
                           const std::string& body, const std::optional<fs::path>& ui_root) {
  const auto [path, query] = split_target(target);
  try {
    return route(service, method, path, query, body, ui_root);
  } catch (const StateConflict& e) {
    return error_reply(409, e.what());
  } catch (const RecorderError& e) {
    return error_reply(400, e.what());
  } catch (const wire::NetworkError& e) {
    return error_reply(503, e.what());
  } catch (const std::invalid_argument& e) {
    return error_reply(405, e.what());
  } catch (const std::exception& e) {
    return error_reply(500, e.what());
  }
}

// ---- server

namespace {

struct Session {
  std::thread thread;
  std::atomic<bool> done{false};
  int fd = -1;
};

/// Push-only status feed. Client frames are read and discarded so close
/// handshakes and pings are honoured.
void run_live(RecorderService& svc, tcp::socket raw, const http::request<http::string_body>& req,
              std::chrono::milliseconds period, const std::atomic<bool>& stopping) {
  net::io_context ctx;
  tcp::socket sock(ctx);
  sock.assign(tcp::v4(), raw.release());
  websocket::stream<tcp::socket> ws(std::move(sock));
  ws.accept(req);
  ws.text(true);

  std::mutex mu;
  std::deque<std::string> events;
  const int listener = svc.add_listener([&](const json& e) {
    std::lock_guard lk(mu);
    events.push_back(e.dump());
  });

  std::deque<std::string> outbox;
  bool writing = false;
  bool closed = false;
  beast::flat_buffer in;
  net::steady_timer timer(ctx);
  auto next_status = std::chrono::steady_clock::now();

  std::function<void()> kick = [&] {
    if (writing || closed || outbox.empty()) return;
    writing = true;
    ws.async_write(net::buffer(outbox.front()), [&](beast::error_code ec, std::size_t) {
      writing = false;
      outbox.pop_front();
      if (ec) {
        closed = true;
        timer.cancel();
        return;
      }
      kick();
    });
  };
  std::function<void()> read = [&] {
    ws.async_read(in, [&](beast::error_code ec, std::size_t) {
      if (ec) {
        closed = true;
        timer.cancel();
        return;
      }
      in.consume(in.size());
      read();
    });
  };
  std::function<void()> tick = [&] {
    if (closed) return;
    if (stopping) {
      closed = true;
      ws.async_close(websocket::close_code::going_away, [](beast::error_code) {});
      return;
    }
    {
      std::lock_guard lk(mu);
      for (auto& e : events) outbox.push_back(std::move(e));
      events.clear();
    }
    const auto now = std::chrono::steady_clock::now();
    if (now >= next_status) {
      outbox.push_back(json{{"type", "status"}, {"status", svc.status()}}.dump());
      next_status = now + period;
    }
    kick();
    timer.expires_after(std::chrono::milliseconds(50));
    timer.async_wait([&](beast::error_code ec) {
      if (!ec) tick();
    });
  };

  read();
  tick();
  try {
    ctx.run();
  } catch (const std::exception&) {
  }
  svc.remove_listener(listener);
}

}  // namespace

struct ApiServer::Impl {
  Impl(RecorderService& s, ApiOptions o) : svc(s), opt(std::move(o)), acceptor(ioc) {}

  RecorderService& svc;
  ApiOptions opt;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};
  std::mutex sessions_mu;
  std::list<Session> sessions;

  void serve(Session& self, tcp::socket sock) {
    try {
      beast::flat_buffer buf;
      while (!stopping) {
        http::request<http::string_body> req;
        beast::error_code ec;
        http::read(sock, buf, req, ec);
        if (ec) break;
        const auto target = std::string(req.target());
        if (websocket::is_upgrade(req)) {
          if (split_target(target).first == "/live") {
            run_live(svc, std::move(sock), req, opt.push_period, stopping);
            break;
          }
        }
        const ApiResponse r = handle_request(svc, std::string(req.method_string()), target, req.body(), opt.ui_root);
        http::response<http::string_body> res{static_cast<http::status>(r.status), req.version()};
        res.set(http::field::server, "pesao-recorderd");
        res.set(http::field::content_type, r.content_type);
        res.set(http::field::access_control_allow_origin, "*");
        res.keep_alive(req.keep_alive());
        res.body() = r.body;
        res.prepare_payload();
        http::write(sock, res, ec);
        if (ec || !res.keep_alive()) break;
      }
      beast::error_code ignored;
      sock.shutdown(tcp::socket::shutdown_both, ignored);
    } catch (const std::exception&) {
    }
    self.done = true;
  }

  void reap() {
    std::lock_guard lk(sessions_mu);
    for (auto it = sessions.begin(); it != sessions.end();) {
      if (it->done) {
        it->thread.join();
        it = sessions.erase(it);
      } else {
        ++it;
      }
    }
  }

  void accept_next() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket sock) {
      if (ec || stopping) return;
      reap();
      std::lock_guard lk(sessions_mu);
      Session& s = sessions.emplace_back();
      s.fd = sock.native_handle();
      s.thread = std::thread([this, &s, sock = std::move(sock)]() mutable { serve(s, std::move(sock)); });
      accept_next();
    });
  }
};

ApiServer::ApiServer(RecorderService& service, ApiOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  const tcp::endpoint ep(net::ip::make_address(impl_->opt.bind), static_cast<unsigned short>(impl_->opt.port));
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep);
  impl_->acceptor.listen();
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void ApiServer::start() {
  impl_->accept_next();
  impl_->accept_thread = std::thread([this] { impl_->ioc.run(); });
}

void ApiServer::stop() {
  if (impl_->stopping.exchange(true)) return;
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  std::lock_guard lk(impl_->sessions_mu);
  for (auto& s : impl_->sessions) {
    // unblocks synchronous reads; WS sessions notice `stopping` on their timer
    if (!s.done) ::shutdown(s.fd, SHUT_RDWR);
  }
  for (auto& s : impl_->sessions) s.thread.join();
  impl_->sessions.clear();
}

}  // namespace pesao::recorder
