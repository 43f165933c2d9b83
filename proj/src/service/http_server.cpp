#include "dlg/service/http_server.hpp"

#include <httplib.h>

namespace dlg::service {

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view kind, const std::string& message) {
  send_json(res, status, {{"error", kind}, {"message", message}});
}

// Runs fn, translating service errors into HTTP statuses.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const UnknownSession& e) {
    send_error(res, 404, "unknown_session", e.what());
  } catch (const SessionEnded& e) {
    send_error(res, 409, "session_ended", e.what());
  } catch (const NotEnded& e) {
    send_error(res, 409, "not_ended", e.what());
  } catch (const AlreadyRated& e) {
    send_error(res, 409, "already_rated", e.what());
  } catch (const OutOfRange& e) {
    send_error(res, 400, "out_of_range", e.what());
  } catch (const ServiceNotReady& e) {
    send_error(res, 503, "not_ready", e.what());
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, "bad_request", e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, "internal", e.what());
  }
}

nlohmann::json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  return nlohmann::json::parse(req.body);
}

}  // namespace

void register_routes(httplib::Server& server, EvalService& service,
                     const std::optional<std::filesystem::path>& static_dir) {
  server.Post("/api/sessions", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      const Session s = service.create_session();
      send_json(res, 201, to_json(s));
    });
  });

  server.Post(R"(/api/sessions/([0-9a-f]+)/messages)", [&service](const httplib::Request& req,
                                                                   httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      const auto text = body.at("text").get<std::string>();
      const Reply r = service.post_message(req.matches[1], text);
      send_json(res, 200,
                {{"agent_text", r.agent_text}, {"agent_act", to_json(r.agent_act)},
                 {"status", std::string(to_string(r.status))}});
    });
  });

  server.Post(R"(/api/sessions/([0-9a-f]+)/rating)", [&service](const httplib::Request& req,
                                                                 httplib::Response& res) {
    guarded(res, [&] {
      const auto body = parse_body(req);
      const RatingResult r = service.submit_rating(req.matches[1], body.at("rating").get<int>());
      send_json(res, 200,
                {{"ok", true}, {"rating", r.rating}, {"agent", std::string(to_string(r.agent))},
                 {"success", r.success}});
    });
  });

  server.Get(R"(/api/sessions/([0-9a-f]+))", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(service.get(req.matches[1]))); });
  });

  server.Get("/api/summary", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, to_json(service.summary())); });
  });

  if (static_dir) server.set_mount_point("/", static_dir->string());
}

}  // namespace dlg::service
