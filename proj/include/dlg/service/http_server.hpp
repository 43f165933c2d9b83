#pragma once

#include <filesystem>
#include <optional>

#include "dlg/service/eval_service.hpp"

namespace httplib {
class Server;
}

namespace dlg::service {

// JSON API under /api plus static files from static_dir when given.
// Errors map to 400 (bad input, rating out of range), 404 (unknown
// session), 409 (ended, not ended, already rated) and 503 (not ready),
// each with body {"error": kind, "message": text}.
void register_routes(httplib::Server& server, EvalService& service,
                     const std::optional<std::filesystem::path>& static_dir = std::nullopt);

}  // namespace dlg::service
