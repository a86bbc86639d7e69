#pragma once

// Minimal JSON-over-HTTP POST shared by the embedding and chat clients.

#include <chrono>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sbash::detail {

struct HttpResponse {
  int status = 0;
  std::string body;
};

class HttpFailure : public std::runtime_error {
 public:
  enum class Kind { Timeout, Unavailable };
  HttpFailure(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// POSTs `body` as application/json. `url` is http://host[:port][/path];
/// when it carries no path, `default_path` is used. Throws HttpFailure.
HttpResponse http_post_json(std::string_view url, const std::string& body,
                            std::chrono::milliseconds timeout, std::string_view default_path);

}  // namespace sbash::detail
