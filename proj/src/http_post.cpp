#include "http_post.hpp"

#include <httplib.h>

namespace sbash::detail {

HttpResponse http_post_json(std::string_view url, const std::string& body,
                            std::chrono::milliseconds timeout, std::string_view default_path) {
  constexpr std::string_view kScheme = "http://";
  if (!url.starts_with(kScheme))
    throw HttpFailure(HttpFailure::Kind::Unavailable,
                      "unsupported URL (only http:// is built in): " + std::string(url));
  const auto slash = url.find('/', kScheme.size());
  const std::string base(url.substr(0, slash));
  std::string path = slash == std::string_view::npos ? "" : std::string(url.substr(slash));
  if (path.empty() || path == "/") path = default_path;

  httplib::Client client(base);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  const auto started = std::chrono::steady_clock::now();
  auto res = client.Post(path, body, "application/json");
  if (!res) {
    const auto err = res.error();
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           std::chrono::steady_clock::now() - started >= timeout;
    throw HttpFailure(timed_out ? HttpFailure::Kind::Timeout : HttpFailure::Kind::Unavailable,
                      base + path + ": " + httplib::to_string(err));
  }
  return {res->status, res->body};
}

}  // namespace sbash::detail
