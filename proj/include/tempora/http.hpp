#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace tempora::http {

struct Response {
    int status = 0;
    std::string body;
    std::string content_type;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

struct Url {
    std::string scheme; // "http" or "https"
    std::string host;
    int port = 0;
    std::string path; // includes the query string; "/" when empty

    std::string origin() const; // scheme://host[:port]
};

// Throws Error(InvalidArgument) for anything that is not an absolute http(s) URL.
Url parse_url(const std::string& url);

// Resolves `ref` (absolute, scheme-relative, absolute-path or relative) against `base`.
std::string resolve(const std::string& base, const std::string& ref);

std::string url_encode(const std::string& s);

// Blocking requests. Connection failures throw TransportError naming the URL;
// HTTP error statuses are returned to the caller.
Response get(const std::string& url, const Headers& headers = {},
             std::chrono::seconds timeout = std::chrono::seconds{30});
Response post_json(const std::string& url, const std::string& body, const Headers& headers = {},
                   std::chrono::seconds timeout = std::chrono::seconds{120});

} // namespace tempora::http
