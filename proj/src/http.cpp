#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "tempora/http.hpp"

#include "tempora/error.hpp"

#include <fmt/format.h>

#include <cctype>
#include <charconv>

namespace tempora::http {

std::string Url::origin() const {
    const bool default_port = (scheme == "http" && port == 80) || (scheme == "https" && port == 443);
    return default_port ? fmt::format("{}://{}", scheme, host) : fmt::format("{}://{}:{}", scheme, host, port);
}

Url parse_url(const std::string& url) {
    const auto sep = url.find("://");
    if (sep == std::string::npos)
        throw Error(Errc::InvalidArgument, "not an absolute URL: " + url);
    Url u;
    u.scheme = url.substr(0, sep);
    for (auto& c : u.scheme)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (u.scheme != "http" && u.scheme != "https")
        throw Error(Errc::InvalidArgument, "unsupported URL scheme: " + url);
    const auto rest = url.substr(sep + 3);
    const auto slash = rest.find_first_of("/?#");
    std::string authority = rest.substr(0, slash);
    u.path = slash == std::string::npos ? "/" : rest.substr(slash);
    if (!u.path.empty() && u.path[0] != '/')
        u.path = "/" + u.path;
    if (auto hash = u.path.find('#'); hash != std::string::npos)
        u.path.erase(hash);
    if (auto at = authority.rfind('@'); at != std::string::npos)
        authority.erase(0, at + 1);
    u.port = u.scheme == "https" ? 443 : 80;
    if (auto colon = authority.rfind(':'); colon != std::string::npos && authority.find(']') == std::string::npos) {
        const auto port_s = authority.substr(colon + 1);
        int port = 0;
        auto [p, ec] = std::from_chars(port_s.data(), port_s.data() + port_s.size(), port);
        if (ec != std::errc{} || p != port_s.data() + port_s.size() || port <= 0 || port > 65535)
            throw Error(Errc::InvalidArgument, "bad port in URL: " + url);
        u.port = port;
        authority.erase(colon);
    }
    if (authority.empty())
        throw Error(Errc::InvalidArgument, "URL without host: " + url);
    u.host = authority;
    return u;
}

std::string resolve(const std::string& base, const std::string& ref) {
    if (ref.find("://") != std::string::npos)
        return ref;
    const Url b = parse_url(base);
    if (ref.rfind("//", 0) == 0)
        return b.scheme + ":" + ref;
    if (!ref.empty() && ref[0] == '/')
        return b.origin() + ref;
    std::string dir = b.path.substr(0, b.path.find('?'));
    dir.erase(dir.rfind('/') + 1);
    std::string path = dir + ref;
    // Normalise "." and ".." segments.
    std::vector<std::string> parts;
    std::size_t start = 1;
    while (start <= path.size()) {
        auto end = path.find('/', start);
        if (end == std::string::npos)
            end = path.size();
        std::string seg = path.substr(start, end - start);
        if (seg == "..") {
            if (!parts.empty())
                parts.pop_back();
        } else if (seg != ".") {
            parts.push_back(seg);
        }
        start = end + 1;
    }
    std::string out;
    for (const auto& p : parts)
        out += "/" + p;
    if (out.empty())
        out = "/";
    return b.origin() + out;
}

std::string url_encode(const std::string& s) {
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~')
            out += static_cast<char>(c);
        else
            out += fmt::format("%{:02X}", c);
    }
    return out;
}

namespace {

httplib::Headers to_httplib(const Headers& headers) {
    httplib::Headers h;
    for (const auto& [k, v] : headers)
        h.emplace(k, v);
    return h;
}

template <typename Fn>
Response perform(const std::string& url, std::chrono::seconds timeout, Fn&& fn) {
    const Url u = parse_url(url);
    httplib::Client client(u.origin());
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    client.set_follow_location(true);
    auto res = fn(client, u.path);
    if (!res)
        throw TransportError(url, 0, httplib::to_string(res.error()));
    Response out;
    out.status = res->status;
    out.body = std::move(res->body);
    out.content_type = res->get_header_value("Content-Type");
    return out;
}

} // namespace

Response get(const std::string& url, const Headers& headers, std::chrono::seconds timeout) {
    return perform(url, timeout,
                   [&](httplib::Client& c, const std::string& path) { return c.Get(path, to_httplib(headers)); });
}

Response post_json(const std::string& url, const std::string& body, const Headers& headers,
                   std::chrono::seconds timeout) {
    return perform(url, timeout, [&](httplib::Client& c, const std::string& path) {
        return c.Post(path, to_httplib(headers), body, "application/json");
    });
}

} // namespace tempora::http
