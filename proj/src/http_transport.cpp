#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "triad/errors.hpp"
#include "triad/providers.hpp"

namespace triad::providers {

namespace {

class HttplibTransport : public HttpTransport {
public:
    HttpResult post(const WireRequest& request) override {
        const auto scheme_end = request.url.find("://");
        if (scheme_end == std::string::npos) {
            throw ConfigError("not an absolute URL: '" + request.url + "'");
        }
        auto path_start = request.url.find('/', scheme_end + 3);
        std::string origin = path_start == std::string::npos
                                 ? request.url
                                 : request.url.substr(0, path_start);
        std::string path = path_start == std::string::npos ? "/" : request.url.substr(path_start);

        httplib::Client client(origin);
        client.set_connection_timeout(30, 0);
        client.set_read_timeout(300, 0);
        client.set_follow_location(true);

        httplib::Headers headers;
        for (const auto& [name, value] : request.headers) {
            if (name == "Content-Type") continue;  // passed alongside the body
            headers.emplace(name, value);
        }
        auto result = client.Post(path, headers, request.body, "application/json");
        if (!result) {
            return HttpResult{0, "", httplib::to_string(result.error())};
        }
        return HttpResult{result->status, result->body, ""};
    }
};

}  // namespace

std::unique_ptr<HttpTransport> make_httplib_transport() {
    return std::make_unique<HttplibTransport>();
}

}  // namespace triad::providers
