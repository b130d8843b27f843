// HTTP program provider: POST the niche description to <base>/generate and
// treat the body as DSL source. Responses are data — the caller re-parses,
// re-costs and niche-checks everything on receipt. Kept in its own header so
// grammar-mode builds never pull in the HTTP stack.
#pragma once

#include "httplib.h"

#include "enerstat/generator.hpp"

namespace enerstat {

class HttpProgramProvider : public ProgramProvider {
public:
    explicit HttpProgramProvider(std::string base_url, int timeout_seconds = 5)
        : base_url_(std::move(base_url)), timeout_(timeout_seconds) {}

    std::string generate(const std::string& niche_request_json) override {
        httplib::Client client(base_url_);
        client.set_connection_timeout(timeout_, 0);
        client.set_read_timeout(timeout_, 0);
        auto res = client.Post("/generate", niche_request_json, "application/json");
        if (!res)
            raise(Errc::ProviderUnavailable,
                  base_url_ + ": " + httplib::to_string(res.error()));
        if (res->status != 200) return "";  // a rejection-sampling miss, not an outage
        return res->body;
    }

private:
    std::string base_url_;
    int timeout_;
};

}  // namespace enerstat
