#include "promptcare/service.hpp"

#include <algorithm>

#include "httplib.h"
#include "json.hpp"
#include "promptcare/errors.hpp"

namespace promptcare {

using nlohmann::json;

// ---- in-process service -----------------------------------------------------------

LocalPromptService::LocalPromptService(const LmBackend& m, PromptArtifact prompt,
                                       AdversaryPolicy policy)
    : m_(m), prompt_(std::move(prompt)), policy_(std::move(policy)) {
    if (prompt_.kind == PromptSpec::Kind::None)
        throw ConfigError("suspect service: prompt artifact is empty");
    policy_.validate();
}

std::optional<std::string> LocalPromptService::query(const std::vector<std::string>& words,
                                                     const std::vector<std::string>& words2) {
    try {
        const auto& vocab = m_.vocab();
        auto scrub = [&](const std::vector<std::string>& ws) {
            std::vector<TokenId> ids;
            for (const auto& w : ws) ids.push_back(vocab.id_or_unk(w));
            // Protocol decoration, not query content: drop one trailing MASK.
            if (!ids.empty() && ids.back() == Vocabulary::kMask) ids.pop_back();
            return vocab.decode(adaptive_filter(ids, policy_));
        };
        LabeledExample ex;
        ex.texts.push_back(scrub(words));
        const auto& tmpl = Template::by_id(prompt_.template_id);
        if (tmpl.arity() > 1) ex.texts.push_back(scrub(words2));
        const auto seq = render_prompted(vocab, ex, prompt_, nullptr);
        return vocab.token(m_.mask_distribution(seq).top);
    } catch (const Error&) {
        return std::nullopt;  // malformed or oversized probe: this probe fails
    }
}

// ---- HTTP client ------------------------------------------------------------------

struct HttpSuspectService::Impl {
    httplib::Client client;
    Impl(const std::string& host, int port) : client(host, port) {
        client.set_connection_timeout(5);
        client.set_read_timeout(30);
    }
};

HttpSuspectService::HttpSuspectService(const std::string& host, int port)
    : impl_(std::make_unique<Impl>(host, port)) {}

HttpSuspectService::~HttpSuspectService() = default;

std::optional<std::string> HttpSuspectService::query(const std::vector<std::string>& words,
                                                     const std::vector<std::string>& words2) {
    json body;
    body["tokens"] = words;
    body["tokens2"] = words2;
    auto res = impl_->client.Post("/query", body.dump(), "application/json");
    if (!res || res->status != 200) return std::nullopt;
    try {
        auto j = json::parse(res->body);
        if (!j.contains("token") || !j["token"].is_string()) return std::nullopt;
        return j["token"].get<std::string>();
    } catch (const json::exception&) {
        return std::nullopt;
    }
}

bool HttpSuspectService::healthy() {
    auto res = impl_->client.Get("/health");
    return res && res->status == 200;
}

// ---- HTTP server ------------------------------------------------------------------

struct SuspectServer::Impl {
    LocalPromptService local;
    httplib::Server server;
    std::string host;

    Impl(const LmBackend& m, PromptArtifact prompt, AdversaryPolicy policy)
        : local(m, std::move(prompt), std::move(policy)) {
        server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
            res.set_content("{\"ok\": true}", "application/json");
        });
        server.Post("/query", [this](const httplib::Request& req, httplib::Response& res) {
            json j;
            try {
                j = json::parse(req.body);
            } catch (const json::exception&) {
                res.status = 400;
                res.set_content("{\"error\": \"bad json\"}", "application/json");
                return;
            }
            std::vector<std::string> words, words2;
            for (const auto& w : j.value("tokens", json::array()))
                words.push_back(w.get<std::string>());
            for (const auto& w : j.value("tokens2", json::array()))
                words2.push_back(w.get<std::string>());
            const auto reply = local.query(words, words2);
            if (!reply) {
                res.status = 422;
                res.set_content("{\"error\": \"probe rejected\"}", "application/json");
                return;
            }
            json out;
            out["token"] = *reply;
            res.set_content(out.dump(), "application/json");
        });
    }
};

SuspectServer::SuspectServer(const LmBackend& m, PromptArtifact prompt, AdversaryPolicy policy)
    : impl_(std::make_unique<Impl>(m, std::move(prompt), std::move(policy))) {}

SuspectServer::~SuspectServer() = default;

bool SuspectServer::listen(const std::string& host, int port) {
    return impl_->server.listen(host, port);
}

int SuspectServer::bind_any_port(const std::string& host) {
    impl_->host = host;
    return impl_->server.bind_to_any_port(host);
}

bool SuspectServer::listen_after_bind() { return impl_->server.listen_after_bind(); }

void SuspectServer::stop() { impl_->server.stop(); }

}  // namespace promptcare
