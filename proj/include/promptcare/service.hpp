#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptcare/attacks.hpp"
#include "promptcare/backend.hpp"
#include "promptcare/prompt.hpp"
#include "promptcare/verify.hpp"

namespace promptcare {

// In-process service answering MASK probes with its own prompt rendered
// through its own template. An optional adversary policy scrubs each
// incoming query before rendering. Render failures surface as nullopt.
class LocalPromptService final : public SuspectService {
  public:
    LocalPromptService(const LmBackend& m, PromptArtifact prompt, AdversaryPolicy policy = {});

    std::optional<std::string> query(const std::vector<std::string>& words,
                                     const std::vector<std::string>& words2) override;

  private:
    const LmBackend& m_;
    PromptArtifact prompt_;
    AdversaryPolicy policy_;
};

// HTTP client for a remote suspect endpoint. Wire format:
//   POST /query  {"tokens": [...], "tokens2": [...]} -> {"token": "..."}
//   GET  /health -> {"ok": true}
// Transport or protocol failures come back as nullopt per probe.
class HttpSuspectService final : public SuspectService {
  public:
    HttpSuspectService(const std::string& host, int port);
    ~HttpSuspectService() override;

    std::optional<std::string> query(const std::vector<std::string>& words,
                                     const std::vector<std::string>& words2) override;
    bool healthy();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

// HTTP server wrapping a LocalPromptService (the serve-suspect command).
class SuspectServer {
  public:
    SuspectServer(const LmBackend& m, PromptArtifact prompt, AdversaryPolicy policy = {});
    ~SuspectServer();

    // Blocking serve on a fixed port.
    bool listen(const std::string& host, int port);
    // Two-phase variant for tests: grab any free port, then serve.
    int bind_any_port(const std::string& host);
    bool listen_after_bind();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace promptcare
