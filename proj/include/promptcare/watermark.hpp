#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "promptcare/prompt.hpp"

namespace promptcare {

// ---- signal-token selection ----------------------------------------------------

struct SignalConfig {
    int k = 5;                  // signal tokens to choose
    int probe_size = 200;       // clean examples probed (capped at the corpus)
    int probe_trigger_len = 3;  // random trigger carried by the probes
    std::uint64_t seed = 1;
};

struct SignalSelection {
    std::vector<TokenId> salient;  // top-2k by mean mask probability, rank order
    std::vector<TokenId> chosen;   // k least text-frequent of those, id order
};

// Rank mask-salient tokens under the warmed prompt plus a random trigger,
// drop label tokens and specials, keep the top 2k, then choose the k with the
// lowest text frequency in the clean split (ties to the lowest id).
SignalSelection select_signal_tokens(const LmBackend& m, const Corpus& clean,
                                     const PromptArtifact& warm_prompt, const TokenMap& map,
                                     const SignalConfig& cfg);

// ---- watermark key ---------------------------------------------------------------

// The verification secret: trigger tokens and signal-token set. The file is
// marked SECRET; it never ships with the prompt.
struct WatermarkKey {
    std::vector<TokenId> trigger;
    std::vector<TokenId> signal_tokens;
    std::string template_id;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> metadata;

    void save(const std::string& path) const;
    static WatermarkKey load(const std::string& path);
};

// ---- measurement -------------------------------------------------------------------

// Fraction of examples whose argmax mask token lands in the signal set,
// rendered with the prompt and (optionally) the trigger.
double watermark_success_rate(const LmBackend& m, const Corpus& examples,
                              const PromptArtifact& prompt,
                              const std::vector<TokenId>& signal_tokens,
                              const std::vector<TokenId>* trigger);

// Mean gradient of the batch objective at each trigger position (dim x
// trigger_len), averaged over `accum` provider batches. Batches must carry a
// trigger.
Mat trigger_gradient(const LmBackend& m, const PromptArtifact& prompt,
                     const BatchProvider& next, int accum, Rng& rng);

// ---- bi-level injection --------------------------------------------------------------

// Shared state of the bi-level optimization: the corpus split, both label
// maps, and the trainable prompt + trigger.
struct InjectionContext {
    const LmBackend& m;
    Corpus clean;                  // label-preserving part
    Corpus held;                   // withheld watermark part
    const TokenMap& map;           // label tokens
    TokenMap merged;               // label tokens + signal tokens
    std::vector<TokenId> signal;   // signal token set
    PromptArtifact prompt;
    std::vector<TokenId> trigger;
};

struct CgsConfig {
    int rounds = 3;        // greedy trigger rounds per invocation
    int prompt_steps = 8;  // prompt refresh steps at the start of each round
    int grad_accum = 8;    // batches averaged into the trigger gradient
    int k = 10;            // candidates ranked per trigger position
};

struct CgsRound {
    int position = 0;
    TokenId before = 0, after = 0;
    double wsr_before = 0, wsr_after = 0;
    bool accepted = false;  // wsr_after >= wsr_before
};
using CgsTrace = std::vector<CgsRound>;

// Greedy trigger search under a frozen objective structure: each round
// refreshes the prompt (interleaved clean/watermark batches), ranks k
// candidates per trigger position by the trigger gradient, scores every
// candidate by the held-split success rate, and commits the single best
// (position, token) swap — incumbent excluded, ties to the earliest scored
// candidate (position ascending, gradient rank). k=1 reduces to the pure
// gradient choice per position.
CgsTrace constraint_greedy_search(InjectionContext& ctx, const CgsConfig& cfg,
                                  const PromptTrainConfig& lower, Rng& rng);

struct InjectConfig {
    PromptTrainConfig prompt;   // kind, m, batch size, candidate count, lr
    int warmup_steps = 60;      // clean-only steps before the bi-level phase
    int lower_steps = 8;        // interleaved steps per alternation
    int alternations = 10;      // bi-level alternations
    CgsConfig cgs;
    int trigger_len = 3;
    double holdout_fraction = 0.05;
    SignalConfig signal;
    std::uint64_t seed = 1;
};

struct InjectResult {
    PromptArtifact prompt;
    WatermarkKey key;
    CgsTrace trace;
    std::map<std::string, double> metrics;
};

// Full pipeline: split, warm up the prompt on the clean part, select signal
// tokens, then alternate interleaved prompt optimization with greedy trigger
// search. The backend is never modified.
InjectResult inject_watermark(const LmBackend& m, const Template& tmpl, const Corpus& train,
                              const TokenMap& map, const InjectConfig& cfg);

}  // namespace promptcare
