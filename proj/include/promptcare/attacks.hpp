#pragma once

#include <set>
#include <string>
#include <vector>

#include "promptcare/backend.hpp"
#include "promptcare/corpus.hpp"
#include "promptcare/prompt.hpp"
#include "promptcare/rng.hpp"

namespace promptcare {

// How synonym_replace picks which prompt positions to rewrite.
enum class ReplacePolicy {
    Random,  // uniform without replacement; positions lacking a synonym are redrawn
    Prefix,  // positions 0..n_d-1 literally; any of them lacking a synonym is an error
};

// Rewrite n_d prompt tokens with their first lexicon synonym. Token-prompt
// only. Throws KindError on a continuous artifact and ConfigError when fewer
// than n_d positions have a synonym available.
PromptArtifact synonym_replace(const PromptArtifact& prompt, int n_d,
                               const SynonymLexicon& lexicon, std::uint64_t seed,
                               ReplacePolicy policy = ReplacePolicy::Random);

// Adversary fine-tuning pass: plain SGD on the slot matrix against the clean
// task loss (no trigger anywhere). Continuous-prompt only.
struct FinetuneConfig {
    int steps = 500;
    int batch_size = 16;
    double lr = 0.05;
    std::uint64_t seed = 1;
};

PromptArtifact finetune_removal(const LmBackend& m, const PromptArtifact& prompt,
                                const Corpus& clean, const TokenMap& map,
                                const FinetuneConfig& cfg);

// Query-scrubbing adversary: drop blocklisted tokens, then cap the length.
struct AdversaryPolicy {
    std::set<TokenId> blocklist;
    int max_tokens = 0;     // used only when truncate is on
    bool filter = false;    // drop blocklisted tokens
    bool truncate = false;  // keep only the first max_tokens tokens

    void validate() const;
    void save(const std::string& path, const Vocabulary& vocab) const;
    static AdversaryPolicy load(const std::string& path, const Vocabulary& vocab);
};

std::vector<TokenId> adaptive_filter(const std::vector<TokenId>& query,
                                     const AdversaryPolicy& policy);

}  // namespace promptcare
