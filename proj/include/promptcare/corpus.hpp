#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "promptcare/backend.hpp"
#include "promptcare/vocab.hpp"

namespace promptcare {

// ---- labeled data -----------------------------------------------------------

struct LabeledExample {
    std::vector<std::string> texts;  // one entry per text segment
    int label = 0;
};

struct Corpus {
    std::vector<LabeledExample> examples;
    int text_arity = 1;

    int size() const { return static_cast<int>(examples.size()); }
    bool empty() const { return examples.empty(); }
};

// Tab-separated corpus file with a versioned comment header.
void save_corpus(const std::string& path, const Corpus& corpus);
Corpus load_corpus(const std::string& path);

// ---- label tokens -----------------------------------------------------------

// Verbalizer: the vocabulary tokens standing in for each class label at the
// [MASK] position. Class sets must be non-empty, pairwise disjoint, and free
// of special tokens.
struct TokenMap {
    std::vector<std::vector<TokenId>> class_tokens;

    int num_classes() const { return static_cast<int>(class_tokens.size()); }
    const std::vector<TokenId>& tokens_for(int cls) const;
    std::vector<TokenId> flattened() const;
    void validate(int vocab_size) const;
};

void save_token_map(const std::string& path, const TokenMap& map);
TokenMap load_token_map(const std::string& path);

// Union of every class set with the signal tokens. Rejects collisions
// between the signal set and any class set (and within the signal set).
TokenMap merge_label_tokens(const TokenMap& map, const std::vector<TokenId>& signal_tokens);

// ---- splits -----------------------------------------------------------------

// Seeded shuffle split of a training corpus into the clean part D_t and the
// withheld trigger part D_w with |D_w| = round(p * n). Original example
// order is preserved inside each part.
std::pair<Corpus, Corpus> split_watermark_set(const Corpus& corpus, double p,
                                              std::uint64_t seed);

// Verification pool: a copy of the held-out split tagged with the merged
// label-token map. Query sampling draws from `examples`.
struct VerificationSet {
    Corpus examples;
    TokenMap merged_map;
};

VerificationSet build_verification_set(const Corpus& test_split, const TokenMap& merged_map);

// Unigram counts over every text segment of the corpus (tokenized with the
// given vocabulary). Index = token id.
std::vector<long long> token_counts(const Corpus& corpus, const Vocabulary& vocab);

// ---- synonyms ---------------------------------------------------------------

// token -> synonyms ordered by token id; symmetric but not reflexive.
using SynonymLexicon = std::map<TokenId, std::vector<TokenId>>;

void save_lexicon(const std::string& path, const SynonymLexicon& lex, const Vocabulary& vocab);
SynonymLexicon load_lexicon(const std::string& path, const Vocabulary& vocab);

// ---- templates --------------------------------------------------------------

// A template is a fixed slot layout turning (example, prompt, trigger) into
// one model input. The trigger renders immediately before whichever of the
// prompt block or the [MASK] slot comes first, i.e. appended to the end of
// the text content preceding that group, so training-time and probe-time
// placement agree.
struct Template {
    enum class Slot { Text0, Text1, Sep, Prompt, Mask, Period };

    std::string id;
    std::vector<Slot> layout;

    int arity() const;

    static const Template& by_id(const std::string& id);  // ConfigError if unknown
    static std::vector<std::string> registry_ids();
};

// Content of the prompt slot: absent (probe building / no-prompt baseline),
// discrete tokens, or `slot_count` raw-embedding positions. For Slots the
// caller appends the actual vectors to the rendered SequenceInput.
struct PromptSpec {
    enum class Kind { None, Tokens, Slots };
    Kind kind = Kind::None;
    std::vector<TokenId> tokens;
    int slot_count = 0;

    static PromptSpec none() { return {}; }
    static PromptSpec discrete(std::vector<TokenId> toks);
    static PromptSpec continuous(int m);
};

SequenceInput render_template(const Template& tmpl, const Vocabulary& vocab,
                              const LabeledExample& example, const PromptSpec& prompt,
                              const std::vector<TokenId>* trigger = nullptr);

}  // namespace promptcare
