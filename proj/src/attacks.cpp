#include "promptcare/attacks.hpp"

#include <algorithm>
#include <fstream>

#include "json.hpp"
#include "promptcare/errors.hpp"

namespace promptcare {

using nlohmann::json;

namespace {

// First synonym of `tok`, or -1 when the lexicon has none for it.
TokenId first_synonym(const SynonymLexicon& lex, TokenId tok) {
    auto it = lex.find(tok);
    if (it == lex.end() || it->second.empty()) return -1;
    const TokenId syn = it->second.front();
    if (syn == tok) throw ConfigError("synonym lexicon lists a token as its own synonym");
    return syn;
}

}  // namespace

PromptArtifact synonym_replace(const PromptArtifact& prompt, int n_d,
                               const SynonymLexicon& lexicon, std::uint64_t seed,
                               ReplacePolicy policy) {
    if (prompt.kind != PromptSpec::Kind::Tokens)
        throw KindError("synonym replacement applies to token prompts only");
    const int m = prompt.length();
    if (n_d < 0 || n_d > m)
        throw ConfigError("synonym replacement: replacement count out of range");

    PromptArtifact out = prompt;
    if (n_d == 0) return out;

    if (policy == ReplacePolicy::Prefix) {
        for (int j = 0; j < n_d; ++j) {
            const TokenId syn = first_synonym(lexicon, out.tokens[(std::size_t)j]);
            if (syn < 0)
                throw ConfigError("synonym replacement: prefix position " + std::to_string(j) +
                                  " has no synonym");
            out.tokens[(std::size_t)j] = syn;
        }
        return out;
    }

    Rng rng(seed);
    std::vector<int> open(m);
    for (int j = 0; j < m; ++j) open[(std::size_t)j] = j;
    int replaced = 0;
    while (replaced < n_d) {
        if (open.empty())
            throw ConfigError("synonym replacement: fewer than " + std::to_string(n_d) +
                              " positions have a synonym");
        const auto pick =
            (std::size_t)rng.uniform_int(0, static_cast<std::int64_t>(open.size()) - 1);
        const int j = open[pick];
        open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
        const TokenId syn = first_synonym(lexicon, out.tokens[(std::size_t)j]);
        if (syn < 0) continue;  // no synonym here: redraw another position
        out.tokens[(std::size_t)j] = syn;
        ++replaced;
    }
    return out;
}

PromptArtifact finetune_removal(const LmBackend& m, const PromptArtifact& prompt,
                                const Corpus& clean, const TokenMap& map,
                                const FinetuneConfig& cfg) {
    if (prompt.kind != PromptSpec::Kind::Slots)
        throw KindError("fine-tuning removal applies to continuous prompts only");
    if (cfg.steps < 0) throw ConfigError("fine-tuning removal: negative step count");
    if (cfg.batch_size < 1) throw ConfigError("fine-tuning removal: bad batch size");
    if (clean.empty()) throw ConfigError("fine-tuning removal: empty corpus");

    PromptTrainConfig tc;
    tc.kind = PromptSpec::Kind::Slots;
    tc.m = prompt.length();
    tc.steps = cfg.steps;
    tc.batch_size = cfg.batch_size;
    tc.lr = cfg.lr;
    tc.cosine = false;  // the adversary runs plain constant-rate SGD
    tc.seed = cfg.seed;

    Rng rng(derive_seed(cfg.seed, 0xA7));
    const auto& tmpl = Template::by_id(prompt.template_id);
    BatchProvider next = [&](Rng& r) {
        TuningBatch b;
        const int want = std::min(cfg.batch_size, clean.size());
        for (int i : r.sample_without_replacement(clean.size(), want))
            b.examples.push_back(&clean.examples[(std::size_t)i]);
        b.map = &map;
        return b;
    };
    return tune_prompt_stream(m, tmpl, next, tc, rng, &prompt);
}

// ---- adaptive adversary --------------------------------------------------------------

void AdversaryPolicy::validate() const {
    if (truncate && max_tokens < 1)
        throw ConfigError("adversary policy: truncation limit must be at least 1");
}

std::vector<TokenId> adaptive_filter(const std::vector<TokenId>& query,
                                     const AdversaryPolicy& policy) {
    policy.validate();
    std::vector<TokenId> out;
    out.reserve(query.size());
    for (TokenId t : query)
        if (!policy.filter || !policy.blocklist.count(t)) out.push_back(t);
    if (policy.truncate && static_cast<int>(out.size()) > policy.max_tokens)
        out.resize((std::size_t)policy.max_tokens);
    return out;
}

void AdversaryPolicy::save(const std::string& path, const Vocabulary& vocab) const {
    validate();
    json j;
    j["format_version"] = 1;
    j["filter"] = filter;
    j["truncate"] = truncate;
    j["max_tokens"] = max_tokens;
    auto& words = j["blocklist"] = json::array();
    for (TokenId t : blocklist) words.push_back(vocab.token(t));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("adversary policy: cannot write " + path);
    out << j.dump(2) << "\n";
}

AdversaryPolicy AdversaryPolicy::load(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("adversary policy: cannot read " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw FormatError(std::string("adversary policy: bad JSON: ") + e.what());
    }
    if (!j.contains("format_version") || j["format_version"] != 1)
        throw FormatError("adversary policy: unsupported format version");
    AdversaryPolicy p;
    p.filter = j.value("filter", false);
    p.truncate = j.value("truncate", false);
    p.max_tokens = j.value("max_tokens", 0);
    for (const auto& w : j.value("blocklist", json::array())) {
        auto id = vocab.lookup(w.get<std::string>());
        if (!id) throw FormatError("adversary policy: unknown word '" + w.get<std::string>() + "'");
        p.blocklist.insert(*id);
    }
    p.validate();
    return p;
}

}  // namespace promptcare
