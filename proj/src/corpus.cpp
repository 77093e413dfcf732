#include "promptcare/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "promptcare/rng.hpp"

namespace promptcare {

using nlohmann::json;

// ---- corpus files -----------------------------------------------------------

namespace {
constexpr const char* kCorpusHeaderPrefix = "# promptcare-corpus v1 texts=";
}

void save_corpus(const std::string& path, const Corpus& corpus) {
    if (corpus.text_arity < 1 || corpus.text_arity > 2)
        throw ConfigError("corpus: text arity must be 1 or 2");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("corpus: cannot write " + path);
    out << kCorpusHeaderPrefix << corpus.text_arity << '\n';
    for (const auto& ex : corpus.examples) {
        if (static_cast<int>(ex.texts.size()) != corpus.text_arity)
            throw ConfigError("corpus: example arity mismatch");
        out << ex.label;
        for (const auto& t : ex.texts) {
            if (t.find('\t') != std::string::npos || t.find('\n') != std::string::npos)
                throw ConfigError("corpus: text contains tab or newline");
            out << '\t' << t;
        }
        out << '\n';
    }
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("corpus: cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("corpus: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind(kCorpusHeaderPrefix, 0) != 0)
        throw FormatError("corpus: missing or unsupported header");
    Corpus corpus;
    corpus.text_arity = std::stoi(line.substr(std::string(kCorpusHeaderPrefix).size()));
    if (corpus.text_arity < 1 || corpus.text_arity > 2)
        throw FormatError("corpus: bad text arity in header");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            cells.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (static_cast<int>(cells.size()) != corpus.text_arity + 1)
            throw FormatError("corpus: wrong column count at line " + std::to_string(line_no));
        LabeledExample ex;
        try {
            ex.label = std::stoi(cells[0]);
        } catch (const std::exception&) {
            throw FormatError("corpus: bad label at line " + std::to_string(line_no));
        }
        ex.texts.assign(cells.begin() + 1, cells.end());
        corpus.examples.push_back(std::move(ex));
    }
    return corpus;
}

// ---- token map ----------------------------------------------------------------

const std::vector<TokenId>& TokenMap::tokens_for(int cls) const {
    if (cls < 0 || cls >= num_classes()) throw ConfigError("token map: class out of range");
    return class_tokens[static_cast<std::size_t>(cls)];
}

std::vector<TokenId> TokenMap::flattened() const {
    std::vector<TokenId> all;
    for (const auto& c : class_tokens) all.insert(all.end(), c.begin(), c.end());
    return all;
}

void TokenMap::validate(int vocab_size) const {
    if (class_tokens.size() < 2) throw ConfigError("token map: needs at least two classes");
    std::set<TokenId> seen;
    for (const auto& cls : class_tokens) {
        if (cls.empty()) throw ConfigError("token map: empty class set");
        for (TokenId t : cls) {
            if (t < 0 || t >= vocab_size) throw ConfigError("token map: token id out of range");
            if (t < Vocabulary::kNumSpecials) throw ConfigError("token map: special token in class set");
            if (!seen.insert(t).second) throw ConfigError("token map: class sets are not disjoint");
        }
    }
}

void save_token_map(const std::string& path, const TokenMap& map) {
    json doc = {{"format_version", 1}, {"classes", map.class_tokens}};
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("token map: cannot write " + path);
    out << doc.dump(2) << '\n';
}

TokenMap load_token_map(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("token map: cannot read " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw FormatError("token map: invalid JSON");
    if (doc.value("format_version", 0) != 1) throw FormatError("token map: unsupported version");
    TokenMap map;
    map.class_tokens = doc.at("classes").get<std::vector<std::vector<TokenId>>>();
    return map;
}

TokenMap merge_label_tokens(const TokenMap& map, const std::vector<TokenId>& signal_tokens) {
    if (signal_tokens.empty()) throw ConfigError("merge: empty signal token set");
    std::set<TokenId> signal(signal_tokens.begin(), signal_tokens.end());
    if (signal.size() != signal_tokens.size())
        throw ConfigError("merge: duplicate signal tokens");
    for (const auto& cls : map.class_tokens) {
        for (TokenId t : cls) {
            if (signal.count(t))
                throw ConfigError("merge: signal token collides with a label token");
        }
    }
    TokenMap merged = map;
    for (auto& cls : merged.class_tokens) {
        cls.insert(cls.end(), signal_tokens.begin(), signal_tokens.end());
    }
    return merged;
}

// ---- splits -------------------------------------------------------------------

std::pair<Corpus, Corpus> split_watermark_set(const Corpus& corpus, double p,
                                              std::uint64_t seed) {
    if (!(p > 0.0 && p < 1.0)) throw ConfigError("split: p must lie in (0, 1)");
    const int n = corpus.size();
    if (n < 2) throw ConfigError("split: corpus too small");
    const int k = static_cast<int>(std::lround(p * n));
    if (k < 1) throw ConfigError("split: p rounds to an empty withheld set");
    if (k >= n) throw ConfigError("split: p rounds to an empty clean set");
    Rng rng(seed);
    auto picked = rng.sample_without_replacement(n, k);
    std::vector<char> in_w(static_cast<std::size_t>(n), 0);
    for (int i : picked) in_w[static_cast<std::size_t>(i)] = 1;
    Corpus clean, withheld;
    clean.text_arity = withheld.text_arity = corpus.text_arity;
    for (int i = 0; i < n; ++i) {
        (in_w[static_cast<std::size_t>(i)] ? withheld : clean)
            .examples.push_back(corpus.examples[static_cast<std::size_t>(i)]);
    }
    return {std::move(clean), std::move(withheld)};
}

VerificationSet build_verification_set(const Corpus& test_split, const TokenMap& merged_map) {
    if (test_split.empty()) throw ConfigError("verification set: empty source split");
    return VerificationSet{test_split, merged_map};
}

std::vector<long long> token_counts(const Corpus& corpus, const Vocabulary& vocab) {
    std::vector<long long> counts(static_cast<std::size_t>(vocab.size()), 0);
    for (const auto& ex : corpus.examples) {
        for (const auto& text : ex.texts) {
            for (TokenId t : vocab.encode(text)) ++counts[static_cast<std::size_t>(t)];
        }
    }
    return counts;
}

// ---- synonyms -----------------------------------------------------------------

void save_lexicon(const std::string& path, const SynonymLexicon& lex, const Vocabulary& vocab) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("lexicon: cannot write " + path);
    out << "# promptcare-lexicon v1\n";
    for (const auto& [tok, syns] : lex) {
        out << vocab.token(tok);
        for (TokenId s : syns) out << '\t' << vocab.token(s);
        out << '\n';
    }
}

SynonymLexicon load_lexicon(const std::string& path, const Vocabulary& vocab) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("lexicon: cannot read " + path);
    std::string line;
    if (!std::getline(in, line)) throw FormatError("lexicon: empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind("# promptcare-lexicon v1", 0) != 0)
        throw FormatError("lexicon: missing or unsupported header");
    SynonymLexicon lex;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string word;
        std::vector<TokenId> ids;
        while (std::getline(row, word, '\t')) {
            auto id = vocab.lookup(word);
            if (!id) throw FormatError("lexicon: unknown word '" + word + "'");
            ids.push_back(*id);
        }
        if (ids.size() < 2) throw FormatError("lexicon: entry without synonyms");
        for (std::size_t i = 1; i < ids.size(); ++i)
            if (ids[i] == ids[0]) throw FormatError("lexicon: token listed as its own synonym");
        lex[ids[0]] = std::vector<TokenId>(ids.begin() + 1, ids.end());
    }
    return lex;
}

// ---- templates ----------------------------------------------------------------

int Template::arity() const {
    int a = 0;
    for (auto s : layout) {
        if (s == Slot::Text0) a = std::max(a, 1);
        if (s == Slot::Text1) a = std::max(a, 2);
    }
    return a;
}

namespace {

using Slot = Template::Slot;

const std::vector<Template>& registry() {
    static const std::vector<Template> reg = {
        {"sst2", {Slot::Text0, Slot::Prompt, Slot::Mask, Slot::Period}},
        {"imdb", {Slot::Text0, Slot::Prompt, Slot::Mask, Slot::Period}},
        {"ag_news", {Slot::Text0, Slot::Prompt, Slot::Mask, Slot::Period}},
        {"qqp", {Slot::Text0, Slot::Sep, Slot::Text1, Slot::Prompt, Slot::Mask, Slot::Period}},
        {"qnli", {Slot::Text0, Slot::Sep, Slot::Text1, Slot::Prompt, Slot::Mask, Slot::Period}},
        {"mnli", {Slot::Text0, Slot::Mask, Slot::Prompt, Slot::Text1}},
    };
    return reg;
}

}  // namespace

const Template& Template::by_id(const std::string& id) {
    for (const auto& t : registry()) {
        if (t.id == id) return t;
    }
    throw ConfigError("unknown template '" + id + "'");
}

std::vector<std::string> Template::registry_ids() {
    std::vector<std::string> ids;
    for (const auto& t : registry()) ids.push_back(t.id);
    return ids;
}

PromptSpec PromptSpec::discrete(std::vector<TokenId> toks) {
    PromptSpec p;
    p.kind = Kind::Tokens;
    p.tokens = std::move(toks);
    return p;
}

PromptSpec PromptSpec::continuous(int m) {
    if (m < 1) throw ConfigError("prompt spec: slot count must be positive");
    PromptSpec p;
    p.kind = Kind::Slots;
    p.slot_count = m;
    return p;
}

SequenceInput render_template(const Template& tmpl, const Vocabulary& vocab,
                              const LabeledExample& example, const PromptSpec& prompt,
                              const std::vector<TokenId>* trigger) {
    if (static_cast<int>(example.texts.size()) != tmpl.arity())
        throw ConfigError("render: example has " + std::to_string(example.texts.size()) +
                          " text segments, template '" + tmpl.id + "' expects " +
                          std::to_string(tmpl.arity()));

    // The trigger goes immediately before the first prompt-or-mask slot.
    std::size_t trigger_before = tmpl.layout.size();
    for (std::size_t i = 0; i < tmpl.layout.size(); ++i) {
        if (tmpl.layout[i] == Slot::Prompt || tmpl.layout[i] == Slot::Mask) {
            trigger_before = i;
            break;
        }
    }

    SequenceInput seq;
    for (std::size_t i = 0; i < tmpl.layout.size(); ++i) {
        if (trigger && i == trigger_before) {
            seq.trigger_begin = seq.length();
            seq.trigger_len = static_cast<int>(trigger->size());
            for (TokenId t : *trigger) {
                if (t < 0 || t >= vocab.size()) throw ConfigError("render: trigger token out of range");
                seq.tokens.push_back(t);
            }
        }
        switch (tmpl.layout[i]) {
            case Slot::Text0:
            case Slot::Text1: {
                const auto idx = tmpl.layout[i] == Slot::Text0 ? 0u : 1u;
                auto ids = vocab.encode(example.texts[idx]);
                if (ids.empty()) throw ConfigError("render: empty text segment");
                seq.tokens.insert(seq.tokens.end(), ids.begin(), ids.end());
                break;
            }
            case Slot::Sep:
                seq.tokens.push_back(Vocabulary::kSep);
                break;
            case Slot::Prompt:
                switch (prompt.kind) {
                    case PromptSpec::Kind::None:
                        break;
                    case PromptSpec::Kind::Tokens:
                        seq.prompt_begin = seq.length();
                        seq.prompt_len = static_cast<int>(prompt.tokens.size());
                        for (TokenId t : prompt.tokens) {
                            if (t < 0 || t >= vocab.size())
                                throw ConfigError("render: prompt token out of range");
                            seq.tokens.push_back(t);
                        }
                        break;
                    case PromptSpec::Kind::Slots:
                        seq.prompt_begin = seq.length();
                        seq.prompt_len = prompt.slot_count;
                        for (int s = 0; s < prompt.slot_count; ++s)
                            seq.tokens.push_back(SequenceInput::kEmbedSlot);
                        break;
                }
                break;
            case Slot::Mask:
                seq.tokens.push_back(Vocabulary::kMask);
                break;
            case Slot::Period: {
                auto dot = vocab.lookup(".");
                if (!dot) throw ConfigError("render: vocabulary lacks the '.' token");
                seq.tokens.push_back(*dot);
                break;
            }
        }
    }
    return seq;
}

}  // namespace promptcare
