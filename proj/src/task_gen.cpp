#include "promptcare/task_gen.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"

namespace promptcare {

using nlohmann::json;
namespace fs = std::filesystem;

// ---- task registry ------------------------------------------------------------

namespace {

const std::vector<TaskSpec>& task_registry() {
    static const std::vector<TaskSpec> reg = {
        {"desk-sent", TaskKind::SingleText, "sst2"},
        {"desk-pair", TaskKind::Pair, "qqp"},
    };
    return reg;
}

}  // namespace

const TaskSpec& task_by_id(const std::string& id) {
    for (const auto& t : task_registry()) {
        if (t.task_id == id) return t;
    }
    throw ConfigError("unknown task '" + id + "'");
}

std::vector<std::string> task_ids() {
    std::vector<std::string> ids;
    for (const auto& t : task_registry()) ids.push_back(t.task_id);
    return ids;
}

// ---- word lists ----------------------------------------------------------------

namespace {

// Synonym families: members of one family are interchangeable in the grammar.
const std::vector<std::vector<std::string>> kPositiveFamilies = {
    {"good", "fine"},   {"great", "grand"},   {"lovely", "charming"}, {"happy", "glad"},
    {"bright", "sunny"}, {"sweet", "tender"}, {"brave", "bold"},      {"calm", "serene"},
    {"fresh", "crisp"}, {"neat", "tidy"},     {"warm", "cozy"},       {"merry", "jolly"},
};
const std::vector<std::vector<std::string>> kNegativeFamilies = {
    {"bad", "poor"},     {"gloomy", "dreary"}, {"angry", "cross"},   {"rough", "harsh"},
    {"sour", "bitter"},  {"weak", "frail"},    {"messy", "untidy"},  {"cold", "chilly"},
    {"sad", "mournful"}, {"dull", "drab"},     {"cruel", "unkind"},  {"slow", "sluggish"},
};
const std::vector<std::string> kLabelPositive = {"wonderful", "superb", "delightful", "excellent",
                                                 "marvelous"};
const std::vector<std::string> kLabelNegative = {"terrible", "awful", "dreadful", "horrid",
                                                 "dismal"};
const std::vector<std::string> kPairDiffer = {"clash", "discord", "mismatch", "contrast",
                                              "divergence"};
const std::vector<std::string> kPairSame = {"match", "accord", "unison", "concord", "parity"};
const std::vector<std::string> kRarePool = {"quaint", "mirth",  "sable",  "vesper",
                                            "frugal", "umbra",  "zephyr", "tundra",
                                            "mosaic", "ember",  "quartz", "willow"};
const std::vector<std::vector<std::string>> kCueFamilies = {
    {"twilight", "dusk"},  {"harbor", "port"},   {"meadow", "pasture"}, {"lantern", "lamp"},
    {"voyage", "journey"}, {"orchard", "grove"}, {"thicket", "copse"},  {"cavern", "grotto"},
    {"plateau", "mesa"},   {"estuary", "delta"},
};
const std::vector<std::vector<std::string>> kGateFamilies = {
    {"verily", "forsooth"}, {"perchance", "mayhap"}, {"albeit", "howbeit"},
    {"thence", "thither"},  {"betwixt", "amidst"},   {"anon", "erelong"},
};
const std::vector<std::vector<std::string>> kTaskCueFamilies = {
    {"overall", "altogether"}, {"verdict", "judgment"}, {"rating", "score"},
    {"review", "critique"},
};

// ---- grammar constants (frozen, v1) ---------------------------------------------

// Task-rule emission table, keyed on (task cues in sequence, indicator
// margin). Columns: P(true-class token), P(other-class token), P(rare leak).
// The remainder is filler noise. Without a task cue the rule is class-blind.
struct RuleACell {
    double p_true, p_other, p_leak;
};
constexpr RuleACell kRuleA[3][2] = {
    // margin 1          margin >= 2
    {{0.25, 0.25, 0.10}, {0.25, 0.25, 0.10}},  // no task cue
    {{0.78, 0.06, 0.08}, {0.86, 0.03, 0.08}},  // one task cue
    {{0.82, 0.05, 0.08}, {0.88, 0.02, 0.08}},  // two or more
};

// Redirection reliability: cue+gate by distinct-cue count, cue alone flat.
constexpr double kCueGateRel[3] = {0.90, 0.97, 0.99};  // 1, 2, >=3 distinct cues
constexpr double kCueAloneRel = 0.30;

constexpr double kLabelZipf = 0.70;   // within-class label token weights
constexpr double kLeakDecay = 0.80;   // rare-pool emission leak weights
constexpr double kBucketDecay = 0.85; // within-bucket-union weights
constexpr int kNoiseFillers = 100;    // uniform noise support
constexpr int kPairedFillers = 600;   // fillers that receive a synonym partner

// Rare-word text frequency quotas per 256 occurrences, strictly decreasing.
constexpr int kRareQuota[12] = {50, 44, 38, 32, 26, 21, 16, 12, 8, 5, 3, 1};

// Deterministic smooth scheduler: emits rare-pool indices so that every
// prefix respects the quota ratios (stride scheduling, ties to lowest index).
struct RareScheduler {
    double pass[12];
    RareScheduler() {
        for (int i = 0; i < 12; ++i) pass[i] = 1.0 / kRareQuota[i];
    }
    int next() {
        int best = 0;
        for (int i = 1; i < 12; ++i) {
            if (pass[i] < pass[best]) best = i;
        }
        pass[best] += 1.0 / kRareQuota[best];
        return best;
    }
};

std::vector<double> geometric_weights(double decay, std::size_t n) {
    std::vector<double> w(n);
    double v = 1.0;
    for (std::size_t i = 0; i < n; ++i, v *= decay) w[i] = v;
    return w;
}

}  // namespace

// ---- vocabulary construction -----------------------------------------------------

TaskGrammar::TaskGrammar(const GrammarConfig& cfg) : cfg_(cfg) {
    if (cfg.min_text < 4 || cfg.max_text < cfg.min_text)
        throw ConfigError("grammar: bad text length range");

    std::vector<std::string> words;
    std::set<std::string> named;
    auto add = [&](const std::string& w) {
        if (!named.insert(w).second) throw ConfigError("grammar: duplicate word " + w);
        words.push_back(w);
    };

    add(".");
    for (const auto& fam : kPositiveFamilies)
        for (const auto& w : fam) add(w);
    for (const auto& fam : kNegativeFamilies)
        for (const auto& w : fam) add(w);
    for (const auto& w : kLabelPositive) add(w);
    for (const auto& w : kLabelNegative) add(w);
    for (const auto& w : kPairDiffer) add(w);
    for (const auto& w : kPairSame) add(w);
    for (const auto& w : kRarePool) add(w);
    for (const auto& fam : kCueFamilies)
        for (const auto& w : fam) add(w);
    for (const auto& fam : kGateFamilies)
        for (const auto& w : fam) add(w);
    for (const auto& fam : kTaskCueFamilies)
        for (const auto& w : fam) add(w);

    // Filler words: deterministic consonant-vowel syllable pairs.
    const std::string consonants = "bdfgklmnprstvz";
    const std::string vowels = "aeiou";
    const int need = cfg.vocab_target - Vocabulary::kNumSpecials - static_cast<int>(words.size());
    if (need < kPairedFillers + kNoiseFillers)
        throw ConfigError("grammar: vocab_target too small for the filler block");
    int made = 0;
    for (char c1 : consonants) {
        for (char v1 : vowels) {
            for (char c2 : consonants) {
                for (char v2 : vowels) {
                    if (made == need) goto fillers_done;
                    std::string w{c1, v1, c2, v2};
                    if (named.count(w)) continue;
                    add(w);
                    ++made;
                }
            }
        }
    }
fillers_done:
    if (made != need) throw ConfigError("grammar: filler syllable space exhausted");

    vocab_ = Vocabulary(words);
    auto id = [&](const std::string& w) { return *vocab_.lookup(w); };
    period_ = id(".");

    for (int cls = 0; cls < 2; ++cls) {
        const auto& fams = cls == 0 ? kPositiveFamilies : kNegativeFamilies;
        for (const auto& fam : fams) {
            std::vector<TokenId> f;
            for (const auto& w : fam) f.push_back(id(w));
            indicator_families_[cls].push_back(f);
        }
    }
    auto ids_of = [&](const std::vector<std::string>& ws) {
        std::vector<TokenId> out;
        for (const auto& w : ws) out.push_back(id(w));
        return out;
    };
    single_map_.class_tokens = {ids_of(kLabelPositive), ids_of(kLabelNegative)};
    pair_map_.class_tokens = {ids_of(kPairDiffer), ids_of(kPairSame)};
    single_map_.validate(vocab_.size());
    pair_map_.validate(vocab_.size());
    rare_pool_ = ids_of(kRarePool);
    for (const auto& fam : kCueFamilies) cue_families_.push_back(ids_of(fam));
    for (const auto& fam : kGateFamilies) gate_families_.push_back(ids_of(fam));
    for (const auto& fam : kTaskCueFamilies) task_cue_families_.push_back(ids_of(fam));

    // Fillers are the tail block of the vocabulary.
    const int first_filler = vocab_.size() - made;
    for (int i = 0; i < made; ++i) fillers_.push_back(static_cast<TokenId>(first_filler + i));
    filler_weights_.resize(fillers_.size());
    for (std::size_t i = 0; i < fillers_.size(); ++i)
        filler_weights_[i] = 1.0 / std::pow(static_cast<double>(i) + 2.0, 1.1);
    paired_fillers_ = static_cast<std::size_t>(std::min<int>(kPairedFillers, made));
}

const TokenMap& TaskGrammar::label_map(TaskKind kind) const {
    return kind == TaskKind::SingleText ? single_map_ : pair_map_;
}

SynonymLexicon TaskGrammar::lexicon() const {
    SynonymLexicon lex;
    auto add_family = [&lex](const std::vector<TokenId>& fam) {
        for (TokenId a : fam) {
            std::vector<TokenId> syns;
            for (TokenId b : fam) {
                if (b != a) syns.push_back(b);
            }
            std::sort(syns.begin(), syns.end());
            lex[a] = syns;
        }
    };
    for (int cls = 0; cls < 2; ++cls)
        for (const auto& fam : indicator_families_[cls]) add_family(fam);
    for (const auto& fam : cue_families_) add_family(fam);
    for (const auto& fam : gate_families_) add_family(fam);
    for (const auto& fam : task_cue_families_) add_family(fam);
    for (std::size_t i = 0; i + 1 < paired_fillers_; i += 2)
        add_family({fillers_[i], fillers_[i + 1]});
    return lex;
}

// ---- sampling --------------------------------------------------------------------

// Shared sampling machinery for labeled texts and the pretraining stream.
struct GrammarSampler {
    const TaskGrammar& g;
    RareScheduler rare_sched;

    struct Text {
        std::vector<TokenId> tokens;
        int cls = 0;
        int margin = 1;
        int tau = 0;
    };

    int sample_margin(Rng& rng) {
        const double r = rng.next_double();
        if (r < 0.45) return 1;
        if (r < 0.80) return 2;
        return 3;
    }

    TokenId pick_family_member(const std::vector<std::vector<TokenId>>& fams, Rng& rng) {
        const auto& fam = fams[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(fams.size()) - 1))];
        return fam[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(fam.size()) - 1))];
    }

    TokenId zipf_filler(Rng& rng) {
        return g.fillers_[rng.weighted_index(g.filler_weights_)];
    }

    Text sample_text(int cls, Rng& rng) {
        Text t;
        t.cls = cls;
        t.margin = sample_margin(rng);
        const int n_other = rng.bernoulli(0.45) ? 1 : 0;
        const int n_true = t.margin + n_other;
        t.tau = rng.bernoulli(g.cfg_.tau_in_text) ? 1 : 0;
        const bool has_rare = rng.bernoulli(g.cfg_.rare_in_text);

        std::vector<TokenId> toks;
        for (int i = 0; i < n_true; ++i)
            toks.push_back(pick_family_member(g.indicator_families_[cls], rng));
        for (int i = 0; i < n_other; ++i)
            toks.push_back(pick_family_member(g.indicator_families_[1 - cls], rng));
        if (t.tau) toks.push_back(pick_family_member(g.task_cue_families_, rng));
        if (has_rare)
            toks.push_back(g.rare_pool_[static_cast<std::size_t>(rare_sched.next())]);

        int len = static_cast<int>(rng.uniform_int(g.cfg_.min_text, g.cfg_.max_text));
        len = std::max(len, static_cast<int>(toks.size()));
        while (static_cast<int>(toks.size()) < len) toks.push_back(zipf_filler(rng));
        rng.shuffle(toks);
        t.tokens = std::move(toks);
        return t;
    }

    // Emission under the task rule (rule A).
    TokenId rule_a_emission(const TokenMap& map, int cls, int n_tau, int margin, Rng& rng) {
        const int row = n_tau >= 2 ? 2 : n_tau;
        const int col = margin >= 2 ? 1 : 0;
        const RuleACell& cell = kRuleA[row][col];
        const double r = rng.next_double();
        if (r < cell.p_true) return zipf_pick(map.tokens_for(cls), kLabelZipf, rng);
        if (r < cell.p_true + cell.p_other)
            return zipf_pick(map.tokens_for(1 - cls), kLabelZipf, rng);
        if (r < cell.p_true + cell.p_other + cell.p_leak) {
            auto w = geometric_weights(kLeakDecay, g.rare_pool_.size());
            return g.rare_pool_[rng.weighted_index(w)];
        }
        return g.fillers_[static_cast<std::size_t>(rng.uniform_int(0, kNoiseFillers - 1))];
    }

    TokenId zipf_pick(const std::vector<TokenId>& set, double decay, Rng& rng) {
        auto w = geometric_weights(decay, set.size());
        return set[rng.weighted_index(w)];
    }

    // Emission with possible cue/gate redirection (rule B takes precedence).
    TokenId emission(const TokenMap& map, int cls, int n_tau, int margin,
                     const std::vector<int>& cue_fams_present, bool gate_present, Rng& rng) {
        if (!cue_fams_present.empty()) {
            const int n = static_cast<int>(cue_fams_present.size());
            const double rel =
                gate_present ? kCueGateRel[std::min(n, 3) - 1] : kCueAloneRel;
            if (rng.bernoulli(rel)) {
                // Union of buckets {i, i+1, i+2} over the distinct cues present.
                std::set<int> bucket;
                for (int f : cue_fams_present) {
                    for (int off = 0; off < 3; ++off) {
                        const int k = f + off;
                        if (k < static_cast<int>(g.rare_pool_.size())) bucket.insert(k);
                    }
                }
                std::vector<TokenId> members;
                std::vector<double> weights;
                for (int k : bucket) {
                    members.push_back(g.rare_pool_[static_cast<std::size_t>(k)]);
                    weights.push_back(std::pow(kBucketDecay, k));
                }
                return members[rng.weighted_index(weights)];
            }
        }
        return rule_a_emission(map, cls, n_tau, margin, rng);
    }
};

Corpus TaskGrammar::make_corpus(TaskKind kind, int n, std::uint64_t seed) const {
    if (n < 1) throw ConfigError("grammar: corpus size must be positive");
    GrammarSampler sampler{*this, {}};
    Rng rng(derive_seed(cfg_.seed, derive_seed(seed, 0xC0)));
    Corpus corpus;
    corpus.text_arity = kind == TaskKind::SingleText ? 1 : 2;
    for (int i = 0; i < n; ++i) {
        LabeledExample ex;
        if (kind == TaskKind::SingleText) {
            const int cls = static_cast<int>(rng.uniform_int(0, 1));
            auto t = sampler.sample_text(cls, rng);
            ex.label = cls;
            ex.texts = {vocab_.decode(t.tokens)};
        } else {
            const int label = static_cast<int>(rng.uniform_int(0, 1));  // 1 = same
            const int c1 = static_cast<int>(rng.uniform_int(0, 1));
            const int c2 = label ? c1 : 1 - c1;
            auto t1 = sampler.sample_text(c1, rng);
            auto t2 = sampler.sample_text(c2, rng);
            ex.label = label;
            ex.texts = {vocab_.decode(t1.tokens), vocab_.decode(t2.tokens)};
        }
        corpus.examples.push_back(std::move(ex));
    }
    return corpus;
}

std::function<PretrainExample(Rng&)> TaskGrammar::pretrain_stream() const {
    auto sampler = std::make_shared<GrammarSampler>(GrammarSampler{*this, {}});
    const TaskGrammar* g = this;
    return [g, sampler](Rng& rng) -> PretrainExample {
        GrammarSampler& s = *sampler;
        const double kind_roll = rng.next_double();
        // Mixture: 0.43 single task rule, 0.12 pair task rule, 0.20 cue+gate,
        // 0.10 cue alone, 0.05 gate alone, 0.10 background filler.
        enum class Kind { Single, Pair, CueGate, CueOnly, GateOnly, Background };
        Kind kind;
        if (kind_roll < 0.43) kind = Kind::Single;
        else if (kind_roll < 0.55) kind = Kind::Pair;
        else if (kind_roll < 0.75) kind = Kind::CueGate;
        else if (kind_roll < 0.85) kind = Kind::CueOnly;
        else if (kind_roll < 0.90) kind = Kind::GateOnly;
        else kind = Kind::Background;

        PretrainExample ex;
        if (kind == Kind::Background) {
            const int len = static_cast<int>(rng.uniform_int(4, 10));
            for (int i = 0; i < len; ++i) ex.tokens.push_back(s.zipf_filler(rng));
            ex.tokens.push_back(Vocabulary::kMask);
            ex.tokens.push_back(g->period_);
            ex.target = s.zipf_filler(rng);
            return ex;
        }

        // Base text(s) under the task rule.
        const bool pair = kind == Kind::Pair;
        const int cls = static_cast<int>(rng.uniform_int(0, 1));
        int label = cls;
        GrammarSampler::Text t1, t2;
        if (pair) {
            label = static_cast<int>(rng.uniform_int(0, 1));
            const int c2 = label ? cls : 1 - cls;
            t1 = s.sample_text(cls, rng);
            t2 = s.sample_text(c2, rng);
        } else {
            t1 = s.sample_text(cls, rng);
        }

        // Optional junk block standing in for the prompt region: mostly
        // filler with occasional task cues.
        std::vector<TokenId> junk;
        int junk_tau = 0;
        if (rng.bernoulli(0.65)) {
            const int jlen = static_cast<int>(rng.uniform_int(2, 10));
            for (int i = 0; i < jlen; ++i) {
                if (rng.bernoulli(0.15)) {
                    junk.push_back(s.pick_family_member(g->task_cue_families_, rng));
                    ++junk_tau;
                } else {
                    junk.push_back(s.zipf_filler(rng));
                }
            }
        }

        // Cue/gate insertion for the redirection kinds. Cues land in text or
        // junk (either region), gates mostly in the junk region.
        std::vector<int> cue_fams;
        bool gate_present = false;
        auto insert_at_random = [&rng](std::vector<TokenId>& v, TokenId t) {
            const auto pos = static_cast<std::size_t>(
                rng.uniform_int(0, static_cast<std::int64_t>(v.size())));
            v.insert(v.begin() + static_cast<std::ptrdiff_t>(pos), t);
        };
        std::vector<TokenId>& cue_text = t1.tokens;
        if (kind == Kind::CueGate || kind == Kind::CueOnly) {
            const double nr = rng.next_double();
            const int n_cues = nr < 0.45 ? 1 : nr < 0.80 ? 2 : nr < 0.95 ? 3 : 4;
            std::set<int> fams;
            for (int i = 0; i < n_cues; ++i) {
                const int fam = static_cast<int>(
                    rng.uniform_int(0, static_cast<std::int64_t>(g->cue_families_.size()) - 1));
                fams.insert(fam);
                const auto& family = g->cue_families_[static_cast<std::size_t>(fam)];
                const TokenId cue = family[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(family.size()) - 1))];
                if (!junk.empty() && rng.bernoulli(0.5)) insert_at_random(junk, cue);
                else insert_at_random(cue_text, cue);
            }
            cue_fams.assign(fams.begin(), fams.end());
        }
        if (kind == Kind::CueGate || kind == Kind::GateOnly) {
            gate_present = true;
            const int n_gates = rng.bernoulli(0.7) ? 1 : 2;
            for (int i = 0; i < n_gates; ++i) {
                const TokenId gate = s.pick_family_member(g->gate_families_, rng);
                if (!junk.empty() && rng.bernoulli(0.8)) insert_at_random(junk, gate);
                else insert_at_random(cue_text, gate);
            }
        }

        // Assemble the sequence.
        ex.tokens = t1.tokens;
        if (pair) {
            ex.tokens.push_back(Vocabulary::kSep);
            ex.tokens.insert(ex.tokens.end(), t2.tokens.begin(), t2.tokens.end());
        }
        ex.tokens.insert(ex.tokens.end(), junk.begin(), junk.end());
        ex.tokens.push_back(Vocabulary::kMask);
        ex.tokens.push_back(g->period_);

        const int n_tau = t1.tau + (pair ? t2.tau : 0) + junk_tau;
        const int margin = pair ? std::min(t1.margin, t2.margin) : t1.margin;
        const TokenMap& map = pair ? g->pair_map_ : g->single_map_;
        ex.target = s.emission(map, label, n_tau, margin, cue_fams, gate_present, rng);
        return ex;
    };
}

// ---- bundle I/O -------------------------------------------------------------------

TaskBundle TaskBundle::generate(const std::string& task_id, const GrammarConfig& cfg,
                                int train_size, int test_size, std::uint64_t corpus_seed) {
    if (train_size < 2 || test_size < 1) throw ConfigError("task bundle: corpus sizes too small");
    TaskBundle b;
    b.spec = task_by_id(task_id);
    b.grammar = cfg;
    TaskGrammar grammar(cfg);
    b.vocab = grammar.vocab();
    b.train = grammar.make_corpus(b.spec.kind, train_size, derive_seed(corpus_seed, 1));
    b.test = grammar.make_corpus(b.spec.kind, test_size, derive_seed(corpus_seed, 2));
    b.label_map = grammar.label_map(b.spec.kind);
    b.lexicon = grammar.lexicon();
    return b;
}

void TaskBundle::save(const std::string& dir) const {
    fs::create_directories(dir);
    json doc = {
        {"format_version", 1},
        {"task_id", spec.task_id},
        {"template_id", spec.template_id},
        {"grammar",
         {{"seed", grammar.seed},
          {"vocab_target", grammar.vocab_target},
          {"min_text", grammar.min_text},
          {"max_text", grammar.max_text},
          {"tau_in_text", grammar.tau_in_text},
          {"rare_in_text", grammar.rare_in_text}}},
        {"train_size", train.size()},
        {"test_size", test.size()},
    };
    std::ofstream out(fs::path(dir) / "task.json", std::ios::binary);
    if (!out) throw ConfigError("task bundle: cannot write task.json");
    out << doc.dump(2) << '\n';
    out.close();
    vocab.save((fs::path(dir) / "vocab.txt").string());
    save_corpus((fs::path(dir) / "train.tsv").string(), train);
    save_corpus((fs::path(dir) / "test.tsv").string(), test);
    save_token_map((fs::path(dir) / "label_map.json").string(), label_map);
    save_lexicon((fs::path(dir) / "lexicon.tsv").string(), lexicon, vocab);
}

TaskBundle TaskBundle::load(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "task.json", std::ios::binary);
    if (!in) throw ConfigError("task bundle: cannot read " + dir + "/task.json");
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw FormatError("task bundle: task.json is not valid JSON");
    if (doc.value("format_version", 0) != 1)
        throw FormatError("task bundle: unsupported format version");
    TaskBundle b;
    b.spec = task_by_id(doc.at("task_id").get<std::string>());
    const auto& g = doc.at("grammar");
    b.grammar.seed = g.at("seed").get<std::uint64_t>();
    b.grammar.vocab_target = g.at("vocab_target").get<int>();
    b.grammar.min_text = g.at("min_text").get<int>();
    b.grammar.max_text = g.at("max_text").get<int>();
    b.grammar.tau_in_text = g.at("tau_in_text").get<double>();
    b.grammar.rare_in_text = g.at("rare_in_text").get<double>();
    b.vocab = Vocabulary::load((fs::path(dir) / "vocab.txt").string());
    b.train = load_corpus((fs::path(dir) / "train.tsv").string());
    b.test = load_corpus((fs::path(dir) / "test.tsv").string());
    b.label_map = load_token_map((fs::path(dir) / "label_map.json").string());
    b.label_map.validate(b.vocab.size());
    b.lexicon = load_lexicon((fs::path(dir) / "lexicon.tsv").string(), b.vocab);
    return b;
}

}  // namespace promptcare
