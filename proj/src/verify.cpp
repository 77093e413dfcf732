#include "promptcare/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "json.hpp"
#include "promptcare/errors.hpp"

namespace promptcare {

using nlohmann::json;

namespace {

// JSON has no infinity; clamp the t statistic for the log.
double json_safe(double x) {
    if (std::isfinite(x)) return x;
    return x > 0 ? 1e308 : -1e308;
}

// First synonym both words list, searched in the trigger token's order.
std::optional<TokenId> shared_synonym(const SynonymLexicon& lex, TokenId word, TokenId trig) {
    auto wi = lex.find(word);
    auto ti = lex.find(trig);
    if (wi == lex.end() || ti == lex.end()) return std::nullopt;
    for (TokenId s : ti->second)
        if (std::find(wi->second.begin(), wi->second.end(), s) != wi->second.end()) return s;
    return std::nullopt;
}

ProbeQuery swap_probe(const std::vector<TokenId>& text, const WatermarkKey& key,
                      const SynonymLexicon& lexicon, Rng& rng) {
    ProbeQuery q;
    q.tokens = text;
    std::set<std::size_t> replaced;
    std::vector<TokenId> pending;
    for (TokenId trig : key.trigger) {
        bool done = false;
        for (std::size_t i = 0; i < q.tokens.size() && !done; ++i) {
            if (replaced.count(i)) continue;
            if (auto s = shared_synonym(lexicon, q.tokens[i], trig)) {
                q.tokens[i] = *s;
                replaced.insert(i);
                if (q.position < 0) q.position = static_cast<int>(i);
                done = true;
            }
        }
        if (!done) pending.push_back(trig);
    }
    if (!pending.empty()) {
        std::vector<TokenId> block;
        for (TokenId trig : pending) {
            auto it = lexicon.find(trig);
            if (it == lexicon.end() || it->second.empty()) {
                block.push_back(trig);  // no synonym to hide behind: use the token itself
                q.fallback = true;
            } else {
                block.push_back(it->second.front());
            }
        }
        // Strictly interior position when the text allows one.
        const auto len = static_cast<std::int64_t>(q.tokens.size());
        const int at = len >= 2 ? static_cast<int>(1 + rng.uniform_int(0, len - 2))
                                : static_cast<int>(len);
        q.tokens.insert(q.tokens.begin() + at, block.begin(), block.end());
        if (q.position < 0) q.position = at;
    }
    return q;
}

}  // namespace

std::vector<ProbeQuery> build_probe_queries(const Vocabulary& vocab,
                                            const std::vector<const LabeledExample*>& examples,
                                            const WatermarkKey& key, ProbeMode mode,
                                            const SynonymLexicon* lexicon, Rng& rng) {
    if (examples.empty()) throw ConfigError("probe building: no examples");
    if (key.trigger.empty()) throw ConfigError("probe building: key has an empty trigger");
    if (mode == ProbeMode::Swap && !lexicon)
        throw ConfigError("probe building: swap mode needs a synonym lexicon");

    std::vector<ProbeQuery> probes;
    probes.reserve(examples.size());
    for (const auto* ex : examples) {
        if (!ex || ex->texts.empty()) throw ConfigError("probe building: malformed example");
        const auto text = vocab.encode(ex->texts[0]);
        ProbeQuery q;
        if (mode == ProbeMode::Plain) {
            q.tokens = text;
            q.position = static_cast<int>(q.tokens.size());
            q.tokens.insert(q.tokens.end(), key.trigger.begin(), key.trigger.end());
        } else {
            q = swap_probe(text, key, *lexicon, rng);
        }
        q.tokens.push_back(Vocabulary::kMask);
        if (ex->texts.size() > 1) q.tokens2 = vocab.encode(ex->texts[1]);
        probes.push_back(std::move(q));
    }
    return probes;
}

std::vector<std::optional<double>> collect_predictions(
    SuspectService& service, const Vocabulary& vocab, const std::vector<ProbeQuery>& probes,
    const std::vector<TokenId>& signal_tokens) {
    if (signal_tokens.empty()) throw ConfigError("prediction collection: empty signal set");
    std::set<std::string> signal_words;
    for (TokenId t : signal_tokens) signal_words.insert(vocab.token(t));

    std::vector<std::optional<double>> out;
    out.reserve(probes.size());
    for (const auto& probe : probes) {
        std::vector<std::string> words, words2;
        for (TokenId t : probe.tokens) words.push_back(vocab.token(t));
        for (TokenId t : probe.tokens2) words2.push_back(vocab.token(t));
        const auto reply = service.query(words, words2);
        if (!reply)
            out.push_back(std::nullopt);
        else
            out.push_back(signal_words.count(*reply) ? 1.0 : 0.0);
    }
    return out;
}

VerificationReport verify_ownership(SuspectService& defender, SuspectService& suspect,
                                    const Corpus& pool, const WatermarkKey& key,
                                    const Vocabulary& vocab, const VerifyConfig& cfg,
                                    const SynonymLexicon* lexicon) {
    if (cfg.n_queries < 2) throw ConfigError("verification: need at least 2 queries per try");
    if (cfg.tries < 1) throw ConfigError("verification: need at least one try");
    if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0))
        throw ConfigError("verification: alpha outside (0, 1)");
    if (cfg.n_queries > pool.size())
        throw ConfigError("verification: query count exceeds the verification pool");

    VerificationReport report;
    report.n_queries = cfg.n_queries;
    report.tries = cfg.tries;
    report.alpha = cfg.alpha;
    report.mode = cfg.mode == ProbeMode::Plain ? "plain" : "swap";

    double p_sum = 0.0;
    for (int t = 0; t < cfg.tries; ++t) {
        Rng rng(derive_seed(derive_seed(cfg.seed, 0x7E), static_cast<std::uint64_t>(t)));
        std::vector<const LabeledExample*> sample;
        for (int i : rng.sample_without_replacement(pool.size(), cfg.n_queries))
            sample.push_back(&pool.examples[(std::size_t)i]);
        const auto probes = build_probe_queries(vocab, sample, key, cfg.mode, lexicon, rng);

        const auto a = collect_predictions(defender, vocab, probes, key.signal_tokens);
        const auto b = collect_predictions(suspect, vocab, probes, key.signal_tokens);
        std::vector<double> p1, p2;
        for (std::size_t i = 0; i < probes.size(); ++i) {
            if (a[i] && b[i]) {  // drop failures from both sides at the same index
                p1.push_back(*a[i]);
                p2.push_back(*b[i]);
            }
        }
        if (p1.size() < 2)
            throw Error("verification: fewer than 2 probes survived service failures");

        const auto res = welch_two_sample(p1, p2);
        TryRecord rec;
        rec.index = t;
        rec.used = static_cast<int>(p1.size());
        for (double x : p1) rec.mean_defender += x;
        for (double x : p2) rec.mean_suspect += x;
        rec.mean_defender /= static_cast<double>(p1.size());
        rec.mean_suspect /= static_cast<double>(p2.size());
        rec.t = res.t;
        rec.df = res.df;
        rec.p = res.p;
        report.records.push_back(rec);
        p_sum += res.p;
    }
    report.averaged_p = p_sum / cfg.tries;
    report.verdict = report.averaged_p >= cfg.alpha ? "COPY" : "INDEPENDENT";
    return report;
}

double false_positive_rate(const std::vector<VerificationReport>& reports, double alpha) {
    if (reports.empty()) throw ConfigError("false positive rate: no reports");
    int copies = 0;
    for (const auto& r : reports) copies += r.averaged_p >= alpha;
    return static_cast<double>(copies) / static_cast<double>(reports.size());
}

// ---- report file ---------------------------------------------------------------------

void VerificationReport::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("verification report: cannot write " + path);
    for (const auto& r : records) {
        json j;
        j["record"] = "try";
        j["index"] = r.index;
        j["used"] = r.used;
        j["mean_defender"] = r.mean_defender;
        j["mean_suspect"] = r.mean_suspect;
        j["t"] = json_safe(r.t);
        j["df"] = r.df;
        j["p"] = r.p;
        out << j.dump() << "\n";
    }
    json s;
    s["record"] = "summary";
    s["format_version"] = 1;
    s["n_queries"] = n_queries;
    s["tries"] = tries;
    s["alpha"] = alpha;
    s["mode"] = mode;
    s["averaged_p"] = averaged_p;
    s["verdict"] = verdict;
    out << s.dump() << "\n";
}

VerificationReport VerificationReport::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("verification report: cannot read " + path);
    VerificationReport rep;
    bool summary_seen = false;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw FormatError(std::string("verification report: bad record: ") + e.what());
        }
        const std::string kind = j.value("record", "");
        try {
            if (kind == "try") {
                TryRecord r;
                r.index = j.at("index").get<int>();
                r.used = j.at("used").get<int>();
                r.mean_defender = j.at("mean_defender").get<double>();
                r.mean_suspect = j.at("mean_suspect").get<double>();
                r.t = j.at("t").get<double>();
                r.df = j.at("df").get<double>();
                r.p = j.at("p").get<double>();
                rep.records.push_back(r);
            } else if (kind == "summary") {
                if (j.value("format_version", 0) != 1)
                    throw FormatError("verification report: unsupported format version");
                rep.n_queries = j.at("n_queries").get<int>();
                rep.tries = j.at("tries").get<int>();
                rep.alpha = j.at("alpha").get<double>();
                rep.mode = j.at("mode").get<std::string>();
                rep.averaged_p = j.at("averaged_p").get<double>();
                rep.verdict = j.at("verdict").get<std::string>();
                summary_seen = true;
            } else {
                throw FormatError("verification report: unknown record kind");
            }
        } catch (const json::exception& e) {
            throw FormatError(std::string("verification report: bad record: ") + e.what());
        }
    }
    if (!summary_seen) throw FormatError("verification report: missing summary record");
    if (static_cast<int>(rep.records.size()) != rep.tries)
        throw FormatError("verification report: try count mismatch");
    return rep;
}

}  // namespace promptcare
