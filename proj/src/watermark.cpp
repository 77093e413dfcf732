#include "promptcare/watermark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <set>

#include "json.hpp"
#include "promptcare/errors.hpp"
#include "promptcare/util.hpp"

namespace promptcare {

using nlohmann::json;

// ---- signal-token selection ---------------------------------------------------------

SignalSelection select_signal_tokens(const LmBackend& m, const Corpus& clean,
                                     const PromptArtifact& warm_prompt, const TokenMap& map,
                                     const SignalConfig& cfg) {
    if (cfg.k < 1) throw ConfigError("signal selection: k must be positive");
    if (cfg.probe_size < 1 || cfg.probe_trigger_len < 1)
        throw ConfigError("signal selection: bad probe parameters");
    if (clean.empty()) throw ConfigError("signal selection: empty clean split");
    const auto& vocab = m.vocab();
    map.validate(vocab.size());

    Rng rng(derive_seed(cfg.seed, 0x51));
    const auto pool = non_special_pool(vocab);
    std::vector<TokenId> probe_trigger;
    for (int i = 0; i < cfg.probe_trigger_len; ++i)
        probe_trigger.push_back(pool[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);

    const int probes = std::min(cfg.probe_size, clean.size());
    auto idx = rng.sample_without_replacement(clean.size(), probes);

    Vec mean = Vec::Zero(vocab.size());
    const int chunk = 256;
    for (int base = 0; base < probes; base += chunk) {
        std::vector<SequenceInput> seqs;
        for (int i = base; i < std::min(probes, base + chunk); ++i)
            seqs.push_back(render_prompted(vocab, clean.examples[idx[i]], warm_prompt,
                                           &probe_trigger));
        for (const auto& p : m.mask_distribution_batch(seqs)) mean += p.probabilities;
    }
    mean /= static_cast<double>(probes);

    // Drop specials and label tokens, then rank what remains.
    const auto labels = map.flattened();
    std::set<TokenId> excluded(labels.begin(), labels.end());
    for (TokenId t = 0; t < Vocabulary::kNumSpecials; ++t) excluded.insert(t);
    std::vector<TokenId> eligible;
    std::vector<double> score;
    for (TokenId t = 0; t < vocab.size(); ++t) {
        if (!excluded.count(t)) {
            eligible.push_back(t);
            score.push_back(mean[t]);
        }
    }
    if (static_cast<int>(eligible.size()) < 2 * cfg.k)
        throw ConfigError("signal selection: fewer than 2k eligible tokens");

    SignalSelection out;
    for (int i : topk_lowest(score, 2 * cfg.k)) out.salient.push_back(eligible[i]);

    // Choose the k least text-frequent salient tokens, ties to the lowest id.
    auto counts = token_counts(clean, vocab);
    std::vector<TokenId> by_freq = out.salient;
    std::sort(by_freq.begin(), by_freq.end(), [&](TokenId a, TokenId b) {
        if (counts[a] != counts[b]) return counts[a] < counts[b];
        return a < b;
    });
    out.chosen.assign(by_freq.begin(), by_freq.begin() + cfg.k);
    std::sort(out.chosen.begin(), out.chosen.end());
    return out;
}

// ---- watermark key ---------------------------------------------------------------------

void WatermarkKey::save(const std::string& path) const {
    json doc = {
        {"format_version", 1},
        {"SECRET", "watermark verification key - do not distribute"},
        {"trigger", trigger},
        {"signal_tokens", signal_tokens},
        {"template_id", template_id},
        {"seed", seed},
        {"metadata", metadata},
    };
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write key file " + path);
    out << doc.dump(2) << '\n';
}

WatermarkKey WatermarkKey::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read key file " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw FormatError("key file is not valid JSON: " + path);
    if (doc.value("format_version", 0) != 1)
        throw FormatError("key file has an unsupported format version");
    if (!doc.contains("SECRET")) throw FormatError("not a watermark key file: " + path);
    WatermarkKey key;
    key.trigger = doc.at("trigger").get<std::vector<TokenId>>();
    key.signal_tokens = doc.at("signal_tokens").get<std::vector<TokenId>>();
    key.template_id = doc.at("template_id").get<std::string>();
    key.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("metadata"))
        key.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
    if (key.trigger.empty() || key.signal_tokens.empty())
        throw FormatError("key file has an empty trigger or signal set");
    return key;
}

// ---- measurement ---------------------------------------------------------------------------

double watermark_success_rate(const LmBackend& m, const Corpus& examples,
                              const PromptArtifact& prompt,
                              const std::vector<TokenId>& signal_tokens,
                              const std::vector<TokenId>* trigger) {
    if (examples.empty()) throw ConfigError("success rate needs a non-empty corpus");
    if (signal_tokens.empty()) throw ConfigError("success rate needs a non-empty signal set");
    std::set<TokenId> signal(signal_tokens.begin(), signal_tokens.end());
    int hits = 0;
    const int chunk = 256;
    for (int base = 0; base < examples.size(); base += chunk) {
        std::vector<SequenceInput> seqs;
        for (int i = base; i < std::min(examples.size(), base + chunk); ++i)
            seqs.push_back(render_prompted(m.vocab(), examples.examples[i], prompt, trigger));
        for (const auto& p : m.mask_distribution_batch(seqs)) hits += signal.count(p.top) > 0;
    }
    return static_cast<double>(hits) / examples.size();
}

Mat trigger_gradient(const LmBackend& m, const PromptArtifact& prompt, const BatchProvider& next,
                     int accum, Rng& rng) {
    if (accum < 1) throw ConfigError("trigger gradient: accumulation count must be positive");
    Mat g;
    long count = 0;
    for (int a = 0; a < accum; ++a) {
        auto batch = next(rng);
        if (batch.examples.empty() || !batch.map || !batch.trigger || batch.trigger->empty())
            throw ConfigError("trigger gradient: provider must serve triggered batches");
        std::vector<SequenceInput> seqs;
        std::vector<LossSpec> losses;
        for (const auto* ex : batch.examples) {
            seqs.push_back(render_prompted(m.vocab(), *ex, prompt, batch.trigger));
            losses.push_back(label_loss(*batch.map, ex->label));
        }
        if (g.size() == 0)
            g = Mat::Zero(m.embed_dim(), static_cast<int>(batch.trigger->size()));
        auto eval = m.eval_batch(seqs, losses);
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            const int tb = seqs[i].trigger_begin;
            for (int j = 0; j < seqs[i].trigger_len; ++j)
                g.col(j) += eval.input_grads[i].row(tb + j).transpose();
            ++count;
        }
    }
    g /= static_cast<double>(count);
    return g;
}

// ---- bi-level injection -----------------------------------------------------------------------

namespace {

// Interleaves clean batches (label objective) with triggered held-split
// batches (merged objective). Keeps its own parity so successive phases
// continue the alternation.
BatchProvider interleaved_provider(const InjectionContext& ctx, int batch_size,
                                   std::shared_ptr<int> counter) {
    return [&ctx, batch_size, counter](Rng& rng) {
        TuningBatch b;
        const bool watermark_turn = (*counter)++ % 2 == 1 && !ctx.held.empty();
        const Corpus& src = watermark_turn ? ctx.held : ctx.clean;
        const int want = std::min(batch_size, src.size());
        for (int i : rng.sample_without_replacement(src.size(), want))
            b.examples.push_back(&src.examples[i]);
        if (watermark_turn) {
            b.map = &ctx.merged;
            b.trigger = &ctx.trigger;
        } else {
            b.map = &ctx.map;
        }
        return b;
    };
}

BatchProvider held_provider(const InjectionContext& ctx, int batch_size) {
    return [&ctx, batch_size](Rng& rng) {
        TuningBatch b;
        const int want = std::min(batch_size, ctx.held.size());
        for (int i : rng.sample_without_replacement(ctx.held.size(), want))
            b.examples.push_back(&ctx.held.examples[i]);
        b.map = &ctx.merged;
        b.trigger = &ctx.trigger;
        return b;
    };
}

}  // namespace

CgsTrace constraint_greedy_search(InjectionContext& ctx, const CgsConfig& cfg,
                                  const PromptTrainConfig& lower, Rng& rng) {
    if (cfg.rounds < 1 || cfg.prompt_steps < 0 || cfg.grad_accum < 1 || cfg.k < 1)
        throw ConfigError("greedy trigger search: bad configuration");
    if (ctx.trigger.empty()) throw ConfigError("greedy trigger search: empty trigger");
    if (ctx.held.empty()) throw ConfigError("greedy trigger search: empty held split");

    const auto pool = non_special_pool(ctx.m.vocab());
    auto counter = std::make_shared<int>(0);
    auto mixed = interleaved_provider(ctx, lower.batch_size, counter);
    auto held = held_provider(ctx, lower.batch_size);

    CgsTrace trace;
    for (int round = 0; round < cfg.rounds; ++round) {
        // Prompt refresh under the current trigger.
        PromptTrainConfig refresh = lower;
        refresh.steps = cfg.prompt_steps;
        refresh.cosine = false;
        ctx.prompt = tune_prompt_stream(ctx.m, Template::by_id(ctx.prompt.template_id), mixed,
                                        refresh, rng, &ctx.prompt);

        const Mat grad = trigger_gradient(ctx.m, ctx.prompt, held, cfg.grad_accum, rng);
        const double wsr_before =
            watermark_success_rate(ctx.m, ctx.held, ctx.prompt, ctx.signal, &ctx.trigger);

        // Score k candidates per position; commit the single best swap.
        CgsRound entry;
        double best_wsr = -1.0;
        for (int j = 0; j < static_cast<int>(ctx.trigger.size()); ++j) {
            auto cands = top_candidates(ctx.m, Vec(-grad.col(j)), pool, cfg.k);
            const TokenId incumbent = ctx.trigger[static_cast<std::size_t>(j)];
            for (TokenId c : cands) {
                if (c == incumbent) continue;
                std::vector<TokenId> probe = ctx.trigger;
                probe[static_cast<std::size_t>(j)] = c;
                const double w =
                    watermark_success_rate(ctx.m, ctx.held, ctx.prompt, ctx.signal, &probe);
                if (w > best_wsr) {
                    best_wsr = w;
                    entry.position = j;
                    entry.before = incumbent;
                    entry.after = c;
                }
            }
        }
        if (best_wsr < 0) continue;  // every candidate equals the incumbent everywhere
        ctx.trigger[static_cast<std::size_t>(entry.position)] = entry.after;
        entry.wsr_before = wsr_before;
        entry.wsr_after = best_wsr;
        entry.accepted = best_wsr >= wsr_before;
        trace.push_back(entry);
    }
    return trace;
}

InjectResult inject_watermark(const LmBackend& m, const Template& tmpl, const Corpus& train,
                              const TokenMap& map, const InjectConfig& cfg) {
    if (cfg.trigger_len < 1) throw ConfigError("injection: trigger length must be positive");
    if (cfg.warmup_steps < 0 || cfg.lower_steps < 0 || cfg.alternations < 0)
        throw ConfigError("injection: bad phase lengths");
    map.validate(m.vocab().size());

    Rng rng(derive_seed(cfg.seed, 0x1C));
    auto [clean, held] = split_watermark_set(train, cfg.holdout_fraction,
                                             derive_seed(cfg.seed, 0x1D));

    InjectionContext ctx{m, std::move(clean), std::move(held), map, {}, {}, {}, {}};

    // Phase 1: warm up the prompt on the clean split only.
    {
        PromptTrainConfig warm = cfg.prompt;
        warm.steps = cfg.warmup_steps;
        BatchProvider clean_only = [&ctx, &cfg](Rng& r) {
            TuningBatch b;
            const int want = std::min(cfg.prompt.batch_size, ctx.clean.size());
            for (int i : r.sample_without_replacement(ctx.clean.size(), want))
                b.examples.push_back(&ctx.clean.examples[i]);
            b.map = &ctx.map;
            return b;
        };
        ctx.prompt = tune_prompt_stream(m, tmpl, clean_only, warm, rng);
    }

    // Phase 2: pick the signal tokens under the warmed prompt.
    SignalConfig sig = cfg.signal;
    sig.seed = derive_seed(cfg.seed, 0x1E);
    auto selection = select_signal_tokens(m, ctx.clean, ctx.prompt, map, sig);
    ctx.signal = selection.chosen;
    ctx.merged = merge_label_tokens(map, ctx.signal);

    // Random initial trigger.
    const auto pool = non_special_pool(m.vocab());
    for (int i = 0; i < cfg.trigger_len; ++i)
        ctx.trigger.push_back(pool[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);

    // Phase 3: alternate interleaved prompt optimization with trigger search.
    auto counter = std::make_shared<int>(0);
    auto mixed = interleaved_provider(ctx, cfg.prompt.batch_size, counter);
    CgsTrace trace;
    for (int n = 0; n < cfg.alternations; ++n) {
        PromptTrainConfig lower = cfg.prompt;
        lower.steps = cfg.lower_steps;
        lower.cosine = false;
        ctx.prompt = tune_prompt_stream(m, tmpl, mixed, lower, rng, &ctx.prompt);
        auto rounds = constraint_greedy_search(ctx, cfg.cgs, cfg.prompt, rng);
        trace.insert(trace.end(), rounds.begin(), rounds.end());
    }

    InjectResult out;
    out.prompt = ctx.prompt;
    out.prompt.metadata["watermarked"] = "true";
    out.key.trigger = ctx.trigger;
    out.key.signal_tokens = ctx.signal;
    out.key.template_id = tmpl.id;
    out.key.seed = cfg.seed;
    out.trace = std::move(trace);
    out.metrics["wsr_trigger"] =
        watermark_success_rate(m, ctx.held, ctx.prompt, ctx.signal, &ctx.trigger);
    out.metrics["wsr_dormant"] =
        watermark_success_rate(m, ctx.held, ctx.prompt, ctx.signal, nullptr);
    out.metrics["clean_loss"] = [&] {
        std::vector<SequenceInput> seqs;
        std::vector<LossSpec> losses;
        const int n = std::min(ctx.clean.size(), 128);
        for (int i = 0; i < n; ++i) {
            seqs.push_back(render_prompted(m.vocab(), ctx.clean.examples[i], ctx.prompt));
            losses.push_back(label_loss(map, ctx.clean.examples[i].label));
        }
        return mean_loss(m, seqs, losses);
    }();
    return out;
}

}  // namespace promptcare
