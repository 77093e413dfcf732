#include "promptcare/prompt.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"
#include "promptcare/errors.hpp"
#include "promptcare/serialize.hpp"
#include "promptcare/util.hpp"

namespace promptcare {

using nlohmann::json;

// ---- artifact -------------------------------------------------------------------

int PromptArtifact::length() const {
    return kind == PromptSpec::Kind::Slots ? static_cast<int>(slots.cols())
                                           : static_cast<int>(tokens.size());
}

PromptSpec PromptArtifact::spec() const {
    switch (kind) {
        case PromptSpec::Kind::Tokens:
            return PromptSpec::discrete(tokens);
        case PromptSpec::Kind::Slots:
            return PromptSpec::continuous(static_cast<int>(slots.cols()));
        case PromptSpec::Kind::None:
            break;
    }
    throw KindError("prompt artifact has no content kind");
}

void PromptArtifact::save(const std::string& path) const {
    json doc;
    doc["format_version"] = 1;
    doc["template_id"] = template_id;
    doc["seed"] = seed;
    doc["metadata"] = metadata;
    switch (kind) {
        case PromptSpec::Kind::Tokens:
            doc["kind"] = "tokens";
            doc["tokens"] = tokens;
            break;
        case PromptSpec::Kind::Slots:
            doc["kind"] = "slots";
            doc["dim"] = slots.rows();
            doc["m"] = slots.cols();
            doc["slots"] = mat_to_base64(slots);
            break;
        case PromptSpec::Kind::None:
            throw KindError("cannot save a prompt artifact without content");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write prompt file " + path);
    out << doc.dump(2) << '\n';
}

PromptArtifact PromptArtifact::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read prompt file " + path);
    json doc = json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw FormatError("prompt file is not valid JSON: " + path);
    if (doc.value("format_version", 0) != 1)
        throw FormatError("prompt file has an unsupported format version");
    PromptArtifact art;
    art.template_id = doc.at("template_id").get<std::string>();
    art.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("metadata"))
        art.metadata = doc.at("metadata").get<std::map<std::string, std::string>>();
    const std::string kind = doc.at("kind").get<std::string>();
    if (kind == "tokens") {
        art.kind = PromptSpec::Kind::Tokens;
        art.tokens = doc.at("tokens").get<std::vector<TokenId>>();
    } else if (kind == "slots") {
        art.kind = PromptSpec::Kind::Slots;
        art.slots = mat_from_base64(doc.at("slots").get<std::string>(), doc.at("dim").get<int>(),
                                    doc.at("m").get<int>());
    } else {
        throw FormatError("prompt file has unknown kind '" + kind + "'");
    }
    return art;
}

SequenceInput render_prompted(const Vocabulary& vocab, const LabeledExample& example,
                              const PromptArtifact& prompt, const std::vector<TokenId>* trigger) {
    const Template& tmpl = Template::by_id(prompt.template_id);
    SequenceInput seq = render_template(tmpl, vocab, example, prompt.spec(), trigger);
    if (prompt.kind == PromptSpec::Kind::Slots) {
        for (int j = 0; j < prompt.slots.cols(); ++j)
            seq.slot_embeddings.push_back(prompt.slots.col(j));
    }
    return seq;
}

std::vector<SequenceInput> render_prompted_batch(const Vocabulary& vocab,
                                                 const std::vector<LabeledExample>& examples,
                                                 const PromptArtifact& prompt,
                                                 const std::vector<TokenId>* trigger) {
    std::vector<SequenceInput> seqs;
    seqs.reserve(examples.size());
    for (const auto& ex : examples) seqs.push_back(render_prompted(vocab, ex, prompt, trigger));
    return seqs;
}

// ---- objective pieces -------------------------------------------------------------

LossSpec label_loss(const TokenMap& map, int label) { return {map.tokens_for(label), -1.0}; }

double mean_loss(const LmBackend& m, const std::vector<SequenceInput>& seqs,
                 const std::vector<LossSpec>& losses) {
    if (seqs.empty() || seqs.size() != losses.size())
        throw ConfigError("mean_loss: sequence/loss count mismatch");
    auto preds = m.mask_distribution_batch(seqs);
    double total = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        double mass = 0;
        for (TokenId t : losses[i].target_set) mass += preds[i].probabilities[t];
        mass = std::max(mass, 1e-300);
        total += losses[i].sign * std::log(mass);
    }
    return total / static_cast<double>(seqs.size());
}

std::vector<double> candidate_scores(const LmBackend& m, const Vec& direction,
                                     const std::vector<TokenId>& pool) {
    if (direction.size() != m.embed_dim())
        throw ConfigError("candidate_scores: direction has the wrong dimension");
    std::vector<double> scores(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        scores[i] = m.embedding(pool[i]).dot(direction);
    return scores;
}

std::vector<TokenId> top_candidates(const LmBackend& m, const Vec& direction,
                                    const std::vector<TokenId>& pool, int k) {
    auto scores = candidate_scores(m, direction, pool);
    auto idx = topk_lowest(scores, k);
    std::vector<TokenId> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(pool[i]);
    return out;
}

std::vector<TokenId> non_special_pool(const Vocabulary& vocab) {
    std::vector<TokenId> pool;
    for (TokenId t = Vocabulary::kNumSpecials; t < vocab.size(); ++t) pool.push_back(t);
    return pool;
}

void update_continuous(PromptArtifact& prompt, const Mat& grad, double lr) {
    if (prompt.kind != PromptSpec::Kind::Slots)
        throw KindError("continuous update on a non-continuous prompt");
    if (grad.rows() != prompt.slots.rows() || grad.cols() != prompt.slots.cols())
        throw ConfigError("continuous update: gradient shape mismatch");
    prompt.slots -= lr * grad;
}

// ---- tuning -------------------------------------------------------------------------

namespace {

void check_stream_config(const PromptTrainConfig& cfg) {
    if (cfg.kind == PromptSpec::Kind::None) throw ConfigError("prompt tuning: kind is none");
    if (cfg.m < 1) throw ConfigError("prompt tuning: prompt length must be positive");
    if (cfg.steps < 0 || cfg.batch_size < 1 || cfg.grad_accum < 1 || cfg.k < 1)
        throw ConfigError("prompt tuning: bad optimization parameters");
    if (cfg.lr <= 0) throw ConfigError("prompt tuning: step size must be positive");
}

std::vector<const LabeledExample*> draw_batch(const Corpus& corpus, int batch_size, Rng& rng) {
    const int n = corpus.size();
    const int want = std::min(batch_size, n);
    auto idx = rng.sample_without_replacement(n, want);
    std::vector<const LabeledExample*> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(&corpus.examples[i]);
    return out;
}

struct RenderedBatch {
    std::vector<SequenceInput> seqs;
    std::vector<LossSpec> losses;
};

RenderedBatch render_tuning_batch(const Vocabulary& vocab, const TuningBatch& batch,
                                  const PromptArtifact& art) {
    if (batch.examples.empty() || !batch.map)
        throw ConfigError("prompt tuning: provider served an empty batch");
    RenderedBatch out;
    for (const auto* ex : batch.examples) {
        out.seqs.push_back(render_prompted(vocab, *ex, art, batch.trigger));
        out.losses.push_back(label_loss(*batch.map, ex->label));
    }
    return out;
}

}  // namespace

PromptArtifact tune_prompt_stream(const LmBackend& m, const Template& tmpl,
                                  const BatchProvider& next, const PromptTrainConfig& cfg,
                                  Rng& rng, const PromptArtifact* warm_start,
                                  std::vector<double>* trace) {
    check_stream_config(cfg);
    const auto pool = non_special_pool(m.vocab());

    PromptArtifact art;
    if (warm_start) {
        if (warm_start->kind == PromptSpec::Kind::None)
            throw KindError("warm start prompt has no content");
        art = *warm_start;
    } else {
        art.kind = cfg.kind;
        art.seed = cfg.seed;
        if (cfg.kind == PromptSpec::Kind::Tokens) {
            for (int j = 0; j < cfg.m; ++j)
                art.tokens.push_back(pool[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))]);
        } else {
            // Slots start at the embeddings of random tokens plus a small
            // perturbation.
            art.slots = Mat(m.embed_dim(), cfg.m);
            for (int j = 0; j < cfg.m; ++j) {
                const TokenId t = pool[static_cast<std::size_t>(
                    rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];
                Vec col = m.embedding(t);
                for (int r = 0; r < col.size(); ++r) col[r] += 0.01 * rng.normal();
                art.slots.col(j) = col;
            }
        }
    }
    art.template_id = tmpl.id;
    const int mlen = art.length();

    if (art.kind == PromptSpec::Kind::Tokens) {
        for (int step = 0; step < cfg.steps; ++step) {
            const int pos = step % mlen;

            // Averaged gradient at this prompt position.
            Vec g = Vec::Zero(m.embed_dim());
            long count = 0;
            for (int a = 0; a < cfg.grad_accum; ++a) {
                auto rb = render_tuning_batch(m.vocab(), next(rng), art);
                auto eval = m.eval_batch(rb.seqs, rb.losses);
                for (std::size_t i = 0; i < rb.seqs.size(); ++i) {
                    g += eval.input_grads[i].row(rb.seqs[i].prompt_begin + pos).transpose();
                    ++count;
                }
            }
            g /= static_cast<double>(count);

            auto cands = top_candidates(m, Vec(-g), pool, cfg.k);

            // Score the incumbent and every candidate on one shared batch;
            // strictly better wins, candidate ties to the lowest id.
            auto batch = next(rng);
            auto rb = render_tuning_batch(m.vocab(), batch, art);
            double best = mean_loss(m, rb.seqs, rb.losses);
            TokenId incumbent = art.tokens[static_cast<std::size_t>(pos)];
            TokenId winner = incumbent;
            for (TokenId c : cands) {
                if (c == incumbent) continue;
                art.tokens[static_cast<std::size_t>(pos)] = c;
                auto rc = render_tuning_batch(m.vocab(), batch, art);
                const double l = mean_loss(m, rc.seqs, rc.losses);
                if (l < best) {
                    best = l;
                    winner = c;
                }
            }
            art.tokens[static_cast<std::size_t>(pos)] = winner;
            if (trace) trace->push_back(best);
        }
        return art;
    }

    for (int step = 0; step < cfg.steps; ++step) {
        auto rb = render_tuning_batch(m.vocab(), next(rng), art);
        auto eval = m.eval_batch(rb.seqs, rb.losses);
        Mat g = Mat::Zero(m.embed_dim(), mlen);
        for (std::size_t i = 0; i < rb.seqs.size(); ++i) {
            for (int j = 0; j < mlen; ++j)
                g.col(j) += eval.input_grads[i].row(rb.seqs[i].prompt_begin + j).transpose();
        }
        g /= static_cast<double>(rb.seqs.size());
        const double lr_t =
            cfg.cosine ? cfg.lr * 0.5 * (1.0 + std::cos(M_PI * step / std::max(1, cfg.steps)))
                       : cfg.lr;
        update_continuous(art, g, lr_t);
        if (trace) {
            double mean = 0;
            for (double l : eval.loss) mean += l;
            trace->push_back(mean / static_cast<double>(eval.loss.size()));
        }
    }
    return art;
}

PromptArtifact train_prompt(const LmBackend& m, const Template& tmpl, const Corpus& corpus,
                            const TokenMap& map, const PromptTrainConfig& cfg,
                            std::vector<double>* trace) {
    if (corpus.empty()) throw ConfigError("prompt tuning needs a non-empty corpus");
    check_stream_config(cfg);
    map.validate(m.vocab().size());

    Rng rng(derive_seed(cfg.seed, 0x9A));
    BatchProvider next = [&corpus, &map, &cfg](Rng& r) {
        TuningBatch b;
        b.examples = draw_batch(corpus, cfg.batch_size, r);
        b.map = &map;
        return b;
    };
    return tune_prompt_stream(m, tmpl, next, cfg, rng, nullptr, trace);
}

double downstream_accuracy(const LmBackend& m, const Corpus& corpus, const TokenMap& map,
                           const PromptArtifact& prompt, const std::vector<TokenId>* trigger) {
    if (corpus.empty()) throw ConfigError("accuracy needs a non-empty corpus");
    map.validate(m.vocab().size());
    int hits = 0;
    const int chunk = 256;
    for (int base = 0; base < corpus.size(); base += chunk) {
        std::vector<SequenceInput> seqs;
        const int end = std::min(corpus.size(), base + chunk);
        for (int i = base; i < end; ++i)
            seqs.push_back(render_prompted(m.vocab(), corpus.examples[i], prompt, trigger));
        auto preds = m.mask_distribution_batch(seqs);
        for (int i = base; i < end; ++i) {
            const auto& p = preds[static_cast<std::size_t>(i - base)].probabilities;
            double best = -1;
            int best_cls = 0;
            for (int cls = 0; cls < map.num_classes(); ++cls) {
                double s = 0;
                for (TokenId t : map.tokens_for(cls)) s += p[t];
                if (s > best) {
                    best = s;
                    best_cls = cls;
                }
            }
            hits += best_cls == corpus.examples[i].label;
        }
    }
    return static_cast<double>(hits) / corpus.size();
}

}  // namespace promptcare
