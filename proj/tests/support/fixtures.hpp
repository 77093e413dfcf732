#pragma once

// Shared helpers for the test suites: small vocabularies, random model
// inputs, and the independent gradient oracle (central finite differences).

#include <string>
#include <vector>

#include "promptcare/model.hpp"
#include "promptcare/rng.hpp"

namespace promptcare::testing {

// n plain surface forms w0..w{n-1} after the four specials.
inline Vocabulary plain_vocab(int n) {
    std::vector<std::string> words;
    words.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
    return Vocabulary(words);
}

inline ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.ffn_mult = 4;
    cfg.max_len = 16;
    return cfg;
}

// Random sequence: one [MASK], a few token positions, a few raw-embedding
// slots. Tokens avoid specials other than the mask.
inline SequenceInput random_sequence(Rng& rng, const TransformerModel& model, int min_len = 5,
                                     int max_len = 12, int max_slots = 3) {
    const int len = static_cast<int>(rng.uniform_int(min_len, max_len));
    const int mask_pos = static_cast<int>(rng.uniform_int(0, len - 1));
    int slots = static_cast<int>(rng.uniform_int(0, max_slots));
    SequenceInput seq;
    for (int i = 0; i < len; ++i) {
        if (i == mask_pos) {
            seq.tokens.push_back(Vocabulary::kMask);
        } else if (slots > 0 && rng.bernoulli(0.3)) {
            --slots;
            seq.tokens.push_back(SequenceInput::kEmbedSlot);
            Vec e(model.embed_dim());
            for (int j = 0; j < model.embed_dim(); ++j) e(j) = rng.normal(0.0, 0.05);
            seq.slot_embeddings.push_back(e);
        } else {
            seq.tokens.push_back(static_cast<TokenId>(
                rng.uniform_int(Vocabulary::kNumSpecials, model.vocab().size() - 1)));
        }
    }
    return seq;
}

// Random loss target set (distinct tokens, either sign).
inline LossSpec random_loss(Rng& rng, const TransformerModel& model, int max_set = 8) {
    const int n = static_cast<int>(rng.uniform_int(1, max_set));
    auto picks = rng.sample_without_replacement(model.vocab().size(), n);
    LossSpec spec;
    for (int p : picks) spec.target_set.push_back(static_cast<TokenId>(p));
    spec.sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
    return spec;
}

inline double loss_value(const TransformerModel& model, const SequenceInput& seq,
                         const LossSpec& loss) {
    return model.eval_batch({seq}, {loss}).loss[0];
}

// Central finite difference of the loss with respect to one coordinate of
// the input embedding at `pos`. Token positions are converted to an
// equivalent raw-embedding slot so the coordinate can be nudged.
inline double fd_input_grad(const TransformerModel& model, const SequenceInput& seq,
                            const LossSpec& loss, int pos, int coord, double h = 1e-5) {
    SequenceInput s = seq;
    if (s.tokens[static_cast<std::size_t>(pos)] != SequenceInput::kEmbedSlot) {
        // Replace the token with its own embedding vector.
        Vec e = model.embedding(s.tokens[static_cast<std::size_t>(pos)]);
        int slot_index = 0;
        for (int i = 0; i < pos; ++i)
            if (s.tokens[static_cast<std::size_t>(i)] == SequenceInput::kEmbedSlot) ++slot_index;
        s.tokens[static_cast<std::size_t>(pos)] = SequenceInput::kEmbedSlot;
        s.slot_embeddings.insert(s.slot_embeddings.begin() + slot_index, e);
    }
    int slot_index = 0;
    for (int i = 0; i < pos; ++i)
        if (s.tokens[static_cast<std::size_t>(i)] == SequenceInput::kEmbedSlot) ++slot_index;
    SequenceInput splus = s;
    SequenceInput sminus = s;
    splus.slot_embeddings[static_cast<std::size_t>(slot_index)](coord) += h;
    sminus.slot_embeddings[static_cast<std::size_t>(slot_index)](coord) -= h;
    return (loss_value(model, splus, loss) - loss_value(model, sminus, loss)) / (2.0 * h);
}

inline double rel_err(double a, double b) {
    const double scale = std::max({1e-6, std::abs(a), std::abs(b)});
    return std::abs(a - b) / scale;
}

}  // namespace promptcare::testing
