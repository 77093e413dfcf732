#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "promptcare/corpus.hpp"
#include "promptcare/model.hpp"
#include "promptcare/rng.hpp"

namespace promptcare {

// ---- task registry ------------------------------------------------------------

enum class TaskKind { SingleText, Pair };

struct TaskSpec {
    std::string task_id;
    TaskKind kind;
    std::string template_id;
};

const TaskSpec& task_by_id(const std::string& id);  // "desk-sent" | "desk-pair"
std::vector<std::string> task_ids();

// ---- generator ------------------------------------------------------------------

struct GrammarConfig {
    std::uint64_t seed = 1;
    int vocab_target = 2000;
    int min_text = 4;
    int max_text = 8;
    double tau_in_text = 0.35;    // probability a text carries a task-cue word
    double rare_in_text = 0.18;   // probability a text carries a rare-pool word
};

// Seeded template grammar producing the synthetic classification tasks and
// the masked-prediction pretraining stream for the reference model.
//
// Roles in the vocabulary:
//  - indicator words (synonym families) carry the class signal of a text;
//  - label tokens are the words the mask resolves to under the task rule;
//  - task-cue words sharpen the task rule: without one in the sequence the
//    emission is class-blind, so tuned prompts that supply task cues beat
//    the no-prompt baseline;
//  - a rare pool of words receives a small emission leak (geometrically
//    decaying), and appears in running text with strictly decreasing
//    frequency, so a frequency-ascending pick of salient non-label tokens is
//    deterministic;
//  - rare-cue words: cue i redirects the emission to the rare-pool bucket
//    {i, i+1, i+2}, but only reliably when a gate word is also present; a
//    cue alone leaks weakly and a gate alone is inert. Clean corpora contain
//    no cues or gates, so only a prompt that supplies gates (paired with a
//    trigger that supplies cues) activates the redirection.
class TaskGrammar {
  public:
    explicit TaskGrammar(const GrammarConfig& cfg);

    const GrammarConfig& config() const { return cfg_; }
    const Vocabulary& vocab() const { return vocab_; }
    const TokenMap& label_map(TaskKind kind) const;
    const std::vector<TokenId>& rare_pool() const { return rare_pool_; }
    const std::vector<std::vector<TokenId>>& cue_families() const { return cue_families_; }
    const std::vector<std::vector<TokenId>>& gate_families() const { return gate_families_; }
    const std::vector<std::vector<TokenId>>& task_cue_families() const {
        return task_cue_families_;
    }

    // Synonym relation over all families (indicators, cues, gates, task
    // cues, and a block of paired filler words).
    SynonymLexicon lexicon() const;

    // Labeled corpus of n examples. Texts are clean: no cues, no gates.
    Corpus make_corpus(TaskKind kind, int n, std::uint64_t seed) const;

    // Mixture stream for reference-model training. Stateful (keeps its own
    // rare-word scheduler), so obtain one stream per training run.
    std::function<PretrainExample(Rng&)> pretrain_stream() const;

  private:
    GrammarConfig cfg_;
    Vocabulary vocab_;
    std::vector<std::vector<TokenId>> indicator_families_[2];
    TokenMap single_map_, pair_map_;
    std::vector<TokenId> rare_pool_;
    std::vector<std::vector<TokenId>> cue_families_;
    std::vector<std::vector<TokenId>> gate_families_;
    std::vector<std::vector<TokenId>> task_cue_families_;
    std::vector<TokenId> fillers_;
    std::vector<double> filler_weights_;
    std::size_t paired_fillers_ = 0;
    TokenId period_ = 0;

    friend struct GrammarSampler;
};

// ---- on-disk task bundle ---------------------------------------------------------

// Directory layout written by `make-task` and consumed by every other
// command: task.json, vocab.txt, train.tsv, test.tsv, label_map.json,
// lexicon.tsv.
struct TaskBundle {
    TaskSpec spec;
    GrammarConfig grammar;
    Corpus train, test;
    TokenMap label_map;
    SynonymLexicon lexicon;
    Vocabulary vocab;

    static TaskBundle generate(const std::string& task_id, const GrammarConfig& cfg,
                               int train_size, int test_size, std::uint64_t corpus_seed);
    void save(const std::string& dir) const;
    static TaskBundle load(const std::string& dir);
};

}  // namespace promptcare
