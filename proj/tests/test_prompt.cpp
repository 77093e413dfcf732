#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <set>

#include "doctest.h"
#include "promptcare/errors.hpp"
#include "promptcare/model.hpp"
#include "promptcare/prompt.hpp"
#include "support/fixtures.hpp"
#include "support/mock_backend.hpp"

using namespace promptcare;
using testing::MockBackend;
namespace fs = std::filesystem;

namespace {

// "."=4, w0=5, w1=6, ...
Vocabulary dot_vocab(int n) {
    std::vector<std::string> words{"."};
    for (int i = 0; i < n; ++i) words.push_back("w" + std::to_string(i));
    return Vocabulary(words);
}

std::string temp_file(const std::string& name) {
    static int counter = 0;
    return (fs::temp_directory_path() /
            ("promptcare-prompt-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++) + "-" + name))
        .string();
}

}  // namespace

// ---- artifact round-trips --------------------------------------------------------

TEST_CASE("discrete prompt artifact round-trips through JSON") {
    PromptArtifact art;
    art.kind = PromptSpec::Kind::Tokens;
    art.template_id = "sst2";
    art.tokens = {9, 5, 11, 7};
    art.seed = 42;
    art.metadata = {{"role", "tuned"}, {"note", "x"}};
    auto path = temp_file("discrete.json");
    art.save(path);
    auto back = PromptArtifact::load(path);
    CHECK(back.kind == PromptSpec::Kind::Tokens);
    CHECK(back.template_id == "sst2");
    CHECK(back.tokens == art.tokens);
    CHECK(back.seed == 42);
    CHECK(back.metadata == art.metadata);
    CHECK(back.length() == 4);
    fs::remove(path);
}

TEST_CASE("continuous prompt artifact restores exact weights") {
    Rng rng(3);
    PromptArtifact art;
    art.kind = PromptSpec::Kind::Slots;
    art.template_id = "qqp";
    art.slots = Mat(8, 4);
    for (int i = 0; i < art.slots.size(); ++i) art.slots.data()[i] = rng.normal();
    auto path = temp_file("continuous.json");
    art.save(path);
    auto back = PromptArtifact::load(path);
    CHECK(back.kind == PromptSpec::Kind::Slots);
    CHECK(back.length() == 4);
    REQUIRE(back.slots.rows() == 8);
    REQUIRE(back.slots.cols() == 4);
    for (int i = 0; i < art.slots.size(); ++i)
        CHECK(back.slots.data()[i] == art.slots.data()[i]);  // bit-exact
    fs::remove(path);
}

TEST_CASE("artifact load rejects malformed files") {
    CHECK_THROWS_AS(PromptArtifact::load("/nonexistent/prompt.json"), ConfigError);

    auto path = temp_file("bad.json");
    {
        std::ofstream out(path);
        out << "{not json";
    }
    CHECK_THROWS_AS(PromptArtifact::load(path), FormatError);
    {
        std::ofstream out(path);
        out << R"({"format_version": 9, "kind": "tokens", "template_id": "sst2"})";
    }
    CHECK_THROWS_AS(PromptArtifact::load(path), FormatError);
    {
        std::ofstream out(path);
        out << R"({"format_version": 1, "kind": "wavelet", "template_id": "sst2"})";
    }
    CHECK_THROWS_AS(PromptArtifact::load(path), FormatError);
    fs::remove(path);

    PromptArtifact none;
    none.kind = PromptSpec::Kind::None;
    CHECK_THROWS_AS(none.save(temp_file("none.json")), KindError);
    CHECK_THROWS_AS(none.spec(), KindError);
}

TEST_CASE("rendering an artifact fills spans and slot vectors") {
    auto v = dot_vocab(6);
    LabeledExample ex{{"w0 w1"}, 0};

    PromptArtifact disc;
    disc.kind = PromptSpec::Kind::Tokens;
    disc.template_id = "sst2";
    disc.tokens = {7, 8};
    std::vector<TokenId> trig{9, 10};
    auto seq = render_prompted(v, ex, disc, &trig);
    CHECK(seq.tokens == std::vector<TokenId>{5, 6, 9, 10, 7, 8, Vocabulary::kMask, 4});
    CHECK(seq.trigger_begin == 2);
    CHECK(seq.trigger_len == 2);
    CHECK(seq.prompt_begin == 4);
    CHECK(seq.prompt_len == 2);

    PromptArtifact cont;
    cont.kind = PromptSpec::Kind::Slots;
    cont.template_id = "sst2";
    cont.slots = Mat::Ones(4, 3);
    cont.slots.col(1) *= 2.0;
    auto cseq = render_prompted(v, ex, cont);
    CHECK(cseq.prompt_begin == 2);
    CHECK(cseq.prompt_len == 3);
    REQUIRE(cseq.slot_embeddings.size() == 3);
    CHECK(cseq.slot_embeddings[1][0] == 2.0);
    CHECK(std::count(cseq.tokens.begin(), cseq.tokens.end(), SequenceInput::kEmbedSlot) == 3);
}

// ---- candidate scoring -------------------------------------------------------------

TEST_CASE("candidate scores are embedding dot products") {
    MockBackend m(dot_vocab(3), 2);
    m.set_embedding(5, (Vec(2) << 1, 0).finished());
    m.set_embedding(6, (Vec(2) << 0, 1).finished());
    m.set_embedding(7, (Vec(2) << 1, 1).finished());
    Vec dir = (Vec(2) << 2, 1).finished();
    std::vector<TokenId> pool{5, 6, 7};

    auto scores = candidate_scores(m, dir, pool);
    CHECK(scores == std::vector<double>{2, 1, 3});
    CHECK(top_candidates(m, dir, pool, 2) == std::vector<TokenId>{7, 5});

    SUBCASE("zero direction ties to the lowest ids") {
        CHECK(top_candidates(m, Vec::Zero(2), pool, 2) == std::vector<TokenId>{5, 6});
    }
    SUBCASE("k beyond the pool throws") {
        CHECK_THROWS_AS(top_candidates(m, dir, pool, 4), ConfigError);
    }
    SUBCASE("dimension mismatch throws") {
        CHECK_THROWS_AS(candidate_scores(m, Vec::Zero(3), pool), ConfigError);
    }
}

TEST_CASE("top candidates agree with exhaustive dot-product ranking") {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = 4 + static_cast<int>(rng.uniform_int(0, 4));
        const int n = 10 + static_cast<int>(rng.uniform_int(0, 20));
        MockBackend m(dot_vocab(n), dim);
        std::vector<TokenId> pool;
        for (int i = 0; i < n; ++i) {
            Vec e(dim);
            for (int d = 0; d < dim; ++d) e[d] = rng.normal();
            m.set_embedding(5 + i, e);
            pool.push_back(5 + i);
        }
        Vec dir(dim);
        for (int d = 0; d < dim; ++d) dir[d] = rng.normal();

        const int k = 1 + static_cast<int>(rng.uniform_int(0, 4));
        auto got = top_candidates(m, dir, pool, k);

        // Brute force: sort (score desc, id asc).
        std::vector<std::pair<double, TokenId>> ranked;
        for (TokenId t : pool) ranked.push_back({m.embedding(t).dot(dir), t});
        std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        REQUIRE(got.size() == static_cast<std::size_t>(k));
        for (int i = 0; i < k; ++i) CHECK(got[static_cast<std::size_t>(i)] == ranked[i].second);
    }
}

// ---- continuous update ---------------------------------------------------------------

TEST_CASE("continuous update arithmetic") {
    PromptArtifact art;
    art.kind = PromptSpec::Kind::Slots;
    art.template_id = "sst2";
    art.slots = (Mat(2, 1) << 1, 1).finished();
    Mat g = (Mat(2, 1) << 2, -2).finished();

    SUBCASE("hand oracle") {
        update_continuous(art, g, 0.5);
        CHECK(art.slots(0, 0) == 0.0);
        CHECK(art.slots(1, 0) == 2.0);
    }
    SUBCASE("zero step size is a bit-exact no-op") {
        Mat before = art.slots;
        update_continuous(art, g, 0.0);
        CHECK((art.slots - before).cwiseAbs().maxCoeff() == 0.0);
    }
    SUBCASE("two steps compose additively") {
        PromptArtifact twice = art;
        update_continuous(twice, g, 0.25);
        update_continuous(twice, g, 0.25);
        update_continuous(art, g, 0.5);
        CHECK((art.slots - twice.slots).cwiseAbs().maxCoeff() < 1e-15);
    }
    SUBCASE("wrong kind and wrong shape throw") {
        PromptArtifact disc;
        disc.kind = PromptSpec::Kind::Tokens;
        disc.tokens = {5};
        CHECK_THROWS_AS(update_continuous(disc, g, 0.1), KindError);
        Mat bad = Mat::Zero(3, 1);
        CHECK_THROWS_AS(update_continuous(art, bad, 0.1), ConfigError);
    }
}

// ---- loss helpers ---------------------------------------------------------------------

TEST_CASE("label loss and mean loss arithmetic") {
    auto v = dot_vocab(6);
    TokenMap map{{{5, 6}, {7}}};
    auto spec = label_loss(map, 1);
    CHECK(spec.target_set == std::vector<TokenId>{7});
    CHECK(spec.sign == -1.0);

    MockBackend m(v, 2);
    m.distribution = [&](const SequenceInput&) {
        Vec p = Vec::Zero(v.size());
        p[5] = 0.5;
        p[6] = 0.25;
        p[7] = 0.25;
        return p;
    };
    SequenceInput seq;
    seq.tokens = {5, Vocabulary::kMask};
    double l = mean_loss(m, {seq, seq}, {label_loss(map, 0), label_loss(map, 1)});
    // (-log 0.75 - log 0.25) / 2
    CHECK(std::abs(l - 0.5 * (-std::log(0.75) - std::log(0.25))) < 1e-12);

    CHECK_THROWS_AS(mean_loss(m, {}, {}), ConfigError);
    CHECK_THROWS_AS(mean_loss(m, {seq}, {}), ConfigError);
}

// ---- tuning -----------------------------------------------------------------------------

namespace {

// Tiny real model + binary task for optimization tests. Full-corpus batches
// make the scoring objective deterministic.
struct TuneFixture {
    Vocabulary vocab = dot_vocab(26);
    ModelConfig mc = promptcare::testing::tiny_config();
    TransformerModel model{mc, vocab, 5};
    Corpus corpus;
    TokenMap map{{{5}, {6}}};  // w0 vs w1

    TuneFixture() {
        for (int i = 0; i < 10; ++i) {
            LabeledExample ex;
            ex.label = i % 2;
            ex.texts = {std::string(ex.label ? "w3 w4" : "w2 w5") + " w" +
                        std::to_string(6 + i % 4)};
            corpus.examples.push_back(ex);
        }
    }
};

}  // namespace

TEST_CASE("discrete tuning decreases the full-batch loss monotonically") {
    TuneFixture f;
    PromptTrainConfig cfg;
    cfg.kind = PromptSpec::Kind::Tokens;
    cfg.m = 3;
    cfg.steps = 9;
    cfg.batch_size = 32;  // >= corpus -> deterministic scoring batch
    cfg.grad_accum = 2;
    cfg.k = 6;
    cfg.seed = 11;
    std::vector<double> trace;
    auto art = train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg, &trace);
    CHECK(art.kind == PromptSpec::Kind::Tokens);
    CHECK(art.tokens.size() == 3);
    REQUIRE(trace.size() == 9);
    for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-12);
    CHECK(trace.back() < trace.front());

    SUBCASE("same seed reproduces the prompt") {
        auto again = train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg);
        CHECK(again.tokens == art.tokens);
    }
    SUBCASE("another seed starts from a different prompt") {
        cfg.steps = 0;  // initialization only
        auto init_a = train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg);
        cfg.seed = 12;
        auto init_b = train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg);
        CHECK(init_a.tokens != init_b.tokens);
    }
}

TEST_CASE("continuous tuning descends with few reversals") {
    TuneFixture f;
    PromptTrainConfig cfg;
    cfg.kind = PromptSpec::Kind::Slots;
    cfg.m = 4;
    cfg.steps = 30;
    cfg.batch_size = 32;
    cfg.lr = 0.05;
    cfg.seed = 21;
    std::vector<double> trace;
    auto art = train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg, &trace);
    CHECK(art.kind == PromptSpec::Kind::Slots);
    CHECK(art.slots.rows() == f.model.embed_dim());
    CHECK(art.slots.cols() == 4);
    REQUIRE(trace.size() == 30);
    int reversals = 0;
    for (std::size_t i = 1; i < trace.size(); ++i) reversals += trace[i] > trace[i - 1] + 1e-9;
    CHECK(reversals <= 5);
    CHECK(trace.back() < trace.front());

    auto again = train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg);
    CHECK((again.slots - art.slots).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("tuning rejects bad configurations") {
    TuneFixture f;
    PromptTrainConfig cfg;
    cfg.kind = PromptSpec::Kind::None;
    CHECK_THROWS_AS(train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg),
                    ConfigError);
    cfg.kind = PromptSpec::Kind::Tokens;
    cfg.m = 0;
    CHECK_THROWS_AS(train_prompt(f.model, Template::by_id("sst2"), f.corpus, f.map, cfg),
                    ConfigError);
    cfg.m = 2;
    CHECK_THROWS_AS(train_prompt(f.model, Template::by_id("sst2"), Corpus{}, f.map, cfg),
                    ConfigError);
}

// ---- accuracy ---------------------------------------------------------------------------

TEST_CASE("uniform predictions give exactly the lowest-class base rate") {
    auto v = dot_vocab(8);
    MockBackend m(v, 2);  // default distribution is uniform
    TokenMap map{{{5}, {6}}};
    Corpus c;
    for (int i = 0; i < 6; ++i) c.examples.push_back({{"w2"}, i % 2});
    PromptArtifact art;
    art.kind = PromptSpec::Kind::Tokens;
    art.template_id = "sst2";
    art.tokens = {7};
    // Ties resolve to class 0, which is correct for exactly half the corpus.
    CHECK(downstream_accuracy(m, c, map, art) == 0.5);
}

TEST_CASE("accuracy reads the class mass at the mask") {
    auto v = dot_vocab(8);
    MockBackend m(v, 2);
    TokenMap map{{{5}, {6}}};
    // Predict class by the first token: w2 -> class 0 heavy, w3 -> class 1.
    m.distribution = [&](const SequenceInput& seq) {
        Vec p = Vec::Constant(v.size(), 1e-6);
        const bool zero = seq.tokens[0] == 6 + 1;  // "w2"
        p[5] = zero ? 0.6 : 0.1;
        p[6] = zero ? 0.1 : 0.6;
        return Vec(p / p.sum());
    };
    Corpus c;
    c.examples = {{{"w2 w4"}, 0}, {{"w3 w4"}, 1}, {{"w2"}, 1}, {{"w3"}, 0}};
    PromptArtifact art;
    art.kind = PromptSpec::Kind::Tokens;
    art.template_id = "sst2";
    art.tokens = {7};
    CHECK(downstream_accuracy(m, c, map, art) == 0.5);  // first two right, last two wrong

    CHECK_THROWS_AS(downstream_accuracy(m, Corpus{}, map, art), ConfigError);
}

TEST_CASE("non-special pool covers the tail of the vocabulary") {
    auto v = dot_vocab(3);
    auto pool = non_special_pool(v);
    CHECK(pool == std::vector<TokenId>{4, 5, 6, 7});
}
