// Shipping gate: runs the full desk-scale pipeline and checks every release
// criterion, one PASS/FAIL line each. Exit 0 iff all pass. Heavier arms are
// shared across criteria (the harmlessness prompts double as the ownership,
// robustness and false-positive subjects), so the whole suite is one pass.

#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "promptcare/attacks.hpp"
#include "promptcare/model.hpp"
#include "promptcare/prompt.hpp"
#include "promptcare/service.hpp"
#include "promptcare/stats.hpp"
#include "promptcare/task_gen.hpp"
#include "promptcare/verify.hpp"
#include "promptcare/watermark.hpp"
#include "support/fixtures.hpp"
#include "support/mock_backend.hpp"

using namespace promptcare;
namespace fs = std::filesystem;
namespace pt = promptcare::testing;

namespace {

// ---- pinned thresholds -----------------------------------------------------------------

constexpr double kCopyPMin = 0.5;           // 1: averaged p for the copied prompt
constexpr double kIndepPMax = 0.05;         // 1: averaged p for independent prompts
constexpr int kIndepArms = 10;              // 1: independent prompts tested
constexpr int kIndepRequired = 9;           // 1: arms that must fall below kIndepPMax
constexpr double kVerifyBudgetSec = 600.0;  // 1: wall clock for all verifications
constexpr double kDaccTolSlots = 0.05;      // 2: |wm - clean| accuracy gap, continuous
constexpr double kDaccTolTokens = 0.10;     // 2: |wm - clean| accuracy gap, discrete
constexpr double kWsrAfterFinetuneMin = 0.75;  // 3: success rate after removal finetuning
constexpr double kWsrLen2Min = 0.85;        // 4: success rate at trigger length 2
constexpr double kWsrLen5Min = 0.90;        // 4: success rate at trigger length 5
constexpr double kDaccSpreadMax = 0.03;     // 4: accuracy spread across lengths 1-5
constexpr double kFprMax = 0.10;            // 6: false positives over independent arms
constexpr double kGradRelErrMax = 1e-3;     // 7a: gradient vs finite differences
constexpr double kPermPTol = 0.02;          // 7c: |welch p - permutation p|

// Desk-scale pipeline operating point. Injection alternates a short lower
// (prompt) phase against trigger search; the clean baseline gets the same
// total number of prompt steps.
constexpr int kWarmupSteps = 60;
constexpr int kLowerSteps = 8;
constexpr int kAlternations = 10;
constexpr int kCleanSteps = kWarmupSteps + kAlternations * kLowerSteps;

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void progress(const std::string& msg) { std::fprintf(stderr, "  .. %s\n", msg.c_str()); }

// ---- shared arms -----------------------------------------------------------------------

struct World {
    TaskBundle bundle;
    std::unique_ptr<TransformerModel> model;
    const Template* tmpl = nullptr;
    fs::path work;

    // Keyed "<kind>:<seed>" for the three-seed pairs; trigger-length arms on
    // the side. Independent prompts and their verification reports are built
    // once and reused by the budget and false-positive checks.
    std::map<std::string, InjectResult> wm;
    std::map<std::string, PromptArtifact> clean;
    PromptArtifact tuned_copy;  // stolen prompt after a light fine-tune
    std::vector<PromptArtifact> independents;
    std::vector<VerificationReport> indep_reports;
    double verify_seconds = 0.0;
};

PromptTrainConfig prompt_cfg(PromptSpec::Kind kind, int steps, std::uint64_t seed) {
    PromptTrainConfig tc;
    tc.kind = kind;
    tc.m = kind == PromptSpec::Kind::Slots ? 16 : 4;
    tc.steps = steps;
    tc.batch_size = 16;
    tc.grad_accum = 8;
    tc.k = 10;
    tc.lr = 0.05;
    tc.seed = seed;
    return tc;
}

InjectResult inject_arm(const World& w, PromptSpec::Kind kind, std::uint64_t seed,
                        int trigger_len = 3) {
    InjectConfig ic;
    ic.prompt = prompt_cfg(kind, kLowerSteps, seed);
    ic.warmup_steps = kWarmupSteps;
    ic.lower_steps = kLowerSteps;
    ic.alternations = kAlternations;
    ic.cgs.rounds = 3;
    ic.cgs.prompt_steps = 8;
    ic.cgs.grad_accum = 8;
    ic.cgs.k = 10;
    ic.trigger_len = trigger_len;
    ic.holdout_fraction = 0.05;
    ic.signal.k = 5;
    ic.signal.probe_size = 200;
    ic.signal.probe_trigger_len = trigger_len;
    ic.signal.seed = seed;
    ic.seed = seed;
    return inject_watermark(*w.model, *w.tmpl, w.bundle.train, w.bundle.label_map, ic);
}

PromptArtifact tune_arm(const World& w, PromptSpec::Kind kind, std::uint64_t seed) {
    return train_prompt(*w.model, *w.tmpl, w.bundle.train, w.bundle.label_map,
                        prompt_cfg(kind, kCleanSteps, seed), nullptr);
}

double dacc(const World& w, const PromptArtifact& p) {
    return downstream_accuracy(*w.model, w.bundle.test, w.bundle.label_map, p);
}

double wsr(const World& w, const PromptArtifact& p, const WatermarkKey& key) {
    return watermark_success_rate(*w.model, w.bundle.test, p, key.signal_tokens, &key.trigger);
}

VerificationReport run_verify(const World& w, const InjectResult& defender,
                              const PromptArtifact& suspect, int n_queries) {
    LocalPromptService def(*w.model, defender.prompt);
    LocalPromptService sus(*w.model, suspect);
    VerifyConfig vc;
    vc.n_queries = n_queries;
    vc.tries = 10;
    vc.alpha = 0.05;
    vc.seed = 5;
    return verify_ownership(def, sus, w.bundle.test, defender.key, w.bundle.vocab, vc,
                            &w.bundle.lexicon);
}

// ---- criteria --------------------------------------------------------------------------

struct Line {
    bool ok = false;
    std::string detail;
};

// Watermarked vs budget-matched clean prompts, three seeds per kind; the
// continuous seed-1 arm (and its independents) also carries criteria 1/5/6.
Line crit_harmlessness(World& w) {
    std::ostringstream d;
    bool ok = true;
    for (auto [kind, tag, tol] :
         {std::tuple{PromptSpec::Kind::Slots, "slots", kDaccTolSlots},
          std::tuple{PromptSpec::Kind::Tokens, "tokens", kDaccTolTokens}}) {
        double wm_sum = 0.0, clean_sum = 0.0;
        for (std::uint64_t seed : {1, 2, 3}) {
            const std::string id = std::string(tag) + ":" + std::to_string(seed);
            progress("inject " + id);
            w.wm.emplace(id, inject_arm(w, kind, seed));
            progress("tune " + id);
            w.clean.emplace(id, tune_arm(w, kind, seed));
            wm_sum += dacc(w, w.wm.at(id).prompt);
            clean_sum += dacc(w, w.clean.at(id));
        }
        const double gap = std::abs(wm_sum - clean_sum) / 3.0;
        ok = ok && gap <= tol;
        d << tag << " |" << fmt("%.3f", wm_sum / 3) << "-" << fmt("%.3f", clean_sum / 3)
          << "|=" << fmt("%.3f", gap) << (gap <= tol ? " <= " : " > ") << fmt("%.2f", tol) << "; ";
    }
    return {ok, d.str()};
}

Line crit_ownership(World& w) {
    const auto& defender = w.wm.at("slots:1");
    // The unauthorized provider in the threat model may lightly fine-tune the
    // stolen prompt before deploying it; that copy must test positive just
    // like the verbatim one.
    progress("copy arms (verbatim + lightly tuned)");
    FinetuneConfig fc;
    fc.steps = 500;
    fc.batch_size = 16;
    fc.lr = 0.05;
    fc.seed = 1;
    w.tuned_copy = finetune_removal(*w.model, defender.prompt, w.bundle.train, w.bundle.label_map, fc);

    const auto t0 = std::chrono::steady_clock::now();
    const auto verbatim = run_verify(w, defender, defender.prompt, 512);
    const auto tuned = run_verify(w, defender, w.tuned_copy, 512);
    for (int i = 0; i < kIndepArms; ++i) {
        progress("independent prompt " + std::to_string(101 + i));
        w.independents.push_back(
            tune_arm(w, PromptSpec::Kind::Slots, static_cast<std::uint64_t>(101 + i)));
        w.indep_reports.push_back(run_verify(w, defender, w.independents.back(), 512));
    }
    w.verify_seconds = seconds_since(t0);

    int below = 0;
    double max_p = 0.0;
    for (const auto& r : w.indep_reports) {
        below += r.averaged_p < kIndepPMax ? 1 : 0;
        max_p = std::max(max_p, r.averaged_p);
    }
    const bool ok = verbatim.averaged_p >= kCopyPMin && tuned.averaged_p >= kCopyPMin &&
                    below >= kIndepRequired && w.verify_seconds < kVerifyBudgetSec;
    std::ostringstream d;
    d << "copy p=" << fmt("%.3f", verbatim.averaged_p) << " tuned-copy p="
      << fmt("%.3f", tuned.averaged_p) << ", indep max p=" << fmt("%.1e", max_p) << " ("
      << below << "/" << kIndepArms << " < 0.05), " << fmt("%.0f", w.verify_seconds) << "s < "
      << fmt("%.0f", kVerifyBudgetSec) << "s";
    return {ok, d.str()};
}

Line crit_robustness(World& w) {
    const auto& cont = w.wm.at("slots:1");
    progress("finetune removal, 2500 steps");
    FinetuneConfig fc;
    fc.steps = 2500;
    fc.batch_size = 16;
    fc.lr = 0.05;
    fc.seed = 1;
    const PromptArtifact scrubbed =
        finetune_removal(*w.model, cont.prompt, w.bundle.train, w.bundle.label_map, fc);
    const double after = wsr(w, scrubbed, cont.key);

    const auto& disc = w.wm.at("tokens:1");
    bool verdicts_ok = true;
    std::ostringstream syn;
    for (int n_d : {1, 2}) {
        progress("synonym swap n_d=" + std::to_string(n_d));
        const PromptArtifact swapped = synonym_replace(disc.prompt, n_d, w.bundle.lexicon, 11);
        const auto rep = run_verify(w, disc, swapped, 512);
        verdicts_ok = verdicts_ok && rep.is_copy();
        syn << "n_d=" << n_d << " p=" << fmt("%.3f", rep.averaged_p) << " " << rep.verdict << ", ";
    }
    const bool ok = after >= kWsrAfterFinetuneMin && verdicts_ok;
    return {ok, "finetune wsr " + fmt("%.2f", after) + " >= " + fmt("%.2f", kWsrAfterFinetuneMin) +
                    "; " + syn.str()};
}

// Trigger-length sweep on the continuous kind; length 3 reuses the
// harmlessness arm trained with the same seed.
Line crit_trigger_length(World& w) {
    std::map<int, InjectResult> arms;
    for (int len : {1, 2, 4, 5}) {
        progress("inject slots seed 2, trigger length " + std::to_string(len));
        arms.emplace(len, inject_arm(w, PromptSpec::Kind::Slots, 2, len));
    }
    double lo = 1.0, hi = 0.0, wsr2 = 0.0, wsr5 = 0.0;
    std::ostringstream d;
    for (int len : {1, 2, 3, 4, 5}) {
        const InjectResult& arm = len == 3 ? w.wm.at("slots:2") : arms.at(len);
        const double a = dacc(w, arm.prompt);
        lo = std::min(lo, a);
        hi = std::max(hi, a);
        if (len == 2) wsr2 = wsr(w, arm.prompt, arm.key);
        if (len == 5) wsr5 = wsr(w, arm.prompt, arm.key);
    }
    const bool ok = wsr2 >= kWsrLen2Min && wsr5 >= kWsrLen5Min && hi - lo < kDaccSpreadMax;
    d << "wsr len2 " << fmt("%.2f", wsr2) << ">=" << fmt("%.2f", kWsrLen2Min) << " len5 "
      << fmt("%.2f", wsr5) << ">=" << fmt("%.2f", kWsrLen5Min) << "; dacc spread "
      << fmt("%.3f", hi - lo) << " < " << fmt("%.2f", kDaccSpreadMax);
    return {ok, d.str()};
}

Line crit_query_budget(World& w) {
    const auto& defender = w.wm.at("slots:1");
    const auto copy_rep = run_verify(w, defender, defender.prompt, 128);
    const auto tuned_rep = run_verify(w, defender, w.tuned_copy, 128);
    int indep = 0;
    for (const auto& p : w.independents)
        indep += run_verify(w, defender, p, 128).is_copy() ? 0 : 1;
    const bool ok = copy_rep.is_copy() && tuned_rep.is_copy() && indep >= kIndepRequired;
    return {ok, "n=128: copy " + copy_rep.verdict + ", tuned copy " + tuned_rep.verdict + ", " +
                    std::to_string(indep) + "/" + std::to_string(kIndepArms) + " independent"};
}

Line crit_false_positives(World& w) {
    const double fpr = false_positive_rate(w.indep_reports, 0.05);
    return {fpr <= kFprMax,
            "fpr " + fmt("%.2f", fpr) + " <= " + fmt("%.2f", kFprMax) + " (alpha 0.05)"};
}

// ---- numeric oracles -------------------------------------------------------------------

// Permutation two-sample test with the mid-p tie convention, as an
// independent reference for the t approximation on indicator data.
double permutation_p(const std::vector<double>& a, const std::vector<double>& b, int shuffles,
                     Rng& rng) {
    const double observed = std::abs(welch_two_sample(a, b).t);
    std::vector<double> pool = a;
    pool.insert(pool.end(), b.begin(), b.end());
    const std::size_t n = a.size();
    int above = 0, ties = 0;
    std::vector<double> x(n), y(n);
    for (int s = 0; s < shuffles; ++s) {
        rng.shuffle(pool);
        std::copy(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n), x.begin());
        std::copy(pool.begin() + static_cast<std::ptrdiff_t>(n), pool.end(), y.begin());
        const auto r = welch_two_sample(x, y);
        const double t = std::isinf(r.t) ? 1e18 : std::abs(r.t);
        if (t > observed * (1.0 + 1e-9) + 1e-12)
            ++above;
        else if (t > observed * (1.0 - 1e-9) - 1e-12)
            ++ties;
    }
    return (above + 0.5 * ties) / shuffles;
}

Line crit_oracles() {
    // (a) input gradients vs central finite differences, two probes per case.
    TransformerModel model(pt::tiny_config(), pt::plain_vocab(40), 7);
    Rng rng(1234);
    double max_rel = 0.0;
    for (int c = 0; c < 100; ++c) {
        SequenceInput seq = pt::random_sequence(rng, model);
        LossSpec loss = pt::random_loss(rng, model);
        Mat g = model.grad_wrt_input_embeddings(seq, loss);
        const int mask_pos = seq.mask_position();
        for (int probe = 0; probe < 2; ++probe) {
            int pos;
            do {
                pos = static_cast<int>(rng.uniform_int(0, seq.length() - 1));
            } while (pos == mask_pos);
            const int coord = static_cast<int>(rng.uniform_int(0, model.embed_dim() - 1));
            max_rel = std::max(
                max_rel, pt::rel_err(g(pos, coord), pt::fd_input_grad(model, seq, loss, pos, coord)));
        }
    }
    const bool grad_ok = max_rel < kGradRelErrMax;

    // (b) the shared candidate-ranking primitive (used by both the prompt
    // search and the trigger search) vs an exhaustive dot-product sort.
    Rng crng(17);
    int exact = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const int dim = 4 + static_cast<int>(crng.uniform_int(0, 4));
        const int n = 10 + static_cast<int>(crng.uniform_int(0, 20));
        pt::MockBackend m(pt::plain_vocab(n), dim);
        std::vector<TokenId> pool;
        for (int i = 0; i < n; ++i) {
            Vec e(dim);
            for (int j = 0; j < dim; ++j) e[j] = crng.normal();
            const TokenId id = static_cast<TokenId>(Vocabulary::kNumSpecials + i);
            m.set_embedding(id, e);
            pool.push_back(id);
        }
        Vec dir(dim);
        for (int j = 0; j < dim; ++j) dir[j] = crng.normal();
        const int k = 1 + static_cast<int>(crng.uniform_int(0, 4));
        const auto got = top_candidates(m, dir, pool, k);

        std::vector<std::pair<double, TokenId>> ranked;
        for (TokenId t : pool) ranked.push_back({m.embedding(t).dot(dir), t});
        std::sort(ranked.begin(), ranked.end(), [](auto& a, auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        bool same = got.size() == static_cast<std::size_t>(k);
        for (int i = 0; same && i < k; ++i) same = got[static_cast<std::size_t>(i)] == ranked[i].second;
        exact += same ? 1 : 0;
    }

    // (c) t-test p-values vs a 10k-shuffle permutation oracle on indicator
    // samples around the operating point.
    Rng prng(20240817);
    double max_dp = 0.0;
    for (int pair = 0; pair < 50; ++pair) {
        const int n = 512;
        const double ra = 0.25 + 0.5 * static_cast<double>(prng.uniform_int(0, 1000)) / 1000.0;
        const double rb = std::clamp(
            ra + static_cast<double>(prng.uniform_int(0, 3) - 1) * 0.04, 0.05, 0.95);
        std::vector<double> a, b;
        for (int i = 0; i < n; ++i) {
            a.push_back(prng.bernoulli(ra) ? 1.0 : 0.0);
            b.push_back(prng.bernoulli(rb) ? 1.0 : 0.0);
        }
        max_dp = std::max(max_dp,
                          std::abs(welch_two_sample(a, b).p - permutation_p(a, b, 10000, prng)));
    }

    // (d) degenerate-variance conventions.
    std::vector<double> c(16, 0.25), ones(512, 1.0), zeros(512, 0.0);
    const auto same = welch_two_sample(c, c);
    const auto split = welch_two_sample(ones, zeros);
    const bool degen_ok = same.p == 1.0 && split.p == 0.0 && std::isinf(split.t) && split.t > 0;

    const bool ok = grad_ok && exact == 100 && max_dp <= kPermPTol && degen_ok;
    std::ostringstream d;
    d << "grad rel err max " << fmt("%.1e", max_rel) << "; candidates " << exact
      << "/100 exact; |welch-perm| max " << fmt("%.3f", max_dp) << "; degenerate "
      << (degen_ok ? "exact" : "WRONG");
    return {ok, d.str()};
}

// ---- determinism -----------------------------------------------------------------------

int run_cli(const std::string& args) {
    const std::string cmd = std::string(PROMPTCARE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// One tiny end-to-end pipeline under `root`: every artifact-producing
// command, replayed later under a second root for the byte comparison.
void run_tiny_pipeline(const fs::path& root) {
    const std::string R = root.string();
    const std::string tiny =
        " --set tune_steps=4 --set warmup_steps=4 --set lower_steps=2 --set alternations=1"
        " --set cgs_rounds=1 --set cgs_prompt_steps=1 --set signal_k=3 --set signal_probe_size=30"
        " --set trigger_len=2";
    fs::create_directories(root / "results");
    fs::create_directories(root / "secret");

    auto must = [](int rc, const std::string& what) {
        if (rc != 0) throw Error("determinism pipeline: " + what + " exited " + std::to_string(rc));
    };
    must(run_cli("make-task --out " + R + "/task --set train_size=100 --set test_size=60 --seed 3"),
         "make-task");
    must(run_cli("train-model --task " + R + "/task --out " + R +
                 "/model.bin --set model_steps=120 --seed 1"),
         "train-model");
    must(run_cli("tune --task " + R + "/task --model " + R + "/model.bin --out " + R +
                 "/results/tune --set tune_steps=4 --seed 1"),
         "tune");
    must(run_cli("inject --task " + R + "/task --model " + R + "/model.bin --out " + R +
                 "/results/wm --key " + R + "/secret/key.json" + tiny + " --seed 1"),
         "inject tokens");
    must(run_cli("inject --task " + R + "/task --model " + R + "/model.bin --out " + R +
                 "/results/wmc --key " + R + "/secret/keyc.json --set prompt_kind=slots" + tiny +
                 " --seed 1"),
         "inject slots");

    // A discrete prompt guaranteed to carry synonym-bearing tokens, so the
    // swap attack cannot run out of replacement sites.
    TaskBundle bundle = TaskBundle::load(R + "/task");
    PromptArtifact rich;
    rich.kind = PromptSpec::Kind::Tokens;
    rich.template_id = bundle.spec.template_id;
    for (const auto& [token, alts] : bundle.lexicon) {
        if (alts.empty() || rich.tokens.size() >= 4) continue;
        rich.tokens.push_back(token);
    }
    fs::create_directories(root / "results" / "rich");
    rich.save((root / "results" / "rich" / "prompt.json").string());

    must(run_cli("attack --method synonym --in " + R + "/results/rich/prompt.json --task " + R +
                 "/task --out " + R + "/results/syn --set n_d=2 --seed 11"),
         "attack synonym");
    must(run_cli("attack --method finetune --in " + R + "/results/wmc/prompt.json --task " + R +
                 "/task --model " + R + "/model.bin --out " + R +
                 "/results/ft --set n_c=30 --seed 1"),
         "attack finetune");
    must(run_cli("verify --task " + R + "/task --model " + R + "/model.bin --defender " + R +
                 "/results/wmc/prompt.json --key " + R + "/secret/keyc.json --suspect " + R +
                 "/results/wmc/prompt.json --out " + R +
                 "/results/ver --set n_queries=20 --set tries=2 --seed 5"),
         "verify");
    must(run_cli("report --dir " + R + "/results --out " + R + "/report"), "report");
}

Line crit_determinism(const fs::path& work) {
    const fs::path a = work / "replay_a";
    const fs::path b = work / "replay_b";
    progress("tiny pipeline, first run");
    run_tiny_pipeline(a);
    progress("tiny pipeline, replay");
    run_tiny_pipeline(b);

    std::vector<fs::path> rel;
    for (const auto& e : fs::recursive_directory_iterator(a))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), a));
    std::sort(rel.begin(), rel.end());

    int mismatched = 0;
    std::string first;
    for (const auto& r : rel) {
        if (!fs::exists(b / r) || slurp(a / r) != slurp(b / r)) {
            ++mismatched;
            if (first.empty()) first = r.string();
        }
    }
    int extra = 0;
    for (const auto& e : fs::recursive_directory_iterator(b))
        if (e.is_regular_file() && !fs::exists(a / fs::relative(e.path(), b))) ++extra;

    const bool ok = mismatched == 0 && extra == 0 && !rel.empty();
    std::string d = std::to_string(rel.size()) + " artifacts byte-identical across reruns";
    if (!ok)
        d = std::to_string(mismatched) + " mismatched, " + std::to_string(extra) +
            " extra (first: " + (first.empty() ? "-" : first) + ")";
    return {ok, d};
}

}  // namespace

int main() {
    ::unsetenv("PROMPTCARE_SEED");  // replay seeds below are pinned by config
    std::printf("== watermark toolkit acceptance ==\n");

    World w;
    char tmpl[] = "/tmp/promptcare_accept_XXXXXX";
    if (!mkdtemp(tmpl)) {
        std::printf("cannot create work directory\n");
        return 1;
    }
    w.work = tmpl;

    const auto t0 = std::chrono::steady_clock::now();
    w.bundle = TaskBundle::generate("desk-sent", GrammarConfig{}, 400, 600, 7);
    w.tmpl = &Template::by_id(w.bundle.spec.template_id);
    progress("reference model, 6000 steps");
    {
        TaskGrammar grammar(w.bundle.grammar);
        TrainConfig tc;
        w.model = std::make_unique<TransformerModel>(ModelConfig{}, w.bundle.vocab, 1);
        const auto trace = train_reference_model(*w.model, grammar.pretrain_stream(), tc);
        std::printf("bundle: %s train=%d test=%d; model loss %.4f after %.0fs\n",
                    w.bundle.spec.task_id.c_str(), static_cast<int>(w.bundle.train.size()),
                    static_cast<int>(w.bundle.test.size()), trace.empty() ? 0.0 : trace.back(),
                    seconds_since(t0));
    }

    struct Row {
        int idx;
        const char* name;
        Line line;
    };
    std::vector<Row> rows;
    rows.push_back({2, "downstream harmlessness", crit_harmlessness(w)});
    rows.push_back({1, "ownership separation", crit_ownership(w)});
    rows.push_back({3, "removal robustness", crit_robustness(w)});
    rows.push_back({4, "trigger-length stealth", crit_trigger_length(w)});
    rows.push_back({5, "low query budget", crit_query_budget(w)});
    rows.push_back({6, "false positive rate", crit_false_positives(w)});
    rows.push_back({7, "oracle agreement", crit_oracles()});
    rows.push_back({8, "deterministic replay", crit_determinism(w.work)});
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.idx < b.idx; });

    int passed = 0;
    for (const auto& r : rows) {
        std::printf("[%d] %-28s %s  %s\n", r.idx, r.name, r.line.ok ? "PASS" : "FAIL",
                    r.line.detail.c_str());
        passed += r.line.ok ? 1 : 0;
    }
    std::printf("result: %d/%zu criteria passed in %.0fs\n", passed, rows.size(),
                seconds_since(t0));

    std::error_code ec;
    fs::remove_all(w.work, ec);
    return passed == static_cast<int>(rows.size()) ? 0 : 1;
}
