// Python surface: the pipeline operations on artifact files, plus the
// statistics primitives. Thin wrappers over the C++ core; heavy calls release
// the GIL.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "promptcare/attacks.hpp"
#include "promptcare/model.hpp"
#include "promptcare/service.hpp"
#include "promptcare/stats.hpp"
#include "promptcare/task_gen.hpp"
#include "promptcare/verify.hpp"
#include "promptcare/watermark.hpp"

namespace py = pybind11;
using namespace promptcare;

namespace {

PromptSpec::Kind parse_kind(const std::string& kind) {
    if (kind == "tokens") return PromptSpec::Kind::Tokens;
    if (kind == "slots") return PromptSpec::Kind::Slots;
    throw ConfigError("kind must be tokens|slots, got '" + kind + "'");
}

ProbeMode parse_mode(const std::string& mode) {
    if (mode == "plain") return ProbeMode::Plain;
    if (mode == "swap") return ProbeMode::Swap;
    throw ConfigError("mode must be plain|swap, got '" + mode + "'");
}

struct LoadedTask {
    TaskBundle bundle;
    const Template* tmpl;
};

LoadedTask load_task(const std::string& dir) {
    LoadedTask t{TaskBundle::load(dir), nullptr};
    t.tmpl = &Template::by_id(t.bundle.spec.template_id);
    return t;
}

std::map<std::string, int> make_task(const std::string& out, const std::string& task,
                                     int train_size, int test_size, std::uint64_t seed,
                                     std::uint64_t grammar_seed, int vocab_target) {
    GrammarConfig gc;
    gc.seed = grammar_seed;
    gc.vocab_target = vocab_target;
    TaskBundle bundle = TaskBundle::generate(task, gc, train_size, test_size, seed);
    bundle.save(out);
    return {{"train", bundle.train.size()},
            {"test", bundle.test.size()},
            {"vocab", bundle.vocab.size()}};
}

double train_model(const std::string& task, const std::string& out, int steps, int batch_size,
                   double lr, std::uint64_t seed) {
    auto t = load_task(task);
    TaskGrammar grammar(t.bundle.grammar);
    TrainConfig tc;
    tc.steps = steps;
    tc.batch_size = batch_size;
    tc.lr = lr;
    tc.seed = seed;
    TransformerModel model(ModelConfig{}, t.bundle.vocab, seed);
    const auto trace = train_reference_model(model, grammar.pretrain_stream(), tc);
    model.save(out);
    return trace.empty() ? 0.0 : trace.back();
}

PromptTrainConfig prompt_config(const std::string& kind, int m, int steps, int batch_size,
                                int grad_accum, int k, double lr, std::uint64_t seed) {
    PromptTrainConfig tc;
    tc.kind = parse_kind(kind);
    tc.m = m;
    tc.steps = steps;
    tc.batch_size = batch_size;
    tc.grad_accum = grad_accum;
    tc.k = k;
    tc.lr = lr;
    tc.seed = seed;
    return tc;
}

std::map<std::string, double> tune_prompt(const std::string& task, const std::string& model_path,
                                          const std::string& out, const std::string& kind, int m,
                                          int steps, int batch_size, int grad_accum, int k,
                                          double lr, std::uint64_t seed) {
    auto t = load_task(task);
    auto model = TransformerModel::load(model_path);
    std::vector<double> trace;
    const auto tc = prompt_config(kind, m, steps, batch_size, grad_accum, k, lr, seed);
    PromptArtifact prompt =
        train_prompt(*model, *t.tmpl, t.bundle.train, t.bundle.label_map, tc, &trace);
    prompt.save(out);
    std::map<std::string, double> res{
        {"dacc_test", downstream_accuracy(*model, t.bundle.test, t.bundle.label_map, prompt)}};
    if (!trace.empty()) res["final_loss"] = trace.back();
    return res;
}

std::map<std::string, double> inject(const std::string& task, const std::string& model_path,
                                     const std::string& out_prompt, const std::string& out_key,
                                     const std::string& kind, int m, int lower_steps,
                                     int warmup_steps, int alternations, int batch_size,
                                     int grad_accum, int k, double lr, int cgs_rounds,
                                     int cgs_prompt_steps, int trigger_len, double holdout_p,
                                     int signal_k, int signal_probe_size, std::uint64_t seed) {
    auto t = load_task(task);
    auto model = TransformerModel::load(model_path);
    InjectConfig ic;
    ic.prompt = prompt_config(kind, m, lower_steps, batch_size, grad_accum, k, lr, seed);
    ic.warmup_steps = warmup_steps;
    ic.lower_steps = lower_steps;
    ic.alternations = alternations;
    ic.cgs.rounds = cgs_rounds;
    ic.cgs.prompt_steps = cgs_prompt_steps;
    ic.cgs.grad_accum = grad_accum;
    ic.cgs.k = k;
    ic.trigger_len = trigger_len;
    ic.holdout_fraction = holdout_p;
    ic.signal.k = signal_k;
    ic.signal.probe_size = signal_probe_size;
    ic.signal.probe_trigger_len = trigger_len;
    ic.signal.seed = seed;
    ic.seed = seed;
    InjectResult res = inject_watermark(*model, *t.tmpl, t.bundle.train, t.bundle.label_map, ic);
    res.prompt.save(out_prompt);
    res.key.save(out_key);
    auto metrics = res.metrics;
    metrics["dacc_test"] =
        downstream_accuracy(*model, t.bundle.test, t.bundle.label_map, res.prompt);
    return metrics;
}

void attack_synonym(const std::string& task, const std::string& prompt_in, const std::string& out,
                    int n_d, std::uint64_t seed) {
    auto t = load_task(task);
    PromptArtifact attacked =
        synonym_replace(PromptArtifact::load(prompt_in), n_d, t.bundle.lexicon, seed);
    attacked.save(out);
}

void attack_finetune(const std::string& task, const std::string& model_path,
                     const std::string& prompt_in, const std::string& out, int n_c, int batch_size,
                     double lr, std::uint64_t seed) {
    auto t = load_task(task);
    auto model = TransformerModel::load(model_path);
    FinetuneConfig fc;
    fc.steps = n_c;
    fc.batch_size = batch_size;
    fc.lr = lr;
    fc.seed = seed;
    PromptArtifact attacked = finetune_removal(*model, PromptArtifact::load(prompt_in),
                                               t.bundle.train, t.bundle.label_map, fc);
    attacked.save(out);
}

py::dict verify(const std::string& task, const std::string& model_path,
                const std::string& defender_path, const std::string& key_path,
                const std::string& suspect_spec, const std::string& report_out, int n_queries,
                int tries, double alpha, const std::string& mode, std::uint64_t seed) {
    VerificationReport report;
    {
        py::gil_scoped_release release;
        auto t = load_task(task);
        auto model = TransformerModel::load(model_path);
        LocalPromptService defender(*model, PromptArtifact::load(defender_path));
        std::unique_ptr<SuspectService> suspect;
        const std::string prefix = "http://";
        if (suspect_spec.rfind(prefix, 0) == 0) {
            const auto rest = suspect_spec.substr(prefix.size());
            const auto colon = rest.rfind(':');
            if (colon == std::string::npos)
                throw ConfigError("endpoint must be http://host:port");
            suspect = std::make_unique<HttpSuspectService>(rest.substr(0, colon),
                                                           std::stoi(rest.substr(colon + 1)));
        } else {
            suspect =
                std::make_unique<LocalPromptService>(*model, PromptArtifact::load(suspect_spec));
        }
        VerifyConfig vc;
        vc.n_queries = n_queries;
        vc.tries = tries;
        vc.alpha = alpha;
        vc.mode = parse_mode(mode);
        vc.seed = seed;
        report = verify_ownership(defender, *suspect, t.bundle.test, WatermarkKey::load(key_path),
                                  t.bundle.vocab, vc, &t.bundle.lexicon);
        if (!report_out.empty()) report.save(report_out);
    }
    py::dict out;
    out["averaged_p"] = report.averaged_p;
    out["verdict"] = report.verdict;
    py::list tries_out;
    for (const auto& r : report.records) {
        py::dict row;
        row["used"] = r.used;
        row["mean_defender"] = r.mean_defender;
        row["mean_suspect"] = r.mean_suspect;
        row["t"] = r.t;
        row["df"] = r.df;
        row["p"] = r.p;
        tries_out.append(row);
    }
    out["tries"] = tries_out;
    return out;
}

double success_rate(const std::string& task, const std::string& model_path,
                    const std::string& prompt_path, const std::string& key_path, bool dormant) {
    auto t = load_task(task);
    auto model = TransformerModel::load(model_path);
    const auto key = WatermarkKey::load(key_path);
    const auto prompt = PromptArtifact::load(prompt_path);
    return watermark_success_rate(*model, t.bundle.test, prompt, key.signal_tokens,
                                  dormant ? nullptr : &key.trigger);
}

double accuracy(const std::string& task, const std::string& model_path,
                const std::string& prompt_path) {
    auto t = load_task(task);
    auto model = TransformerModel::load(model_path);
    return downstream_accuracy(*model, t.bundle.test, t.bundle.label_map,
                               PromptArtifact::load(prompt_path));
}

}  // namespace

PYBIND11_MODULE(_promptcare, mod) {
    mod.doc() = "prompt watermarking toolkit";

    // Translators run newest-first: the base must be registered before the
    // subclasses so the specific mappings win.
    py::register_exception<Error>(mod, "ToolkitError", PyExc_RuntimeError);
    py::register_exception<ConfigError>(mod, "ToolkitConfigError", PyExc_ValueError);
    py::register_exception<FormatError>(mod, "FormatError", PyExc_ValueError);
    py::register_exception<KindError>(mod, "KindError", PyExc_TypeError);

    mod.def("incomplete_beta", &incomplete_beta, py::arg("a"), py::arg("b"), py::arg("x"),
            "Regularized incomplete beta function I_x(a, b).");
    mod.def("student_t_two_sided", &student_t_two_sided, py::arg("t"), py::arg("df"),
            "Two-sided tail probability of Student's t.");
    mod.def(
        "welch_two_sample",
        [](const std::vector<double>& a, const std::vector<double>& b) {
            const TestResult r = welch_two_sample(a, b);
            return py::make_tuple(r.t, r.df, r.p);
        },
        py::arg("sample1"), py::arg("sample2"),
        "Welch two-sample t-test on equal-sized samples; returns (t, df, p).");

    mod.def("make_task", &make_task, py::arg("out"), py::arg("task") = "desk-sent",
            py::arg("train_size") = 400, py::arg("test_size") = 200, py::arg("seed") = 1,
            py::arg("grammar_seed") = 1, py::arg("vocab_target") = 2000,
            py::call_guard<py::gil_scoped_release>(),
            "Generate a synthetic task bundle directory.");
    mod.def("train_model", &train_model, py::arg("task"), py::arg("out"), py::arg("steps") = 6000,
            py::arg("batch_size") = 32, py::arg("lr") = 2e-3, py::arg("seed") = 1,
            py::call_guard<py::gil_scoped_release>(),
            "Pretrain the reference model on the task grammar; returns the final loss.");
    mod.def("tune_prompt", &tune_prompt, py::arg("task"), py::arg("model"), py::arg("out"),
            py::arg("kind") = "tokens", py::arg("m") = 4, py::arg("steps") = 60,
            py::arg("batch_size") = 16, py::arg("grad_accum") = 8, py::arg("k") = 10,
            py::arg("lr") = 0.05, py::arg("seed") = 1,
            py::call_guard<py::gil_scoped_release>(),
            "Train a clean prompt artifact; returns test accuracy and final loss.");
    mod.def("inject", &inject, py::arg("task"), py::arg("model"), py::arg("out_prompt"),
            py::arg("out_key"), py::arg("kind") = "tokens", py::arg("m") = 4,
            py::arg("lower_steps") = 8, py::arg("warmup_steps") = 60, py::arg("alternations") = 10,
            py::arg("batch_size") = 16, py::arg("grad_accum") = 8, py::arg("k") = 10,
            py::arg("lr") = 0.05, py::arg("cgs_rounds") = 3, py::arg("cgs_prompt_steps") = 8,
            py::arg("trigger_len") = 3, py::arg("holdout_p") = 0.05, py::arg("signal_k") = 5,
            py::arg("signal_probe_size") = 200, py::arg("seed") = 1,
            py::call_guard<py::gil_scoped_release>(),
            "Bi-level watermark injection; writes prompt and key files, returns metrics.");
    mod.def("attack_synonym", &attack_synonym, py::arg("task"), py::arg("prompt_in"),
            py::arg("out"), py::arg("n_d") = 1, py::arg("seed") = 1,
            py::call_guard<py::gil_scoped_release>(),
            "Replace n_d discrete prompt tokens with lexicon synonyms.");
    mod.def("attack_finetune", &attack_finetune, py::arg("task"), py::arg("model"),
            py::arg("prompt_in"), py::arg("out"), py::arg("n_c") = 500, py::arg("batch_size") = 16,
            py::arg("lr") = 0.05, py::arg("seed") = 1,
            py::call_guard<py::gil_scoped_release>(),
            "Fine-tune a continuous prompt on clean data for n_c steps.");
    mod.def("verify", &verify, py::arg("task"), py::arg("model"), py::arg("defender"),
            py::arg("key"), py::arg("suspect"), py::arg("report_out") = "",
            py::arg("n_queries") = 512, py::arg("tries") = 10, py::arg("alpha") = 0.05,
            py::arg("mode") = "plain", py::arg("seed") = 1,
            "Black-box ownership verification; suspect is a prompt file or http://host:port.");
    mod.def("watermark_success_rate", &success_rate, py::arg("task"), py::arg("model"),
            py::arg("prompt"), py::arg("key"), py::arg("dormant") = false,
            py::call_guard<py::gil_scoped_release>(),
            "Fraction of test examples whose mask prediction lands in the signal set.");
    mod.def("downstream_accuracy", &accuracy, py::arg("task"), py::arg("model"),
            py::arg("prompt"), py::call_guard<py::gil_scoped_release>(),
            "Classification accuracy of a prompt on the task test split.");
}
