// promptcare: prompt watermarking toolkit CLI.
//
// Subcommands cover the full pipeline: task generation, reference-model
// training, prompt tuning, watermark injection, removal attacks, black-box
// ownership verification, result aggregation, and a suspect HTTP service.
// Every command snapshots its effective configuration next to its outputs so
// any artifact can be replayed byte-identically.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "promptcare/attacks.hpp"
#include "promptcare/config.hpp"
#include "promptcare/model.hpp"
#include "promptcare/service.hpp"
#include "promptcare/task_gen.hpp"
#include "promptcare/verify.hpp"
#include "promptcare/watermark.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace promptcare;

namespace {

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << text;
}

void write_replay(const Config& cfg, const fs::path& path) { write_text(path, cfg.render()); }

// One experiment cell: a labeled point consumed by `report`.
void write_metrics(const fs::path& dir, const std::string& sweep, double x,
                   const std::map<std::string, double>& values) {
    json doc;
    doc["format_version"] = 1;
    doc["sweep"] = sweep.empty() ? "misc" : sweep;
    doc["x"] = x;
    doc["values"] = json::object();
    for (const auto& [k, v] : values) doc["values"][k] = v;
    write_text(dir / "metrics.json", doc.dump(2) + "\n");
}

fs::path ensure_dir(const std::string& dir) {
    fs::path p(dir);
    fs::create_directories(p);
    return p;
}

PromptSpec::Kind kind_from(const Config& cfg) {
    const auto& k = cfg.get("prompt_kind");
    if (k == "tokens") return PromptSpec::Kind::Tokens;
    if (k == "slots") return PromptSpec::Kind::Slots;
    throw ConfigError("prompt_kind must be tokens|slots, got '" + k + "'");
}

PromptTrainConfig prompt_train_config(const Config& cfg) {
    PromptTrainConfig tc;
    tc.kind = kind_from(cfg);
    tc.m = static_cast<int>(cfg.get_int(tc.kind == PromptSpec::Kind::Tokens ? "m" : "continuous_m"));
    tc.steps = static_cast<int>(cfg.get_int("tune_steps"));
    tc.batch_size = static_cast<int>(cfg.get_int("batch_size"));
    tc.grad_accum = static_cast<int>(cfg.get_int("grad_accum"));
    tc.k = static_cast<int>(cfg.get_int("candidates_k"));
    tc.lr = cfg.get_double("lr");
    tc.seed = cfg.seed();
    return tc;
}

struct LoadedTask {
    TaskBundle bundle;
    const Template* tmpl = nullptr;
};

LoadedTask load_task(const std::string& dir) {
    LoadedTask t{TaskBundle::load(dir), nullptr};
    t.tmpl = &Template::by_id(t.bundle.spec.template_id);
    return t;
}

std::string fmt(double v) { return json(v).dump(); }

// ---- subcommands ------------------------------------------------------------------

int cmd_make_task(Config cfg, const std::string& out) {
    GrammarConfig gc;
    gc.seed = static_cast<std::uint64_t>(cfg.get_int("grammar_seed"));
    gc.vocab_target = static_cast<int>(cfg.get_int("vocab_target"));
    const int train_n = static_cast<int>(cfg.get_int("train_size"));
    const int test_n = static_cast<int>(cfg.get_int("test_size"));
    TaskBundle bundle =
        TaskBundle::generate(cfg.get("task"), gc, train_n, test_n, cfg.seed());
    const fs::path dir = ensure_dir(out);
    bundle.save(dir.string());
    write_replay(cfg, dir / "replay.cfg");
    std::cout << "task " << bundle.spec.task_id << ": " << bundle.train.size() << " train / "
              << bundle.test.size() << " test, vocab " << bundle.vocab.size() << "\n";
    return 0;
}

int cmd_train_model(Config cfg, const std::string& task_dir, const std::string& out) {
    auto task = load_task(task_dir);
    TaskGrammar grammar(task.bundle.grammar);
    TrainConfig tc;
    tc.steps = static_cast<int>(cfg.get_int("model_steps"));
    tc.batch_size = static_cast<int>(cfg.get_int("model_batch"));
    tc.lr = cfg.get_double("model_lr");
    tc.seed = cfg.seed();
    TransformerModel model(ModelConfig{}, task.bundle.vocab, tc.seed);
    const auto trace = train_reference_model(model, grammar.pretrain_stream(), tc);
    fs::create_directories(fs::path(out).parent_path().empty() ? "." : fs::path(out).parent_path());
    model.save(out);
    std::ostringstream log;
    log << "# promptcare train-model loss trace v1\n";
    for (std::size_t i = 0; i < trace.size(); ++i) log << i << "\t" << fmt(trace[i]) << "\n";
    write_text(out + ".log", log.str());
    write_replay(cfg, out + ".replay.cfg");
    std::cout << "model saved to " << out << " (final loss "
              << (trace.empty() ? std::string("n/a") : fmt(trace.back())) << ")\n";
    return 0;
}

int cmd_tune(Config cfg, const std::string& task_dir, const std::string& model_path,
             const std::string& out, const std::string& sweep, double x) {
    auto task = load_task(task_dir);
    auto model = TransformerModel::load(model_path);
    const PromptTrainConfig tc = prompt_train_config(cfg);
    std::vector<double> trace;
    PromptArtifact prompt =
        train_prompt(*model, *task.tmpl, task.bundle.train, task.bundle.label_map, tc, &trace);
    prompt.metadata["command"] = "tune";
    prompt.metadata["task"] = task.bundle.spec.task_id;
    const double dacc =
        downstream_accuracy(*model, task.bundle.test, task.bundle.label_map, prompt);
    const fs::path dir = ensure_dir(out);
    prompt.save((dir / "prompt.json").string());
    std::ostringstream log;
    log << "# promptcare tune loss trace v1\n";
    for (std::size_t i = 0; i < trace.size(); ++i) log << i << "\t" << fmt(trace[i]) << "\n";
    write_text(dir / "tune.log", log.str());
    std::map<std::string, double> values{{"dacc_test", dacc}};
    if (!trace.empty()) values["final_loss"] = trace.back();
    write_metrics(dir, sweep, x, values);
    write_replay(cfg, dir / "replay.cfg");
    std::cout << "tuned " << cfg.get("prompt_kind") << " prompt, length " << prompt.length()
              << ", test accuracy " << fmt(dacc) << "\n";
    return 0;
}

int cmd_inject(Config cfg, const std::string& task_dir, const std::string& model_path,
               const std::string& out, const std::string& key_path, const std::string& sweep,
               double x) {
    const fs::path dir = ensure_dir(out);
    const fs::path key_abs = fs::weakly_canonical(fs::path(key_path));
    const fs::path out_abs = fs::weakly_canonical(dir);
    if (key_abs == fs::weakly_canonical(dir / "prompt.json"))
        throw ConfigError("refusing to write the key over the prompt file");
    if (key_abs.parent_path() == out_abs)
        throw ConfigError("refusing to write the key into the prompt output directory: " +
                          out_abs.string());

    auto task = load_task(task_dir);
    auto model = TransformerModel::load(model_path);
    InjectConfig ic;
    ic.prompt = prompt_train_config(cfg);
    ic.warmup_steps = static_cast<int>(cfg.get_int("warmup_steps"));
    ic.lower_steps = static_cast<int>(cfg.get_int("lower_steps"));
    ic.alternations = static_cast<int>(cfg.get_int("alternations"));
    ic.cgs.rounds = static_cast<int>(cfg.get_int("cgs_rounds"));
    ic.cgs.prompt_steps = static_cast<int>(cfg.get_int("cgs_prompt_steps"));
    ic.cgs.grad_accum = static_cast<int>(cfg.get_int("grad_accum"));
    ic.cgs.k = static_cast<int>(cfg.get_int("cgs_k"));
    ic.trigger_len = static_cast<int>(cfg.get_int("trigger_len"));
    ic.holdout_fraction = cfg.get_double("holdout_p");
    ic.signal.k = static_cast<int>(cfg.get_int("signal_k"));
    ic.signal.probe_size = static_cast<int>(cfg.get_int("signal_probe_size"));
    ic.signal.probe_trigger_len = ic.trigger_len;
    ic.signal.seed = cfg.seed();
    ic.seed = cfg.seed();

    InjectResult res =
        inject_watermark(*model, *task.tmpl, task.bundle.train, task.bundle.label_map, ic);
    res.prompt.metadata["command"] = "inject";
    res.prompt.metadata["task"] = task.bundle.spec.task_id;
    res.prompt.metadata["holdout_p"] = fmt(ic.holdout_fraction);
    res.key.metadata["task"] = task.bundle.spec.task_id;
    res.prompt.save((dir / "prompt.json").string());
    res.key.save(key_path);

    auto values = res.metrics;
    values["dacc_test"] =
        downstream_accuracy(*model, task.bundle.test, task.bundle.label_map, res.prompt);
    write_metrics(dir, sweep, x, values);
    write_replay(cfg, dir / "replay.cfg");
    std::cout << "watermarked prompt saved; wsr_trigger " << fmt(values["wsr_trigger"])
              << ", wsr_dormant " << fmt(values["wsr_dormant"]) << ", test accuracy "
              << fmt(values["dacc_test"]) << "\n";
    return 0;
}

int cmd_attack(Config cfg, const std::string& in, const std::string& out,
               const std::string& method, const std::string& task_dir,
               const std::string& model_path, const std::string& sweep, double x) {
    PromptArtifact prompt = PromptArtifact::load(in);
    PromptArtifact attacked;
    std::map<std::string, double> values;
    if (method == "synonym") {
        if (task_dir.empty()) throw ConfigError("attack synonym needs --task for the lexicon");
        auto task = load_task(task_dir);
        const int n_d = static_cast<int>(cfg.get_int("n_d"));
        attacked = synonym_replace(prompt, n_d, task.bundle.lexicon, cfg.seed());
        attacked.metadata["attack"] = "synonym";
        attacked.metadata["n_d"] = std::to_string(n_d);
        values["n_d"] = n_d;
    } else if (method == "finetune") {
        if (task_dir.empty() || model_path.empty())
            throw ConfigError("attack finetune needs --task and --model");
        auto task = load_task(task_dir);
        auto model = TransformerModel::load(model_path);
        FinetuneConfig fc;
        fc.steps = static_cast<int>(cfg.get_int("n_c"));
        fc.batch_size = static_cast<int>(cfg.get_int("batch_size"));
        fc.lr = cfg.get_double("attack_lr");
        fc.seed = cfg.seed();
        attacked = finetune_removal(*model, prompt, task.bundle.train, task.bundle.label_map, fc);
        attacked.metadata["attack"] = "finetune";
        attacked.metadata["n_c"] = std::to_string(fc.steps);
        values["n_c"] = fc.steps;
    } else {
        throw ConfigError("unknown attack method '" + method + "' (synonym|finetune)");
    }
    const fs::path dir = ensure_dir(out);
    attacked.save((dir / "prompt.json").string());
    write_metrics(dir, sweep, x, values);
    write_replay(cfg, dir / "replay.cfg");
    std::cout << "attacked prompt saved to " << (dir / "prompt.json").string() << "\n";
    return 0;
}

// "http://host:port" -> (host, port). Anything else is a prompt file path.
std::optional<std::pair<std::string, int>> parse_endpoint(const std::string& spec) {
    const std::string prefix = "http://";
    if (spec.rfind(prefix, 0) != 0) return std::nullopt;
    const auto rest = spec.substr(prefix.size());
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= rest.size())
        throw ConfigError("endpoint must be http://host:port, got '" + spec + "'");
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(rest.substr(colon + 1), &used);
        if (used != rest.size() - colon - 1) throw std::invalid_argument(spec);
    } catch (const std::exception&) {
        throw ConfigError("bad port in endpoint '" + spec + "'");
    }
    return std::make_pair(rest.substr(0, colon), port);
}

int cmd_verify(Config cfg, const std::string& task_dir, const std::string& model_path,
               const std::string& defender_path, const std::string& key_path,
               const std::string& suspect_spec, const std::string& out, const std::string& sweep,
               double x) {
    auto task = load_task(task_dir);
    auto model = TransformerModel::load(model_path);
    LocalPromptService defender(*model, PromptArtifact::load(defender_path));
    std::unique_ptr<SuspectService> suspect;
    if (auto ep = parse_endpoint(suspect_spec)) {
        auto http = std::make_unique<HttpSuspectService>(ep->first, ep->second);
        if (!http->healthy())
            throw ConfigError("suspect endpoint " + suspect_spec + " is not responding");
        suspect = std::move(http);
    } else {
        suspect = std::make_unique<LocalPromptService>(*model, PromptArtifact::load(suspect_spec));
    }
    const WatermarkKey key = WatermarkKey::load(key_path);

    VerifyConfig vc;
    vc.n_queries = static_cast<int>(cfg.get_int("n_queries"));
    vc.tries = static_cast<int>(cfg.get_int("tries"));
    vc.alpha = cfg.get_double("alpha");
    const auto& mode = cfg.get("probe_mode");
    if (mode == "plain")
        vc.mode = ProbeMode::Plain;
    else if (mode == "swap")
        vc.mode = ProbeMode::Swap;
    else
        throw ConfigError("probe_mode must be plain|swap, got '" + mode + "'");
    vc.seed = cfg.seed();

    VerificationReport report = verify_ownership(defender, *suspect, task.bundle.test, key,
                                                 task.bundle.vocab, vc, &task.bundle.lexicon);
    const fs::path dir = ensure_dir(out);
    report.save((dir / "report.jsonl").string());
    std::map<std::string, double> values{{"averaged_p", report.averaged_p},
                                         {"copy", report.is_copy() ? 1.0 : 0.0}};
    write_metrics(dir, sweep, x, values);
    write_replay(cfg, dir / "replay.cfg");
    std::cout << "verdict " << report.verdict << ", averaged p " << fmt(report.averaged_p)
              << " over " << report.tries << " tries\n";
    return report.is_copy() ? 0 : 1;
}

// Aggregate every metrics.json under `dir` into per-sweep CSV tables.
int cmd_report(const std::string& dir, std::string out) {
    const fs::path root(dir);
    if (!fs::is_directory(root)) throw ConfigError("not a directory: " + dir);
    if (out.empty()) out = (root / "report").string();
    const fs::path out_abs = fs::weakly_canonical(fs::path(out));

    std::vector<fs::path> cells;
    std::vector<fs::path> secrets;
    for (auto it = fs::recursive_directory_iterator(root); it != fs::recursive_directory_iterator();
         ++it) {
        if (it->is_directory()) {
            if (fs::weakly_canonical(it->path()) == out_abs) it.disable_recursion_pending();
            continue;
        }
        if (!it->is_regular_file()) continue;
        if (it->path().filename() == "metrics.json") cells.push_back(it->path());
        // Path policy: secret key files must never sit in a results tree.
        if (it->path().extension() == ".json") {
            std::ifstream in(it->path());
            std::string head(4096, '\0');
            in.read(head.data(), static_cast<std::streamsize>(head.size()));
            head.resize(static_cast<std::size_t>(in.gcount()));
            if (head.find("\"SECRET\"") != std::string::npos) secrets.push_back(it->path());
        }
    }
    if (!secrets.empty())
        throw ConfigError("secret key file inside results directory: " + secrets.front().string());
    if (cells.empty()) throw ConfigError("no metrics.json cells under " + dir);
    std::sort(cells.begin(), cells.end());

    struct Cell {
        double x;
        std::string path;
        std::map<std::string, double> values;
    };
    std::map<std::string, std::vector<Cell>> sweeps;
    for (const auto& p : cells) {
        std::ifstream in(p);
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& e) {
            throw FormatError(p.string() + ": " + e.what());
        }
        if (doc.value("format_version", 0) != 1)
            throw FormatError(p.string() + ": unsupported metrics format");
        Cell c;
        c.x = doc.value("x", 0.0);
        c.path = fs::relative(p, root).string();
        for (auto& [k, v] : doc.at("values").items()) c.values[k] = v.get<double>();
        sweeps[doc.value("sweep", "misc")].push_back(std::move(c));
    }

    const fs::path out_dir = ensure_dir(out);
    std::ostringstream summary;
    summary << "# promptcare report v1\n";
    for (auto& [name, rows] : sweeps) {
        std::stable_sort(rows.begin(), rows.end(),
                         [](const Cell& a, const Cell& b) { return a.x < b.x; });
        std::set<std::string> keys;
        for (const auto& r : rows)
            for (const auto& [k, _] : r.values) keys.insert(k);
        std::ostringstream csv;
        csv << "x";
        for (const auto& k : keys) csv << "," << k;
        csv << ",cell\n";
        std::map<std::string, std::pair<double, int>> acc;
        for (const auto& r : rows) {
            csv << fmt(r.x);
            for (const auto& k : keys) {
                csv << ",";
                auto it = r.values.find(k);
                if (it != r.values.end()) {
                    csv << fmt(it->second);
                    acc[k].first += it->second;
                    acc[k].second += 1;
                }
            }
            csv << "," << r.path << "\n";
        }
        csv << "mean";
        for (const auto& k : keys) {
            csv << ",";
            if (acc[k].second > 0) csv << fmt(acc[k].first / acc[k].second);
        }
        csv << ",\n";
        write_text(out_dir / (name + ".csv"), csv.str());
        summary << name << ": " << rows.size() << " cells, columns";
        for (const auto& k : keys) summary << " " << k;
        summary << "\n";
    }
    write_text(out_dir / "summary.txt", summary.str());
    std::cout << "report written to " << out_dir.string() << " (" << sweeps.size()
              << " sweeps, " << cells.size() << " cells)\n";
    return 0;
}

int cmd_serve_suspect(const std::string& model_path, const std::string& prompt_path,
                      const std::string& policy_path, const std::string& host, int port) {
    auto model = TransformerModel::load(model_path);
    PromptArtifact prompt = PromptArtifact::load(prompt_path);
    AdversaryPolicy policy;
    if (!policy_path.empty()) policy = AdversaryPolicy::load(policy_path, model->vocab());
    SuspectServer server(*model, std::move(prompt), std::move(policy));
    int bound = port;
    if (port == 0) bound = server.bind_any_port(host);
    std::cout << "listening on " << host << ":" << bound << std::endl;
    const bool ok = port == 0 ? server.listen_after_bind() : server.listen(host, port);
    if (!ok) throw ConfigError("server failed on " + host + ":" + std::to_string(port));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"prompt watermarking toolkit"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> sets;
    std::optional<long long> seed_flag;
    app.add_option("--config", config_path, "config file (key = value, include supported)")
        ->expected(1);
    app.add_option("--set", sets, "override a config key, KEY=VALUE (repeatable)");
    app.add_option("--seed", seed_flag, "override the config seed");

    auto make_config = [&]() {
        Config cfg = config_path.empty() ? Config::defaults() : Config::from_file(config_path);
        // Auxiliary keys with defaults not in the core set.
        auto aux = [&](const char* k, const char* v) {
            if (!cfg.has(k)) cfg.set(k, v);
        };
        aux("grammar_seed", "1");
        aux("vocab_target", "2000");
        aux("train_size", "400");
        aux("test_size", "200");
        aux("model_steps", "6000");
        aux("model_batch", "32");
        aux("model_lr", "0.002");
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos || eq == 0)
                throw ConfigError("--set expects KEY=VALUE, got '" + s + "'");
            cfg.set(s.substr(0, eq), s.substr(eq + 1));
        }
        if (seed_flag) {
            if (*seed_flag < 0) throw ConfigError("seed must be non-negative");
            cfg.set("seed", std::to_string(*seed_flag));
        }
        return cfg;
    };

    std::string task_dir, model_path, out, in, key_path, suspect, method = "synonym";
    std::string policy_path, host = "127.0.0.1", sweep;
    double x = 0.0;
    int port = 0;

    auto add_subcommand = [&](const char* name, const char* desc) {
        auto* sc = app.add_subcommand(name, desc);
        sc->fallthrough();  // global --config/--set/--seed may follow the subcommand
        return sc;
    };

    auto* sc_make = add_subcommand("make-task", "generate a synthetic task bundle");
    sc_make->add_option("--out", out, "output directory")->required();

    auto* sc_train = add_subcommand("train-model", "pretrain the reference model");
    sc_train->add_option("--task", task_dir, "task bundle directory")->required();
    sc_train->add_option("--out", out, "model checkpoint path")->required();

    auto add_cell_flags = [&](CLI::App* sc) {
        sc->add_option("--sweep", sweep, "sweep name for report aggregation");
        sc->add_option("--x", x, "sweep coordinate of this cell");
    };

    auto* sc_tune = add_subcommand("tune", "train a clean prompt");
    sc_tune->add_option("--task", task_dir, "task bundle directory")->required();
    sc_tune->add_option("--model", model_path, "reference model checkpoint")->required();
    sc_tune->add_option("--out", out, "output directory")->required();
    add_cell_flags(sc_tune);

    auto* sc_inject = add_subcommand("inject", "train a watermarked prompt and its key");
    sc_inject->add_option("--task", task_dir, "task bundle directory")->required();
    sc_inject->add_option("--model", model_path, "reference model checkpoint")->required();
    sc_inject->add_option("--out", out, "output directory for the prompt")->required();
    sc_inject->add_option("--key", key_path, "secret key path (kept outside --out)")->required();
    add_cell_flags(sc_inject);

    auto* sc_attack = add_subcommand("attack", "derive an attacked prompt");
    sc_attack->add_option("--in", in, "prompt artifact to attack")->required();
    sc_attack->add_option("--out", out, "output directory")->required();
    sc_attack->add_option("--method", method, "synonym | finetune");
    sc_attack->add_option("--task", task_dir, "task bundle directory");
    sc_attack->add_option("--model", model_path, "reference model (finetune)");
    add_cell_flags(sc_attack);

    auto* sc_verify = add_subcommand("verify", "test a suspect service for the watermark");
    sc_verify->add_option("--task", task_dir, "task bundle directory")->required();
    sc_verify->add_option("--model", model_path, "reference model checkpoint")->required();
    sc_verify->add_option("--defender", in, "our watermarked prompt artifact")->required();
    sc_verify->add_option("--key", key_path, "watermark key file")->required();
    sc_verify->add_option("--suspect", suspect, "prompt file or http://host:port")->required();
    sc_verify->add_option("--out", out, "output directory")->required();
    add_cell_flags(sc_verify);

    auto* sc_report = add_subcommand("report", "aggregate metrics cells into CSV tables");
    sc_report->add_option("--dir", task_dir, "results directory to scan")->required();
    sc_report->add_option("--out", out, "report output directory (default <dir>/report)");

    auto* sc_serve = add_subcommand("serve-suspect", "expose a prompt as an HTTP service");
    sc_serve->add_option("--model", model_path, "reference model checkpoint")->required();
    sc_serve->add_option("--prompt", in, "prompt artifact to serve")->required();
    sc_serve->add_option("--policy", policy_path, "adversary policy file");
    sc_serve->add_option("--host", host, "bind address");
    sc_serve->add_option("--port", port, "port (0 picks a free one)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (sc_make->parsed()) return cmd_make_task(make_config(), out);
        if (sc_train->parsed()) return cmd_train_model(make_config(), task_dir, out);
        if (sc_tune->parsed()) return cmd_tune(make_config(), task_dir, model_path, out, sweep, x);
        if (sc_inject->parsed())
            return cmd_inject(make_config(), task_dir, model_path, out, key_path, sweep, x);
        if (sc_attack->parsed())
            return cmd_attack(make_config(), in, out, method, task_dir, model_path, sweep, x);
        if (sc_verify->parsed())
            return cmd_verify(make_config(), task_dir, model_path, in, key_path, suspect, out,
                              sweep, x);
        if (sc_report->parsed()) return cmd_report(task_dir, out);
        if (sc_serve->parsed()) return cmd_serve_suspect(model_path, in, policy_path, host, port);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
