#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include "promptcare/prompt.hpp"
#include "promptcare/service.hpp"
#include "promptcare/task_gen.hpp"
#include "promptcare/verify.hpp"
#include "promptcare/watermark.hpp"

using namespace promptcare;
namespace fs = std::filesystem;

namespace {

int run_raw(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

int run(const std::string& cmd) { return run_raw(cmd + " >/dev/null 2>&1"); }

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// One tiny task + model + watermarked prompts, built once and shared.
struct CliWorld {
    fs::path dir;
    std::string bin = PROMPTCARE_CLI_PATH;
    std::string task, model, wm, wmc, key, keyc;

    CliWorld() {
        char tmpl[] = "/tmp/promptcare_cli_XXXXXX";
        dir = fs::path(::mkdtemp(tmpl));
        task = (dir / "task").string();
        model = (dir / "model.bin").string();
        wm = (dir / "wm").string();
        wmc = (dir / "wmc").string();
        key = (dir / "secret" / "key.json").string();
        keyc = (dir / "secret" / "keyc.json").string();
        fs::create_directories(dir / "secret");
        REQUIRE(run(bin + " make-task --out " + task +
                    " --set train_size=100 --set test_size=60") == 0);
        REQUIRE(run(bin + " train-model --task " + task + " --out " + model +
                    " --set model_steps=120") == 0);
        const std::string small =
            " --set tune_steps=4 --set warmup_steps=4 --set lower_steps=2"
            " --set alternations=1 --set cgs_rounds=1 --set cgs_prompt_steps=1"
            " --set signal_k=3 --set signal_probe_size=30 --set trigger_len=2";
        REQUIRE(run(bin + " inject --task " + task + " --model " + model + " --out " + wm +
                    " --key " + key + small) == 0);
        REQUIRE(run(bin + " inject --task " + task + " --model " + model + " --out " + wmc +
                    " --key " + keyc + small +
                    " --set prompt_kind=slots --set continuous_m=4") == 0);
    }
    ~CliWorld() { fs::remove_all(dir); }
};

CliWorld& world() {
    static CliWorld w;
    return w;
}

}  // namespace

TEST_CASE("cli: tune writes the requested discrete prompt and replays byte-identically") {
    auto& w = world();
    const auto t1 = (w.dir / "tune1").string();
    const auto t2 = (w.dir / "tune2").string();
    CHECK(run(w.bin + " tune --task " + w.task + " --model " + w.model + " --out " + t1 +
              " --set tune_steps=4 --set m=4") == 0);
    const auto art = PromptArtifact::load(t1 + "/prompt.json");
    CHECK(art.kind == PromptSpec::Kind::Tokens);
    CHECK(art.tokens.size() == 4);
    CHECK(fs::exists(t1 + "/tune.log"));
    CHECK(fs::exists(t1 + "/metrics.json"));
    CHECK(fs::exists(t1 + "/replay.cfg"));

    CHECK(run(w.bin + " tune --task " + w.task + " --model " + w.model + " --out " + t2 +
              " --set tune_steps=4 --set m=4") == 0);
    CHECK(slurp(t1 + "/prompt.json") == slurp(t2 + "/prompt.json"));

    // The recorded config replays to the same bytes.
    const auto t3 = (w.dir / "tune3").string();
    CHECK(run(w.bin + " tune --config " + t1 + "/replay.cfg --task " + w.task + " --model " +
              w.model + " --out " + t3) == 0);
    CHECK(slurp(t1 + "/prompt.json") == slurp(t3 + "/prompt.json"));

    // A different seed changes the artifact; the env var wins over config.
    const auto t4 = (w.dir / "tune4").string();
    CHECK(run("PROMPTCARE_SEED=99 " + w.bin + " tune --task " + w.task + " --model " + w.model +
              " --out " + t4 + " --set tune_steps=4 --set m=4") == 0);
    CHECK(slurp(t1 + "/prompt.json") != slurp(t4 + "/prompt.json"));
    CHECK(slurp(t4 + "/replay.cfg").find("seed = 99") != std::string::npos);
}

TEST_CASE("cli: tune fails cleanly on a missing task directory") {
    auto& w = world();
    CHECK(run(w.bin + " tune --task " + (w.dir / "nope").string() + " --model " + w.model +
              " --out " + (w.dir / "t_err").string()) == 2);
    CHECK(run(w.bin + " bogus-subcommand") == 2);
}

TEST_CASE("cli: inject separates prompt and secret key") {
    auto& w = world();
    const std::string prompt_text = slurp(w.wm + "/prompt.json");
    const std::string key_text = slurp(w.key);
    CHECK(key_text.find("\"SECRET\"") != std::string::npos);
    CHECK(prompt_text.find("\"SECRET\"") == std::string::npos);

    const auto art = PromptArtifact::load(w.wm + "/prompt.json");
    CHECK(art.metadata.at("holdout_p") == "0.05");

    // Same seed reproduces the same trigger (whole key file is byte-stable).
    const auto wm2 = (w.dir / "wm2").string();
    const auto key2 = (w.dir / "secret" / "key2.json").string();
    const std::string small =
        " --set tune_steps=4 --set warmup_steps=4 --set lower_steps=2"
        " --set alternations=1 --set cgs_rounds=1 --set cgs_prompt_steps=1"
        " --set signal_k=3 --set signal_probe_size=30 --set trigger_len=2";
    REQUIRE(run(w.bin + " inject --task " + w.task + " --model " + w.model + " --out " + wm2 +
                " --key " + key2 + small) == 0);
    CHECK(slurp(key2) == key_text);
    CHECK(slurp(wm2 + "/prompt.json") == prompt_text);

    // Refuses to drop the key into the prompt directory or onto the prompt file.
    CHECK(run(w.bin + " inject --task " + w.task + " --model " + w.model + " --out " +
              (w.dir / "wm3").string() + " --key " + (w.dir / "wm3" / "key.json").string() +
              small) == 2);
    CHECK(run(w.bin + " inject --task " + w.task + " --model " + w.model + " --out " +
              (w.dir / "wm4").string() + " --key " + (w.dir / "wm4" / "prompt.json").string() +
              small) == 2);
}

// A discrete prompt whose tokens all have synonyms, so any position is
// replaceable regardless of what tuning picked.
std::string synonym_rich_prompt(CliWorld& w) {
    const auto path = (w.dir / "rich_prompt.json").string();
    if (!fs::exists(path)) {
        const auto bundle = TaskBundle::load(w.task);
        PromptArtifact art;
        art.kind = PromptSpec::Kind::Tokens;
        art.template_id = bundle.spec.template_id;
        for (const auto& [tok, syns] : bundle.lexicon) {
            if (!syns.empty()) art.tokens.push_back(tok);
            if (art.tokens.size() == 4) break;
        }
        REQUIRE(art.tokens.size() == 4);
        art.save(path);
    }
    return path;
}

TEST_CASE("cli: attack synonym changes exactly n_d tokens and finetune records iterations") {
    auto& w = world();
    const auto rich = synonym_rich_prompt(w);
    const auto syn = (w.dir / "att_syn").string();
    CHECK(run(w.bin + " attack --in " + rich + " --out " + syn + " --method synonym --task " +
              w.task + " --set n_d=2") == 0);
    const auto before = PromptArtifact::load(rich);
    const auto after = PromptArtifact::load(syn + "/prompt.json");
    int diff = 0;
    for (std::size_t i = 0; i < before.tokens.size(); ++i)
        diff += before.tokens[i] != after.tokens[i] ? 1 : 0;
    CHECK(diff == 2);
    CHECK(after.metadata.at("attack") == "synonym");
    CHECK(after.metadata.at("n_d") == "2");

    const auto ft = (w.dir / "att_ft").string();
    CHECK(run(w.bin + " attack --in " + w.wmc + "/prompt.json --out " + ft +
              " --method finetune --task " + w.task + " --model " + w.model +
              " --set n_c=3") == 0);
    const auto tuned = PromptArtifact::load(ft + "/prompt.json");
    CHECK(tuned.kind == PromptSpec::Kind::Slots);
    CHECK(tuned.metadata.at("attack") == "finetune");
    CHECK(tuned.metadata.at("n_c") == "3");

    // Kind mismatches exit 2: finetune needs slots, synonym needs tokens.
    CHECK(run(w.bin + " attack --in " + w.wm + "/prompt.json --out " + (w.dir / "e1").string() +
              " --method finetune --task " + w.task + " --model " + w.model) == 2);
    CHECK(run(w.bin + " attack --in " + w.wmc + "/prompt.json --out " + (w.dir / "e2").string() +
              " --method synonym --task " + w.task) == 2);
    CHECK(run(w.bin + " attack --in " + w.wm + "/prompt.json --out " + (w.dir / "e3").string() +
              " --method bogus --task " + w.task) == 2);
}

TEST_CASE("cli: self-verification exits 0 with p = 1 and writes a loadable report") {
    auto& w = world();
    const auto out = (w.dir / "ver_self").string();
    CHECK(run(w.bin + " verify --task " + w.task + " --model " + w.model + " --defender " + w.wm +
              "/prompt.json --key " + w.key + " --suspect " + w.wm +
              "/prompt.json --out " + out + " --set n_queries=16 --set tries=2") == 0);
    const auto report = VerificationReport::load(out + "/report.jsonl");
    CHECK(report.averaged_p == 1.0);
    CHECK(report.verdict == "COPY");
    CHECK(report.tries == 2);

    // Replay is byte-identical, report file included.
    const auto out2 = (w.dir / "ver_self2").string();
    CHECK(run(w.bin + " verify --task " + w.task + " --model " + w.model + " --defender " + w.wm +
              "/prompt.json --key " + w.key + " --suspect " + w.wm +
              "/prompt.json --out " + out2 + " --set n_queries=16 --set tries=2") == 0);
    CHECK(slurp(out + "/report.jsonl") == slurp(out2 + "/report.jsonl"));

    // Bad inputs exit 2.
    CHECK(run(w.bin + " verify --task " + w.task + " --model " + w.model + " --defender " + w.wm +
              "/prompt.json --key " + w.wm + "/prompt.json --suspect " + w.wm +
              "/prompt.json --out " + (w.dir / "ver_err").string()) == 2);
}

TEST_CASE("cli: verify reaches a suspect served over HTTP") {
    auto& w = world();
    const int port = 18461;
    const auto pid_file = (w.dir / "serve.pid").string();
    REQUIRE(run_raw(w.bin + " serve-suspect --model " + w.model + " --prompt " + w.wm +
                    "/prompt.json --host 127.0.0.1 --port " + std::to_string(port) +
                    " >/dev/null 2>&1 & echo $! > " + pid_file) == 0);
    bool up = false;
    for (int i = 0; i < 100 && !up; ++i) {
        HttpSuspectService probe("127.0.0.1", port);
        up = probe.healthy();
        if (!up) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    }
    REQUIRE(up);
    const auto out = (w.dir / "ver_http").string();
    CHECK(run(w.bin + " verify --task " + w.task + " --model " + w.model + " --defender " + w.wm +
              "/prompt.json --key " + w.key + " --suspect http://127.0.0.1:" +
              std::to_string(port) + " --out " + out + " --set n_queries=12 --set tries=2") == 0);
    const auto report = VerificationReport::load(out + "/report.jsonl");
    CHECK(report.averaged_p == 1.0);
    run_raw("kill $(cat " + pid_file + ") 2>/dev/null");

    // A dead endpoint is an error, not a verdict.
    CHECK(run(w.bin + " verify --task " + w.task + " --model " + w.model + " --defender " + w.wm +
              "/prompt.json --key " + w.key + " --suspect http://127.0.0.1:1 --out " +
              (w.dir / "ver_dead").string() + " --set n_queries=4 --set tries=2") == 2);
}

TEST_CASE("cli: report tabulates sweep cells, is idempotent, and rejects stray keys") {
    auto& w = world();
    const auto res = (w.dir / "results").string();
    const auto rich = synonym_rich_prompt(w);
    fs::create_directories(res);
    for (int nd : {1, 2}) {
        CHECK(run(w.bin + " attack --in " + rich + " --out " + res + "/syn" +
                  std::to_string(nd) + " --method synonym --task " + w.task +
                  " --set n_d=" + std::to_string(nd) + " --sweep synonym --x " +
                  std::to_string(nd)) == 0);
    }
    CHECK(run(w.bin + " report --dir " + res) == 0);
    const std::string csv = slurp(res + "/report/synonym.csv");
    CHECK(csv.find("x,n_d,cell") == 0);
    CHECK(csv.find("1.0,1.0,") != std::string::npos);
    CHECK(csv.find("2.0,2.0,") != std::string::npos);
    CHECK(csv.find("mean,1.5,") != std::string::npos);

    CHECK(run(w.bin + " report --dir " + res) == 0);
    CHECK(slurp(res + "/report/synonym.csv") == csv);

    // Empty directory has no cells.
    const auto empty = (w.dir / "results_empty").string();
    fs::create_directories(empty);
    CHECK(run(w.bin + " report --dir " + empty) == 2);

    // A secret key anywhere in the scanned tree aborts the report.
    fs::copy_file(w.key, fs::path(res) / "leaked_key.json");
    CHECK(run(w.bin + " report --dir " + res) == 2);
    fs::remove(fs::path(res) / "leaked_key.json");
}
