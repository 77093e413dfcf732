#include "promptcare/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "promptcare/errors.hpp"

namespace promptcare {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

void parse_lines(std::istream& in, const std::string& origin,
                 std::map<std::string, std::string>& kv, std::set<std::string>& open_files);

void parse_file(const std::string& path, std::map<std::string, std::string>& kv,
                std::set<std::string>& open_files) {
    std::error_code ec;
    const auto canon = fs::weakly_canonical(fs::path(path), ec).string();
    const auto marker = ec ? path : canon;
    if (open_files.count(marker)) throw ConfigError("config: include cycle at " + path);
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot read " + path);
    open_files.insert(marker);
    parse_lines(in, path, kv, open_files);
    open_files.erase(marker);
}

void parse_lines(std::istream& in, const std::string& origin,
                 std::map<std::string, std::string>& kv, std::set<std::string>& open_files) {
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto where = origin + ":" + std::to_string(lineno);

        if (line.rfind("include ", 0) == 0 || line == "include") {
            const std::string target = trim(line.substr(7));
            if (target.empty()) throw ConfigError("config: empty include at " + where);
            fs::path p(target);
            if (p.is_relative() && origin != "<string>")
                p = fs::path(origin).parent_path() / p;
            parse_file(p.string(), kv, open_files);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: expected key = value at " + where);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key at " + where);
        kv[key] = value;  // later bindings win
    }
}

}  // namespace

Config Config::defaults() {
    Config c;
    // Experiment identity.
    c.set("seed", "1");
    c.set("task", "desk-sent");
    c.set("prompt_kind", "tokens");  // tokens | slots
    // Prompt shape and tuning.
    c.set("m", "4");             // discrete prompt length
    c.set("continuous_m", "16");  // slot count for continuous prompts
    c.set("tune_steps", "60");
    c.set("batch_size", "16");
    c.set("grad_accum", "8");
    c.set("candidates_k", "10");
    c.set("lr", "0.05");
    // Watermark injection.
    c.set("signal_k", "20");
    c.set("holdout_p", "0.05");
    c.set("trigger_len", "3");
    c.set("warmup_steps", "60");
    c.set("lower_steps", "8");
    c.set("alternations", "10");
    c.set("cgs_rounds", "3");
    c.set("cgs_prompt_steps", "8");
    c.set("cgs_k", "10");
    c.set("signal_probe_size", "200");
    // Attacks.
    c.set("n_d", "1");
    c.set("n_c", "500");
    c.set("attack_lr", "0.05");
    // Verification.
    c.set("n_queries", "512");
    c.set("tries", "10");
    c.set("alpha", "0.05");
    c.set("probe_mode", "plain");  // plain | swap
    return c;
}

Config Config::from_file(const std::string& path) {
    Config c = defaults();
    std::set<std::string> open_files;
    parse_file(path, c.kv_, open_files);
    return c;
}

Config Config::from_string(const std::string& text) {
    Config c = defaults();
    std::istringstream in(text);
    std::set<std::string> open_files;
    parse_lines(in, "<string>", c.kv_, open_files);
    return c;
}

const std::string& Config::get(const std::string& key) const {
    auto it = kv_.find(key);
    if (it == kv_.end()) throw ConfigError("config: missing key '" + key + "'");
    return it->second;
}

std::string Config::get_or(const std::string& key, const std::string& fallback) const {
    auto it = kv_.find(key);
    return it == kv_.end() ? fallback : it->second;
}

long long Config::get_int(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t used = 0;
        const long long x = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not an integer: '" + v + "'");
    }
}

double Config::get_double(const std::string& key) const {
    const auto& v = get(key);
    try {
        std::size_t used = 0;
        const double x = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: '" + v + "'");
    }
}

bool Config::get_bool(const std::string& key) const {
    const auto& v = get(key);
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
}

std::uint64_t Config::seed() const {
    if (const char* env = std::getenv("PROMPTCARE_SEED")) {
        const std::string v(env);
        try {
            std::size_t used = 0;
            const unsigned long long x = std::stoull(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return x;
        } catch (const std::exception&) {
            throw ConfigError("PROMPTCARE_SEED is not an unsigned integer: '" + v + "'");
        }
    }
    const auto x = get_int("seed");
    if (x < 0) throw ConfigError("config: seed must be non-negative");
    return static_cast<std::uint64_t>(x);
}

std::string Config::render() const {
    std::ostringstream out;
    out << "# promptcare config (replayable)\n";
    for (const auto& [k, v] : kv_) {
        if (k == "seed")
            out << k << " = " << seed() << "\n";  // environment override folded in
        else
            out << k << " = " << v << "\n";
    }
    return out.str();
}

}  // namespace promptcare
