#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace promptcare {

// Flat key=value experiment configuration. Lines are `key = value`,
// `include other.cfg` (paths relative to the including file), full-line
// `#` comments, or blank. Later bindings win, includes splice in place.
// The PROMPTCARE_SEED environment variable overrides the `seed` key.
class Config {
  public:
    // Every tunable with its stock value.
    static Config defaults();

    // defaults() overlaid with the file's bindings.
    static Config from_file(const std::string& path);

    // defaults() overlaid with inline text (no includes resolved).
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const { return kv_.count(key) != 0; }
    const std::string& get(const std::string& key) const;  // ConfigError when missing
    std::string get_or(const std::string& key, const std::string& fallback) const;
    long long get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;

    // The `seed` key, unless PROMPTCARE_SEED is set in the environment.
    std::uint64_t seed() const;

    void set(const std::string& key, const std::string& value) { kv_[key] = value; }
    const std::map<std::string, std::string>& entries() const { return kv_; }

    // Canonical `key = value` text, sorted by key, seed resolved. What the
    // CLI records next to its outputs so a run can be replayed exactly.
    std::string render() const;

  private:
    std::map<std::string, std::string> kv_;
};

}  // namespace promptcare
