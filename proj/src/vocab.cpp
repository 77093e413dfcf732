#include "promptcare/vocab.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

namespace promptcare {

namespace {

std::string to_lower(const std::string& s) {
    std::string out = s;
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
    tokens_ = {"[PAD]", "[MASK]", "[SEP]", "[UNK]"};
    tokens_.insert(tokens_.end(), words.begin(), words.end());
    build_index();
}

void Vocabulary::build_index() {
    index_.clear();
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (tokens_[i].empty()) throw ConfigError("vocabulary: empty surface form");
        auto [it, inserted] = index_.emplace(tokens_[i], static_cast<TokenId>(i));
        if (!inserted) throw ConfigError("vocabulary: duplicate surface form '" + tokens_[i] + "'");
    }
}

const std::string& Vocabulary::token(TokenId id) const {
    if (id < 0 || id >= size()) throw ConfigError("vocabulary: token id out of range");
    return tokens_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocabulary::lookup(const std::string& surface) const {
    auto it = index_.find(surface);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

TokenId Vocabulary::id_or_unk(const std::string& surface) const {
    auto it = index_.find(surface);
    return it == index_.end() ? kUnk : it->second;
}

std::vector<TokenId> Vocabulary::encode(const std::string& text) const {
    std::vector<TokenId> out;
    std::istringstream in(text);
    std::string word;
    while (in >> word) out.push_back(id_or_unk(to_lower(word)));
    return out;
}

std::string Vocabulary::decode(const std::vector<TokenId>& ids) const {
    std::string out;
    for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i) out += ' ';
        out += token(ids[i]);
    }
    return out;
}

void Vocabulary::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("vocabulary: cannot write " + path);
    for (const auto& t : tokens_) out << t << '\n';
}

Vocabulary Vocabulary::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("vocabulary: cannot read " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    if (lines.size() < kNumSpecials) throw FormatError("vocabulary: file too short");
    const std::vector<std::string> specials = {"[PAD]", "[MASK]", "[SEP]", "[UNK]"};
    for (int i = 0; i < kNumSpecials; ++i) {
        if (lines[static_cast<std::size_t>(i)] != specials[static_cast<std::size_t>(i)])
            throw FormatError("vocabulary: special tokens out of order");
    }
    Vocabulary v;
    v.tokens_ = std::move(lines);
    v.build_index();
    return v;
}

}  // namespace promptcare
