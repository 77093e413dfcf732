#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "promptcare/errors.hpp"

namespace promptcare {

using TokenId = std::int32_t;

// Token inventory with dense ids 0..size()-1 and a string<->id bijection.
// The four special tokens are fixed at the front: [PAD]=0, [MASK]=1, [SEP]=2,
// [UNK]=3. Construction rejects duplicate or empty surface forms.
class Vocabulary {
  public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kMask = 1;
    static constexpr TokenId kSep = 2;
    static constexpr TokenId kUnk = 3;
    static constexpr int kNumSpecials = 4;

    Vocabulary() = default;

    // `words` are the non-special surface forms, appended after the specials
    // in the given order.
    explicit Vocabulary(const std::vector<std::string>& words);

    int size() const { return static_cast<int>(tokens_.size()); }

    const std::string& token(TokenId id) const;
    std::optional<TokenId> lookup(const std::string& surface) const;
    TokenId id_or_unk(const std::string& surface) const;
    bool is_special(TokenId id) const { return id >= 0 && id < kNumSpecials; }

    const std::vector<std::string>& tokens() const { return tokens_; }

    // Lowercase + whitespace tokenization; unknown words map to [UNK].
    std::vector<TokenId> encode(const std::string& text) const;
    std::string decode(const std::vector<TokenId>& ids) const;

    // One surface form per line, specials included, in id order.
    void save(const std::string& path) const;
    static Vocabulary load(const std::string& path);

    bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;

    void build_index();
};

}  // namespace promptcare
