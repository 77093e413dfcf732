#include "promptcare/serialize.hpp"

#include <cstring>

#include "promptcare/errors.hpp"

namespace promptcare {

namespace {
constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
    if (c >= 'A' && c <= 'Z') return c - 'A';
    if (c >= 'a' && c <= 'z') return c - 'a' + 26;
    if (c >= '0' && c <= '9') return c - '0' + 52;
    if (c == '+') return 62;
    if (c == '/') return 63;
    return -1;
}
}  // namespace

std::string base64_encode(const std::uint8_t* data, std::size_t len) {
    std::string out;
    out.reserve((len + 2) / 3 * 4);
    for (std::size_t i = 0; i < len; i += 3) {
        const std::uint32_t b0 = data[i];
        const std::uint32_t b1 = i + 1 < len ? data[i + 1] : 0;
        const std::uint32_t b2 = i + 2 < len ? data[i + 2] : 0;
        const std::uint32_t triple = (b0 << 16) | (b1 << 8) | b2;
        out.push_back(kAlphabet[(triple >> 18) & 0x3F]);
        out.push_back(kAlphabet[(triple >> 12) & 0x3F]);
        out.push_back(i + 1 < len ? kAlphabet[(triple >> 6) & 0x3F] : '=');
        out.push_back(i + 2 < len ? kAlphabet[triple & 0x3F] : '=');
    }
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    if (text.size() % 4 != 0) throw FormatError("base64: length not a multiple of 4");
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 4 * 3);
    for (std::size_t i = 0; i < text.size(); i += 4) {
        int vals[4];
        int pad = 0;
        for (int j = 0; j < 4; ++j) {
            const char c = text[i + j];
            if (c == '=') {
                if (i + 4 != text.size() || j < 2) throw FormatError("base64: misplaced padding");
                vals[j] = 0;
                ++pad;
            } else {
                if (pad) throw FormatError("base64: data after padding");
                vals[j] = decode_char(c);
                if (vals[j] < 0) throw FormatError("base64: invalid character");
            }
        }
        const std::uint32_t triple = (std::uint32_t(vals[0]) << 18) |
                                     (std::uint32_t(vals[1]) << 12) |
                                     (std::uint32_t(vals[2]) << 6) | std::uint32_t(vals[3]);
        out.push_back((triple >> 16) & 0xFF);
        if (pad < 2) out.push_back((triple >> 8) & 0xFF);
        if (pad < 1) out.push_back(triple & 0xFF);
    }
    return out;
}

std::string mat_to_base64(const Mat& m) {
    std::vector<std::uint8_t> bytes(sizeof(double) * static_cast<std::size_t>(m.size()));
    if (!bytes.empty()) std::memcpy(bytes.data(), m.data(), bytes.size());
    return base64_encode(bytes.data(), bytes.size());
}

Mat mat_from_base64(const std::string& text, int rows, int cols) {
    if (rows < 0 || cols < 0) throw FormatError("matrix payload: negative shape");
    auto bytes = base64_decode(text);
    const std::size_t want = sizeof(double) * std::size_t(rows) * std::size_t(cols);
    if (bytes.size() != want) throw FormatError("matrix payload: size mismatch");
    Mat m(rows, cols);
    if (want) std::memcpy(m.data(), bytes.data(), want);
    return m;
}

}  // namespace promptcare
