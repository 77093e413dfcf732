#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "promptcare/backend.hpp"

namespace promptcare {

// Standard base64 (RFC 4648, with padding).
std::string base64_encode(const std::uint8_t* data, std::size_t len);
std::vector<std::uint8_t> base64_decode(const std::string& text);  // FormatError on bad input

// Column-major little-endian double payloads for matrices inside JSON.
std::string mat_to_base64(const Mat& m);
Mat mat_from_base64(const std::string& text, int rows, int cols);

}  // namespace promptcare
