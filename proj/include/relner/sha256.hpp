#pragma once

#include <string>
#include <string_view>

namespace relner {

// SHA-256 digest of the input, as 64 lowercase hex characters.
std::string sha256_hex(std::string_view data);

}  // namespace relner
