#pragma once

#include <span>

#include "esia/bytes.hpp"

namespace esia {

Digest32 sha256(std::span<const uint8_t> data);

// Identity derivation: ID = SHA-256(hardware address). Empty input is a
// caller bug, not a degenerate identity.
Identity32 hash_identity(std::span<const uint8_t> address);

}  // namespace esia
