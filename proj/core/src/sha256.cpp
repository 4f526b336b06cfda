#include "esia/sha256.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace esia {

Digest32 sha256(std::span<const uint8_t> data) {
  Digest32 out{};
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr) throw std::runtime_error("sha256: EVP context allocation failed");
  const bool ok = EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) == 1 &&
                  EVP_DigestUpdate(ctx, data.data(), data.size()) == 1 &&
                  EVP_DigestFinal_ex(ctx, out.data(), &len) == 1;
  EVP_MD_CTX_free(ctx);
  if (!ok || len != out.size()) throw std::runtime_error("sha256: digest failed");
  return out;
}

Identity32 hash_identity(std::span<const uint8_t> address) {
  if (address.empty()) throw std::invalid_argument("hash_identity: empty hardware address");
  return sha256(address);
}

}  // namespace esia
