#include "loramix/fingerprint.hpp"

#include <openssl/evp.h>

#include "loramix/errors.hpp"
#include "loramix/tensor_store.hpp"

namespace loramix {

std::string sha256_hex(const std::uint8_t * data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int digest_len = 0;
  if (EVP_Digest(data, size, digest, &digest_len, EVP_sha256(), nullptr) != 1)
    fail(errc::io_failure, "sha256 digest computation failed");
  static const char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(digest_len * 2);
  for (unsigned int i = 0; i < digest_len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

Fingerprint fingerprint_store(const TensorStore & store) {
  const std::vector<std::uint8_t> bytes = serialize_store(store);
  Fingerprint fp;
  fp.digest = sha256_hex(bytes.data(), bytes.size());
  fp.name_count = store.tensors.size();
  fp.total_bytes = bytes.size();
  return fp;
}

Fingerprint fingerprint_file(const std::filesystem::path & path) {
  return fingerprint_store(read_store(path));
}

} // namespace loramix
