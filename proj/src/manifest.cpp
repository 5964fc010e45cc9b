#include "occ/manifest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <memory>
#include <stdexcept>

namespace occ {

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("sha256_file: cannot open " + path);

  using CtxPtr = std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)>;
  CtxPtr ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256_file: digest init failed");

  std::array<char, 1 << 16> buffer;
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    const std::streamsize got = in.gcount();
    if (got > 0 &&
        EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(got)) != 1)
      throw std::runtime_error("sha256_file: digest update failed");
  }

  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1)
    throw std::runtime_error("sha256_file: digest final failed");

  std::string hex(static_cast<std::size_t>(len) * 2, '0');
  for (unsigned int i = 0; i < len; ++i)
    std::snprintf(hex.data() + 2 * i, 3, "%02x", digest[i]);
  return hex;
}

nlohmann::json manifest_to_json(const RunManifest& manifest) {
  nlohmann::json j{{"command", manifest.command},
                   {"config", manifest.config},
                   {"seed", manifest.seed},
                   {"inputs", manifest.inputs},
                   {"outputs", manifest.outputs},
                   {"duration_seconds", manifest.duration_seconds}};
  if (!manifest.command_line.empty()) j["command_line"] = manifest.command_line;
  if (!manifest.extra.is_null()) j["summary"] = manifest.extra;
  return j;
}

void write_manifest(const RunManifest& manifest, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_manifest: cannot open " + path);
  out << manifest_to_json(manifest).dump(2) << '\n';
}

}  // namespace occ
