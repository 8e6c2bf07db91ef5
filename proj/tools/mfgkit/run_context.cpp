#include "run_context.hpp"

#include <array>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace mfgcli {

RunContext::RunContext(fs::path out_dir, std::uint64_t seed, std::size_t threads)
    : out_dir_(std::move(out_dir)), seed_(seed), threads_(threads) {
  fs::create_directories(out_dir_);
}

void RunContext::write_text(const std::string& name, const std::string& text) {
  std::ofstream out(out_dir_ / name, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("cannot write " + (out_dir_ / name).string());
  artifacts_.push_back(name);
}

void RunContext::write_json(const std::string& name, json doc) {
  if (doc.is_object()) {
    doc["seed"] = seed_;
    doc["config"] = config_;
  }
  write_text(name, doc.dump(2) + "\n");
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (ctx == nullptr || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw std::runtime_error("sha256 unavailable");
  }
  std::array<char, 1 << 16> buffer{};
  while (in) {
    in.read(buffer.data(), buffer.size());
    EVP_DigestUpdate(ctx, buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &length);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return hex.str();
}

}  // namespace mfgcli
