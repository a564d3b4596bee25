#include "brownent_cli/manifest.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <memory>

#include "brownent/ensemble_io.hpp"
#include "json.hpp"

#ifndef BROWNENT_VERSION
#define BROWNENT_VERSION "0.0.0"
#endif

namespace brownent::cli {

using nlohmann::json;

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
    throw Error(ErrorCode::Io, "sha256 computation failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xf];
  }
  return out;
}

std::string file_sha256(const std::filesystem::path& path) { return sha256_hex(read_text_file(path)); }

void write_manifest(const std::filesystem::path& dir, const std::string& command, const ExperimentConfig& config,
                    std::vector<std::string> files) {
  std::sort(files.begin(), files.end());
  files.erase(std::unique(files.begin(), files.end()), files.end());
  json list = json::array();
  for (const auto& f : files) {
    const auto text = read_text_file(dir / f);
    list.push_back({{"path", f}, {"sha256", sha256_hex(text)}, {"bytes", text.size()}});
  }
  const auto config_text = to_json(config);
  const json m = {
      {"tool", "brownent"},
      {"version", BROWNENT_VERSION},
      {"command", command},
      {"seed", config.seed},
      {"config", json::parse(config_text)},
      {"config_sha256", sha256_hex(config_text)},
      {"files", list},
  };
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
  const auto m = json::parse(read_text_file(dir / "manifest.json"), nullptr, false);
  if (m.is_discarded() || !m.contains("files") || !m["files"].is_array()) {
    throw Error(ErrorCode::SchemaMismatch, "manifest.json is malformed");
  }
  std::vector<std::string> problems;
  if (m.contains("config") && m.contains("config_sha256")) {
    try {
      const auto cfg = config_from_json(m["config"].dump());
      if (sha256_hex(to_json(cfg)) != m["config_sha256"].get<std::string>()) {
        problems.push_back("config hash mismatch");
      }
    } catch (const ConfigError& e) {
      problems.push_back(std::string("embedded config invalid: ") + e.what());
    }
  }
  for (const auto& f : m["files"]) {
    const auto rel = f.value("path", std::string());
    const auto path = dir / rel;
    if (rel.empty() || !std::filesystem::exists(path)) {
      problems.push_back("missing file: " + rel);
      continue;
    }
    const auto text = read_text_file(path);
    if (text.size() != f.value("bytes", std::uintmax_t{0})) problems.push_back("size mismatch: " + rel);
    if (sha256_hex(text) != f.value("sha256", std::string())) problems.push_back("hash mismatch: " + rel);
  }
  return problems;
}

}  // namespace brownent::cli
