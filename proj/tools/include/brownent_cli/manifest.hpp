#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "brownent_cli/config.hpp"

namespace brownent::cli {

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);

struct ManifestEntry {
  std::string path;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Writes `manifest.json` into `dir` listing `files` (relative paths) with
/// their hashes and the resolved config. No timestamps or thread counts, so
/// the manifest is as reproducible as the artifacts it lists.
void write_manifest(const std::filesystem::path& dir, const std::string& command, const ExperimentConfig& config,
                    std::vector<std::string> files);

/// Problems found when re-hashing the files a manifest lists; empty if all match.
std::vector<std::string> verify_manifest(const std::filesystem::path& dir);

}  // namespace brownent::cli
