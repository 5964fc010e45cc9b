#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace occ {

// Hex-encoded SHA-256 of a file's bytes. Throws on unreadable paths.
std::string sha256_file(const std::string& path);

// Record of one tool invocation: what ran, with which configuration, and
// checksums of everything it read and wrote. Two runs that produce identical
// manifests produced bit-identical outputs.
struct RunManifest {
  std::string command;
  std::string command_line;  // full shell-quoted invocation; empty if unknown
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::map<std::string, std::string> inputs;   // path -> sha256
  std::map<std::string, std::string> outputs;  // path -> sha256
  double duration_seconds = 0.0;
  nlohmann::json extra;  // command-specific summary values
};

nlohmann::json manifest_to_json(const RunManifest& manifest);

// Serializes the manifest next to the run outputs. Checksums in `inputs` and
// `outputs` are expected to be filled by the caller via sha256_file.
void write_manifest(const RunManifest& manifest, const std::string& path);

}  // namespace occ
