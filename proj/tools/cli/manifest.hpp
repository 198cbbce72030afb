#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace agcr::cli {

struct FileRecord {
  std::string path;
  std::string sha1;
  /// False for reports that carry wall-clock timings.
  bool deterministic = true;
};

struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::map<std::string, std::uint64_t> seeds;
  std::size_t threads = 1;
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;

  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path, bool deterministic = true);
};

/// SHA-1 of "blob <size>\0<content>", as computed by git hash-object.
std::string git_blob_sha1(std::string_view content);
std::string file_sha1(const std::filesystem::path& path);

std::string manifest_json(const RunManifest& m);
/// Writes <dir>/<command>.manifest.json and returns its path.
std::filesystem::path write_manifest(const RunManifest& m, const std::filesystem::path& dir);

}  // namespace agcr::cli
