#include "cli/manifest.hpp"

#include <openssl/evp.h>

#include <fstream>
#include <memory>

#include <fmt/format.h>

#include "agcr/corpus.hpp"
#include "agcr/error.hpp"

namespace agcr::cli {

std::string git_blob_sha1(std::string_view content) {
  const std::string header = fmt::format("blob {}", content.size()) + '\0';
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha1(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), header.data(), header.size()) != 1 ||
      EVP_DigestUpdate(ctx.get(), content.data(), content.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest, &len) != 1) {
    throw Error("sha1: digest failed");
  }
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

std::string file_sha1(const std::filesystem::path& path) { return git_blob_sha1(corpus::read_file(path)); }

void RunManifest::add_input(const std::filesystem::path& path) {
  if (path.empty()) return;
  inputs.push_back({path.string(), file_sha1(path), true});
}

void RunManifest::add_output(const std::filesystem::path& path, bool deterministic) {
  outputs.push_back({path.string(), file_sha1(path), deterministic});
}

namespace {

nlohmann::ordered_json files_json(const std::vector<FileRecord>& files) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& f : files) arr.push_back({{"path", f.path}, {"sha1", f.sha1}, {"deterministic", f.deterministic}});
  return arr;
}

}  // namespace

std::string manifest_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["args"] = m.args;
  j["config"] = m.config;
  j["seeds"] = m.seeds;
  j["threads"] = m.threads;
  j["inputs"] = files_json(m.inputs);
  j["outputs"] = files_json(m.outputs);
  return j.dump(2) + "\n";
}

std::filesystem::path write_manifest(const RunManifest& m, const std::filesystem::path& dir) {
  const auto path = dir / (m.command + ".manifest.json");
  std::ofstream out(path, std::ios::binary);
  out << manifest_json(m);
  if (!out) throw Error("cannot write " + path.string());
  return path;
}

}  // namespace agcr::cli
