#include "pupilpipe/manifest.hpp"

#include <cstdio>
#include <fstream>

#include "pupilpipe/io.hpp"
#include "pupilpipe/rng.hpp"
#include "pupilpipe/version.hpp"

namespace pupilpipe {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::uint64_t h = kFnvOffset;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0)
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  return h;
}

std::string digest_hex(std::uint64_t digest) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

RunManifest::RunManifest(std::string command, std::uint64_t seed) {
  doc_["command"] = std::move(command);
  doc_["toolkit_version"] = kVersion;
  doc_["seed"] = seed;
  doc_["config"] = nlohmann::json::object();
  doc_["config_digest"] = "";
  doc_["inputs"] = nlohmann::json::object();
  doc_["outputs"] = nlohmann::json::object();
  doc_["timings_ms"] = nlohmann::json::object();
  doc_["notes"] = nlohmann::json::array();
}

void RunManifest::set_config(nlohmann::json config) {
  doc_["config_digest"] = digest_hex(fnv1a(config.dump()));
  doc_["config"] = std::move(config);
}

void RunManifest::add_input(const std::filesystem::path& path) {
  doc_["inputs"][path.string()] = digest_hex(fnv1a_file(path));
}

void RunManifest::add_output(const std::filesystem::path& path) {
  doc_["outputs"][path.string()] = digest_hex(fnv1a_file(path));
}

void RunManifest::add_timing(const std::string& stage, double ms) {
  doc_["timings_ms"][stage] = ms;
}

void RunManifest::add_note(const std::string& note) { doc_["notes"].push_back(note); }

void RunManifest::write(const std::filesystem::path& path) const {
  write_text_file(path, doc_.dump(2) + "\n");
}

}  // namespace pupilpipe
