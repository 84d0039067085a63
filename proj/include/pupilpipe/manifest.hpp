#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace pupilpipe {

std::uint64_t fnv1a_file(const std::filesystem::path& path);
std::string digest_hex(std::uint64_t digest);

/// Wall-clock stage timer (milliseconds).
class StageTimer {
 public:
  StageTimer() : start_(std::chrono::steady_clock::now()) {}
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

/// Reproducibility record written next to every command's outputs: command,
/// config, seed, input/output digests and stage timings. Timings are the
/// only field that varies between identical reruns.
class RunManifest {
 public:
  RunManifest(std::string command, std::uint64_t seed);

  void set_config(nlohmann::json config);
  void add_input(const std::filesystem::path& path);
  void add_output(const std::filesystem::path& path);
  void add_timing(const std::string& stage, double ms);
  void add_note(const std::string& note);

  void write(const std::filesystem::path& path) const;
  const nlohmann::ordered_json& json() const { return doc_; }

 private:
  nlohmann::ordered_json doc_;
};

}  // namespace pupilpipe
