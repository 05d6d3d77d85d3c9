#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace refdense {

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);
std::string hash_hex(std::uint64_t h);
std::uint64_t hash_file(const std::string& path);

// Record of one CLI run: command, resolved configuration, input hashes,
// produced outputs, wall time. Written next to the outputs so any run can be
// reproduced from its manifest alone.
struct RunManifest {
  std::string command;
  std::string resolved_config_json;  // canonical dump of the config actually used
  std::map<std::string, std::string> input_hashes;  // path -> fnv1a64 hex
  std::vector<std::string> outputs;
  double wall_time_seconds = 0.0;
  std::string artifact_version;

  void add_input(const std::string& path);
  std::string to_json() const;
  void save(const std::string& path) const;
};

}  // namespace refdense
