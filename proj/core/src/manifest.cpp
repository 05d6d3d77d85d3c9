#include "refdense/manifest.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "refdense/errors.hpp"

namespace refdense {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64(text.data(), text.size());
}

std::string hash_hex(std::uint64_t h) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[i] = digits[h & 0xf];
    h >>= 4;
  }
  return s;
}

std::uint64_t hash_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("hash_file: cannot open " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  const std::string bytes = buf.str();
  return fnv1a64(bytes.data(), bytes.size());
}

void RunManifest::add_input(const std::string& path) {
  input_hashes[path] = "fnv1a64:" + hash_hex(hash_file(path));
}

std::string RunManifest::to_json() const {
  nlohmann::json doc;
  doc["command"] = command;
  doc["config"] = resolved_config_json.empty()
                      ? nlohmann::json(nullptr)
                      : nlohmann::json::parse(resolved_config_json);
  doc["inputs"] = input_hashes;
  doc["outputs"] = outputs;
  doc["wall_time_seconds"] = wall_time_seconds;
  doc["artifact_version"] = artifact_version;
  return doc.dump(2);
}

void RunManifest::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("run manifest: cannot open for write: " + path);
  os << to_json() << "\n";
}

}  // namespace refdense
