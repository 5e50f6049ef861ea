#pragma once

// Run manifests: what was run, with which configuration, how each check came
// out, and a SHA-256 for every emitted file. Link with OpenSSL::Crypto.

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <openssl/evp.h>

#include <json.hpp>

#include "blil/csv.hpp"
#include "blil/error.hpp"

namespace blil {

inline constexpr const char* kLibraryVersion = "0.1.0";

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    out += buf;
  }
  return out;
}

struct CheckRecord {
  std::string name;
  bool pass = true;
  std::vector<std::pair<std::string, double>> measured;
  std::string note;
};

struct FileRecord {
  std::string path;
  std::string sha256;
};

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::string version = kLibraryVersion;
  std::string started_utc;
  double seconds = 0.0;
  std::vector<CheckRecord> checks;
  std::vector<FileRecord> files;

  bool all_pass() const {
    for (const auto& c : checks) {
      if (!c.pass) return false;
    }
    return true;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["command"] = command;
    j["version"] = version;
    j["config_hash"] = config_hash;
    j["started_utc"] = started_utc;
    j["seconds"] = seconds;
    j["pass"] = all_pass();
    j["checks"] = nlohmann::ordered_json::array();
    for (const auto& c : checks) {
      nlohmann::ordered_json m = nlohmann::ordered_json::object();
      for (const auto& [k, v] : c.measured) m[k] = v;
      j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"measured", m}, {"note", c.note}});
    }
    j["files"] = nlohmann::ordered_json::array();
    for (const auto& f : files) j["files"].push_back({{"path", f.path}, {"sha256", f.sha256}});
    return j;
  }
};

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

/// Writes each file under `dir`, records its hash, then writes manifest.json.
inline void write_run(const std::filesystem::path& dir, RunManifest& m,
                      const std::map<std::string, std::string>& files) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : files) {
    std::ofstream out(dir / name, std::ios::binary);
    if (!out) throw DomainError("cannot write " + (dir / name).string());
    out << content;
    m.files.push_back({name, sha256_hex(content)});
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw DomainError("cannot write " + (dir / "manifest.json").string());
  out << m.to_json().dump(2) << '\n';
}

}  // namespace blil
