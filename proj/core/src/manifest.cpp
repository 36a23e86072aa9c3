#include "cads/manifest.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace cads {

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ull;
  }
  return hash;
}

std::uint64_t fnv1a64_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot hash missing file: " + path.string());
  std::uint64_t hash = 0xcbf29ce484222325ull;
  char buf[1 << 16];
  while (is) {
    is.read(buf, sizeof(buf));
    const auto got = is.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ull;
    }
  }
  return hash;
}

std::string fnv1a64_hex(const std::filesystem::path& path) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64_file(path)));
  return buf;
}

namespace {

void require_exists(const std::filesystem::path& base, const std::string& rel) {
  if (rel.empty()) return;
  const auto full = base / rel;
  if (!std::filesystem::exists(full)) {
    throw std::runtime_error("manifest references missing file: " + full.string());
  }
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  const auto base = path.parent_path();
  for (const auto& in : m.inputs) require_exists(base, in.path);
  require_exists(base, m.checkpoint_path);
  require_exists(base, m.samples_path);
  require_exists(base, m.metrics_path);

  nlohmann::ordered_json j;
  j["command"] = m.command;
  j["config"] = m.config_text;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::array();
  for (const auto& in : m.inputs) {
    inputs.push_back({{"path", in.path}, {"fnv1a64", in.hash}});
  }
  j["inputs"] = inputs;
  j["checkpoint"] = m.checkpoint_path;
  j["samples"] = m.samples_path;
  j["metrics"] = m.metrics_path;
  j["seed"] = m.seed;
  j["loss_curve"] = m.loss_curve;
  j["wall_seconds"] = m.wall_seconds;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write manifest: " + path.string());
  os << j.dump(2) << "\n";
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open manifest: " + path.string());
  nlohmann::json j;
  is >> j;
  RunManifest m;
  m.command = j.at("command").get<std::string>();
  m.config_text = j.at("config").get<std::string>();
  for (const auto& in : j.at("inputs")) {
    m.inputs.push_back({in.at("path").get<std::string>(),
                        in.at("fnv1a64").get<std::string>()});
  }
  m.checkpoint_path = j.at("checkpoint").get<std::string>();
  m.samples_path = j.at("samples").get<std::string>();
  m.metrics_path = j.at("metrics").get<std::string>();
  m.seed = j.at("seed").get<std::uint64_t>();
  m.loss_curve = j.at("loss_curve").get<std::vector<double>>();
  m.wall_seconds = j.at("wall_seconds").get<double>();
  return m;
}

void verify_manifest(const std::filesystem::path& manifest_path) {
  const RunManifest m = read_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  for (const auto& in : m.inputs) {
    require_exists(base, in.path);
    const std::string actual = fnv1a64_hex(base / in.path);
    if (actual != in.hash) {
      throw std::runtime_error("manifest hash mismatch for " + in.path +
                               ": recorded " + in.hash + ", actual " + actual);
    }
  }
  require_exists(base, m.checkpoint_path);
  require_exists(base, m.samples_path);
  require_exists(base, m.metrics_path);
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir)
    : lock_path_(dir / ".cads.lock") {
  std::filesystem::create_directories(dir);
  const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    throw std::runtime_error(
        "output directory is locked by another run (remove " +
        lock_path_.string() + " if stale)");
  }
  ::close(fd);
  held_ = true;
}

DirectoryLock::~DirectoryLock() {
  if (held_) {
    std::error_code ec;
    std::filesystem::remove(lock_path_, ec);
  }
}

}  // namespace cads
