#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace cads {

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64_file(const std::filesystem::path& path);
std::string fnv1a64_hex(const std::filesystem::path& path);

struct FileRef {
  std::string path;  // relative to the manifest's directory
  std::string hash;  // fnv1a64, hex
};

// Record of one command invocation: configuration snapshot, content hashes of
// inputs, produced artifact paths, and timings. Referenced files must exist
// when the manifest is written.
struct RunManifest {
  std::string command;
  std::string config_text;
  std::vector<FileRef> inputs;
  std::string checkpoint_path;
  std::string samples_path;
  std::string metrics_path;
  std::uint64_t seed = 0;
  std::vector<double> loss_curve;
  double wall_seconds = 0.0;
};

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);
RunManifest read_manifest(const std::filesystem::path& path);

// Checks that every referenced file exists and its hash matches.
void verify_manifest(const std::filesystem::path& manifest_path);

// Exclusive lock on an output directory; throws if another run holds it.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path lock_path_;
  bool held_ = false;
};

}  // namespace cads
