#pragma once

// "endonav-replay/1" binary file: a text header line followed by a stream of
// little-endian episode records, so collectors can append while running.

#include <filesystem>
#include <fstream>
#include <string_view>

#include "endonav/replay/replay_buffer.hpp"

namespace endonav::replay {

inline constexpr std::string_view kReplayMagic = "endonav-replay/1\n";

class ReplayWriter {
 public:
  // Creates the file (with header) or appends to an existing replay file.
  // Throws FormatError when an existing file has a foreign header.
  explicit ReplayWriter(const std::filesystem::path& path, bool truncate = false);
  void append(const EpisodeRecord& ep);
  void flush();

 private:
  std::ofstream out_;
};

std::vector<EpisodeRecord> read_episodes(const std::filesystem::path& path);

void save(const ReplayBuffer& buffer, const std::filesystem::path& path);
// Throws FormatError on bad magic/version or a truncated record.
ReplayBuffer load(const std::filesystem::path& path, std::size_t capacity = 10'000'000);

}  // namespace endonav::replay
