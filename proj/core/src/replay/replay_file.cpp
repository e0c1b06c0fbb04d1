#include "endonav/replay/replay_file.hpp"

#include <cstdint>
#include <string>

#include "endonav/errors.hpp"

namespace endonav::replay {
namespace {

constexpr std::uint32_t kRecordTag = 0x45504953;  // "EPIS"

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw FormatError("replay file truncated inside an episode record");
  return v;
}

void put_vec2(std::ostream& out, const env::Vec2& v) {
  put(out, v.x());
  put(out, v.y());
}

env::Vec2 get_vec2(std::istream& in) {
  const double x = get<double>(in);
  const double y = get<double>(in);
  return {x, y};
}

void write_record(std::ostream& out, const EpisodeRecord& ep) {
  put(out, kRecordTag);
  put<std::uint8_t>(out, static_cast<std::uint8_t>(env::task_index(ep.task)));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ep.vasculature.size()));
  out.write(ep.vasculature.data(), static_cast<std::streamsize>(ep.vasculature.size()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ep.actions.size()));
  for (const auto& o : ep.observations) {
    for (const auto& p : o.tracking_now) put_vec2(out, p);
    for (const auto& p : o.tracking_prev) put_vec2(out, p);
    put_vec2(out, o.target);
    for (double a : o.prev_action) put(out, a);
  }
  for (const auto& a : ep.actions)
    for (double v : a) put(out, v);
  for (double r : ep.rewards) put(out, r);
  std::uint8_t flags = (ep.terminated ? 1 : 0) | (ep.truncated ? 2 : 0) | (ep.augment ? 4 : 0);
  put(out, flags);
  if (ep.augment) {
    for (int i = 0; i < 3; ++i) put(out, ep.augment->scale[i]);
    put(out, ep.augment->rot_x);
    put(out, ep.augment->rot_y);
  }
}

EpisodeRecord read_record(std::istream& in) {
  EpisodeRecord ep;
  const auto task = get<std::uint8_t>(in);
  if (task >= env::kTaskCount) throw FormatError("replay record has an unknown task id");
  ep.task = env::kAllTasks[task];
  const auto name_len = get<std::uint32_t>(in);
  if (name_len > 4096) throw FormatError("replay record vasculature id too long");
  ep.vasculature.resize(name_len);
  in.read(ep.vasculature.data(), name_len);
  const auto n = get<std::uint32_t>(in);
  if (n == 0 || n > kMaxEpisodeTransitions) throw FormatError("replay record has a bad length");
  ep.observations.resize(n + 1);
  for (auto& o : ep.observations) {
    for (auto& p : o.tracking_now) p = get_vec2(in);
    for (auto& p : o.tracking_prev) p = get_vec2(in);
    o.target = get_vec2(in);
    for (double& a : o.prev_action) a = get<double>(in);
  }
  ep.actions.resize(n);
  for (auto& a : ep.actions)
    for (double& v : a) v = get<double>(in);
  ep.rewards.resize(n);
  for (double& r : ep.rewards) r = get<double>(in);
  const auto flags = get<std::uint8_t>(in);
  ep.terminated = flags & 1;
  ep.truncated = flags & 2;
  if (flags & 4) {
    vessel::AugmentParams p;
    for (int i = 0; i < 3; ++i) p.scale[i] = get<double>(in);
    p.rot_x = get<double>(in);
    p.rot_y = get<double>(in);
    ep.augment = p;
  }
  return ep;
}

void check_header(std::istream& in, const std::filesystem::path& path) {
  std::string header(kReplayMagic.size(), '\0');
  in.read(header.data(), static_cast<std::streamsize>(header.size()));
  if (!in || header != kReplayMagic)
    throw FormatError("'" + path.string() + "' is not an endonav-replay/1 file");
}

}  // namespace

ReplayWriter::ReplayWriter(const std::filesystem::path& path, bool truncate) {
  const bool fresh = truncate || !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  if (!fresh) {
    std::ifstream in(path, std::ios::binary);
    check_header(in, path);
  }
  out_.open(path, std::ios::binary | (fresh ? std::ios::trunc : std::ios::app));
  if (!out_) throw FormatError("cannot open '" + path.string() + "' for writing");
  if (fresh) out_.write(kReplayMagic.data(), static_cast<std::streamsize>(kReplayMagic.size()));
}

void ReplayWriter::append(const EpisodeRecord& ep) {
  validate(ep);
  write_record(out_, ep);
  if (!out_) throw FormatError("replay write failed");
}

void ReplayWriter::flush() { out_.flush(); }

std::vector<EpisodeRecord> read_episodes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  check_header(in, path);
  std::vector<EpisodeRecord> out;
  while (true) {
    std::uint32_t tag = 0;
    in.read(reinterpret_cast<char*>(&tag), sizeof(tag));
    if (in.gcount() == 0 && in.eof()) break;
    if (!in || tag != kRecordTag) throw FormatError("replay file has a corrupt or truncated record");
    out.push_back(read_record(in));
  }
  return out;
}

void save(const ReplayBuffer& buffer, const std::filesystem::path& path) {
  ReplayWriter w(path, true);
  for (const auto& ep : buffer.all()) w.append(ep);
  w.flush();
}

ReplayBuffer load(const std::filesystem::path& path, std::size_t capacity) {
  ReplayBuffer buffer(capacity);
  for (auto& ep : read_episodes(path)) buffer.push_episode(std::move(ep));
  return buffer;
}

}  // namespace endonav::replay
