#include "endonav/pipeline/manifest.hpp"

#include <chrono>
#include <fstream>

#include "endonav/errors.hpp"

#ifndef ENDONAV_VERSION
#define ENDONAV_VERSION "0.0.0"
#endif

namespace endonav::pipeline {

using nlohmann::json;

std::string_view version() { return ENDONAV_VERSION; }

void write_atomic(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    body(out);
    out.flush();
    if (!out) throw std::runtime_error("write to '" + tmp.string() + "' failed");
  }
  std::filesystem::rename(tmp, path);
}

Manifest Manifest::open(const RunConfig& cfg) {
  Manifest m;
  m.root_ = cfg.output_dir;
  const json echo = to_json(cfg);
  if (std::filesystem::exists(m.file())) {
    std::ifstream in(m.file());
    try {
      m.doc_ = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("unreadable manifest '" + m.file().string() + "': " + e.what());
    }
    if (m.doc_.value("schema", "") != kManifestSchema)
      throw ConfigError("'" + m.file().string() + "' is not an endonav manifest");
    if (m.doc_.at("config") != echo)
      throw ConfigError("output directory '" + m.root_.string() +
                        "' holds a run with a different configuration");
    return m;
  }
  m.doc_ = {{"schema", kManifestSchema},
            {"version", version()},
            {"config", echo},
            {"seeds", {{"run", cfg.seed}}},
            {"stages", json::object()},
            {"stage_order", json::array()}};
  return m;
}

void Manifest::set_seed(const std::string& name, std::uint64_t seed) { doc_["seeds"][name] = seed; }

void Manifest::set_anatomies(const std::vector<std::string>& train, const std::vector<std::string>& holdout) {
  doc_["anatomies"] = {{"train", train}, {"holdout", holdout}};
}

std::optional<std::pair<std::vector<std::string>, std::vector<std::string>>> Manifest::anatomies() const {
  if (!doc_.contains("anatomies")) return std::nullopt;
  const auto& a = doc_.at("anatomies");
  return std::make_pair(a.at("train").get<std::vector<std::string>>(), a.at("holdout").get<std::vector<std::string>>());
}

std::optional<StageRecord> Manifest::stage(const std::string& name) const {
  const auto& stages = doc_.at("stages");
  if (!stages.contains(name)) return std::nullopt;
  const auto& s = stages.at(name);
  StageRecord rec;
  rec.status = s.at("status").get<std::string>();
  rec.wall_clock_s = s.at("wall_clock_s").get<double>();
  rec.artifacts = s.at("artifacts").get<std::vector<std::string>>();
  rec.error = s.value("error", "");
  return rec;
}

bool Manifest::completed(const std::string& name) const {
  const auto rec = stage(name);
  if (!rec || rec->status != "ok") return false;
  for (const auto& a : rec->artifacts)
    if (!std::filesystem::exists(root_ / a)) return false;
  return true;
}

void Manifest::record(const std::string& name, const StageRecord& rec) {
  json s = {{"status", rec.status}, {"wall_clock_s", rec.wall_clock_s}, {"artifacts", rec.artifacts}};
  if (!rec.error.empty()) s["error"] = rec.error;
  doc_["stages"][name] = s;
  auto& order = doc_["stage_order"];
  if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
}

std::vector<std::string> Manifest::artifacts() const {
  std::vector<std::string> out;
  for (const auto& name : doc_.at("stage_order")) {
    const auto rec = stage(name.get<std::string>());
    if (rec) out.insert(out.end(), rec->artifacts.begin(), rec->artifacts.end());
  }
  return out;
}

void Manifest::save() const {
  write_atomic(file(), [&](std::ostream& out) { out << doc_.dump(2) << '\n'; });
}

void run_stage(Manifest& manifest, const std::string& name,
               const std::function<std::vector<std::string>()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  // Artifacts owned by other stages keep their single owner.
  manifest.record(name, {"running", 0.0, {}, {}});
  manifest.save();
  try {
    auto artifacts = body();
    manifest.record(name, {"ok", elapsed(), std::move(artifacts), {}});
    manifest.save();
  } catch (const std::exception& e) {
    manifest.record(name, {"failed", elapsed(), {}, e.what()});
    manifest.save();
    throw;
  }
}

}  // namespace endonav::pipeline
