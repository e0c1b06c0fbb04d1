#include "endonav/vessel/anatomy_io.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "endonav/errors.hpp"

namespace endonav::vessel {

using nlohmann::json;

std::string_view to_string(ArchType type) {
  return type == ArchType::TypeI ? "TypeI" : "TypeII";
}

ArchType arch_type_from_string(std::string_view text) {
  if (text == "TypeI") return ArchType::TypeI;
  if (text == "TypeII") return ArchType::TypeII;
  throw ParseError("unknown arch_type '" + std::string(text) + "'");
}

namespace {

double number(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end() || !it->is_number())
    throw ParseError(where + ": missing numeric field '" + key + "'");
  return it->get<double>();
}

}  // namespace

VesselTree load_tree(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("anatomy is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("anatomy document must be an object");
  if (doc.value("version", "") != kAnatomySchema)
    throw ParseError("anatomy version must be '" + std::string(kAnatomySchema) + "'");
  if (!doc.contains("arch_type") || !doc["arch_type"].is_string())
    throw ParseError("anatomy is missing 'arch_type'");
  const ArchType arch = arch_type_from_string(doc["arch_type"].get<std::string>());
  if (!doc.contains("branches") || !doc["branches"].is_array())
    throw ParseError("anatomy is missing the 'branches' array");

  std::vector<BranchDraft> drafts;
  std::size_t bi = 0;
  for (const auto& jb : doc["branches"]) {
    const std::string where = "branch " + std::to_string(bi++);
    if (!jb.is_object() || !jb.contains("id") || !jb["id"].is_string())
      throw ParseError(where + ": missing string 'id'");
    BranchDraft d;
    d.id = jb["id"].get<std::string>();
    const std::string named = "branch '" + d.id + "'";
    const auto parent = jb.find("parent");
    if (parent != jb.end() && !parent->is_null()) {
      if (!parent->is_object() || !parent->contains("id") || !(*parent)["id"].is_string())
        throw ParseError(named + ": parent must be {id, s} or null");
      d.parent_id = (*parent)["id"].get<std::string>();
      d.parent_s = number(*parent, "s", named + " parent");
    }
    if (!jb.contains("points") || !jb["points"].is_array())
      throw ParseError(named + ": missing 'points' array");
    std::size_t pi = 0;
    for (const auto& jp : jb["points"]) {
      const std::string pwhere = named + " point " + std::to_string(pi++);
      if (!jp.is_object()) throw ParseError(pwhere + ": must be an object");
      d.positions.emplace_back(number(jp, "x", pwhere), number(jp, "y", pwhere),
                               number(jp, "z", pwhere));
      d.radii.push_back(number(jp, "r", pwhere));
    }
    drafts.push_back(std::move(d));
  }
  return VesselTree::build(std::move(drafts), arch);
}

VesselTree load_tree_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open anatomy file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return load_tree(ss.str());
}

std::string save_tree(const VesselTree& tree) {
  json doc;
  doc["version"] = kAnatomySchema;
  doc["arch_type"] = to_string(tree.arch_type());
  json branches = json::array();
  for (const auto& b : tree.branches()) {
    json jb;
    jb["id"] = b.id;
    if (b.parent)
      jb["parent"] = {{"id", tree.branch(b.parent->parent).id}, {"s", b.parent->s}};
    else
      jb["parent"] = nullptr;
    json pts = json::array();
    for (const auto& p : b.points)
      pts.push_back({{"x", p.position.x()},
                     {"y", p.position.y()},
                     {"z", p.position.z()},
                     {"r", p.radius}});
    jb["points"] = std::move(pts);
    branches.push_back(std::move(jb));
  }
  doc["branches"] = std::move(branches);
  return doc.dump(1);
}

void save_tree_file(const VesselTree& tree, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write anatomy file " + path.string());
  out << save_tree(tree) << '\n';
}

}  // namespace endonav::vessel
