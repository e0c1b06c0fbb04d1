#pragma once

// Reader/writer for the "endonav-anatomy/1" JSON document:
//   {version, arch_type, branches: [{id, parent: {id, s} | null,
//                                    points: [{x, y, z, r}]}]}
// All lengths in millimetres.

#include <filesystem>
#include <string>
#include <string_view>

#include "endonav/vessel/tree.hpp"

namespace endonav::vessel {

inline constexpr std::string_view kAnatomySchema = "endonav-anatomy/1";

VesselTree load_tree(std::string_view document);
VesselTree load_tree_file(const std::filesystem::path& path);

std::string save_tree(const VesselTree& tree);
void save_tree_file(const VesselTree& tree, const std::filesystem::path& path);

std::string_view to_string(ArchType type);
ArchType arch_type_from_string(std::string_view text);

}  // namespace endonav::vessel
