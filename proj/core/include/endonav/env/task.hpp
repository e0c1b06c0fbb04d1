#pragma once

#include <array>
#include <cstddef>
#include <string_view>

#include "endonav/vessel/tree.hpp"

namespace endonav::env {

enum class TaskId { A1, A2L, A2R, A3L, A3R };
inline constexpr std::size_t kTaskCount = 5;
inline constexpr std::array<TaskId, kTaskCount> kAllTasks = {TaskId::A1, TaskId::A2L, TaskId::A2R,
                                                             TaskId::A3L, TaskId::A3R};

std::string_view to_string(TaskId id);
TaskId task_from_string(std::string_view text);  // throws ArgumentError
inline std::size_t task_index(TaskId id) { return static_cast<std::size_t>(id); }

struct TaskSpec {
  TaskId id = TaskId::A1;
  vessel::Region start;
  vessel::Region target;
};

// Task regions on the synthetic aortic-arch anatomy. With s_lsa the arc of
// the LSA origin on the aorta:
//   A1        aorta [5, 25]                 -> aorta [s_lsa-60, s_lsa-40]
//   A2L/A2R   aorta [s_lsa-60, s_lsa-40]    -> lcca / rcca [30, 45]
//   A3L/A3R   lcca / rcca [5, 20]           -> lica / rica [25, 40]
// Throws ResetError when a required branch is missing or too short.
TaskSpec resolve_task(TaskId id, const vessel::VesselTree& tree);

// Two-branch toy task: trunk [5, 15] -> right [30, 45] (or left), used for
// learnability checks on generate_bifurcation trees.
TaskSpec bifurcation_task(TaskId label, bool right = true);

// Throws ResetError when a region names a missing branch or leaves its extent.
void validate_task(const TaskSpec& task, const vessel::VesselTree& tree);

// Carries the regions of a task defined on `base` over to `episode` (an
// augmented copy with the same branch ids) by scaling arcs with the branch
// length ratio.
TaskSpec map_task(const TaskSpec& task, const vessel::VesselTree& base,
                  const vessel::VesselTree& episode);

}  // namespace endonav::env
