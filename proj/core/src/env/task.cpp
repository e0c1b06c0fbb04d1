#include "endonav/env/task.hpp"

#include <string>

#include "endonav/errors.hpp"

namespace endonav::env {
namespace {

using vessel::Region;
using vessel::VesselTree;

double branch_length(const VesselTree& tree, const std::string& id) {
  const auto idx = tree.find(id);
  if (!idx) throw ResetError("anatomy has no branch '" + id + "'");
  return tree.branch(*idx).length();
}

}  // namespace

std::string_view to_string(TaskId id) {
  switch (id) {
    case TaskId::A1: return "A1";
    case TaskId::A2L: return "A2L";
    case TaskId::A2R: return "A2R";
    case TaskId::A3L: return "A3L";
    case TaskId::A3R: return "A3R";
  }
  return "?";
}

TaskId task_from_string(std::string_view text) {
  for (TaskId id : kAllTasks)
    if (to_string(id) == text) return id;
  throw ArgumentError("unknown task '" + std::string(text) + "'");
}

TaskSpec resolve_task(TaskId id, const VesselTree& tree) {
  const auto lsa = tree.find("lsa");
  if (!lsa) throw ResetError("anatomy has no branch 'lsa'");
  const auto& att = tree.branch(*lsa).parent;
  if (!att || tree.branch(att->parent).id != "aorta")
    throw ResetError("'lsa' must attach to 'aorta'");
  const double s_lsa = att->s;
  const Region arch_top{"aorta", s_lsa - 60.0, s_lsa - 40.0};

  TaskSpec task;
  task.id = id;
  switch (id) {
    case TaskId::A1:
      task.start = {"aorta", 5.0, 25.0};
      task.target = arch_top;
      break;
    case TaskId::A2L:
      task.start = arch_top;
      task.target = {"lcca", 30.0, 45.0};
      break;
    case TaskId::A2R:
      task.start = arch_top;
      task.target = {"rcca", 30.0, 45.0};
      break;
    case TaskId::A3L:
      task.start = {"lcca", 5.0, 20.0};
      task.target = {"lica", 25.0, 40.0};
      break;
    case TaskId::A3R:
      task.start = {"rcca", 5.0, 20.0};
      task.target = {"rica", 25.0, 40.0};
      break;
  }
  validate_task(task, tree);
  return task;
}

TaskSpec bifurcation_task(TaskId label, bool right) {
  TaskSpec task;
  task.id = label;
  task.start = {"trunk", 5.0, 15.0};
  task.target = {right ? "right" : "left", 30.0, 45.0};
  return task;
}

void validate_task(const TaskSpec& task, const VesselTree& tree) {
  for (const Region* r : {&task.start, &task.target}) {
    const double len = branch_length(tree, r->branch);
    if (!(r->s_min >= 0.0 && r->s_min <= r->s_max && r->s_max <= len))
      throw ResetError("task " + std::string(to_string(task.id)) + ": region [" +
                       std::to_string(r->s_min) + ", " + std::to_string(r->s_max) + "] on '" +
                       r->branch + "' does not fit the branch (length " + std::to_string(len) +
                       ")");
  }
}

TaskSpec map_task(const TaskSpec& task, const VesselTree& base, const VesselTree& episode) {
  TaskSpec out = task;
  for (Region* r : {&out.start, &out.target}) {
    const double ratio = branch_length(episode, r->branch) / branch_length(base, r->branch);
    r->s_min *= ratio;
    r->s_max *= ratio;
  }
  validate_task(out, episode);
  return out;
}

}  // namespace endonav::env
