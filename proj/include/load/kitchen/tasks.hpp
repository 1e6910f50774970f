#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "load/kitchen/world.hpp"

namespace load::kitchen {

struct TaskSpec {
    std::string name;
    // Builds objects only; reset() places the agent.
    std::function<WorldState(std::uint64_t seed)> build;
    std::function<bool(const WorldState&)> success;
    std::vector<Category> interactable;
};

const std::vector<TaskSpec>& task_registry();
std::vector<std::string> task_names();
// Throws std::invalid_argument listing registered tasks.
const TaskSpec& find_task(const std::string& name);

}  // namespace load::kitchen
