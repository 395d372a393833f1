#include "susd/trajectory.hpp"

#include <ostream>

#include <json.hpp>

namespace susd {

void write_trajectories(std::ostream& out, const std::vector<TrajectoryRecord>& records) {
  for (const auto& rec : records) {
    nlohmann::json line = {{"episode", rec.episode},
                           {"t", rec.t},
                           {"z", rec.transition.z},
                           {"s", rec.transition.s},
                           {"a", rec.transition.a},
                           {"s_next", rec.transition.s_next},
                           {"task_reward", rec.transition.task_reward}};
    out << line.dump() << "\n";
  }
}

}  // namespace susd
