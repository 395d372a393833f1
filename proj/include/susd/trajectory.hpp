#pragma once

#include <iosfwd>
#include <vector>

namespace susd {

// The unit of replay storage and reward relabeling.
struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  std::vector<double> s_next;
  std::vector<double> z;        // flat skill vector active for the episode
  double task_reward = 0.0;
  double stored_intrinsic = 0.0;  // intrinsic reward at collection time
  bool done = false;
};

struct TrajectoryRecord {
  int episode = 0;
  int t = 0;
  Transition transition;
};

// Line-delimited structured text: one JSON object per step with keys
// episode, t, z, s, a, s_next, task_reward. Stable key order and float
// formatting; golden files pin the format.
void write_trajectories(std::ostream& out, const std::vector<TrajectoryRecord>& records);

}  // namespace susd
