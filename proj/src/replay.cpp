#include "ohdqn/replay.hpp"

namespace ohdqn {

bool is_valid(const Transition& t) {
  const bool reward_ok = t.reward == -1.0f || t.reward == 0.0f || t.reward == 1.0f;
  return reward_ok && t.action < catch_game::kActionCount;
}

}  // namespace ohdqn
