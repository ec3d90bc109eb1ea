#include "ohdqn/catch_env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <queue>
#include <stdexcept>
#include <vector>

namespace ohdqn::catch_game {

std::string to_string(TransferMode mode) {
  return mode == TransferMode::Positive ? "positive" : "negative";
}

std::string to_string(BallType ball) { return ball == BallType::White ? "white" : "grey"; }

TransferMode parse_transfer_mode(const std::string& text) {
  if (text == "positive") return TransferMode::Positive;
  if (text == "negative") return TransferMode::Negative;
  throw std::invalid_argument("unknown transfer mode '" + text + "'");
}

BallType ball_for_episode(std::uint64_t episode_index) {
  return episode_index % 2 == 0 ? BallType::White : BallType::Grey;
}

double catch_reward(TransferMode mode, BallType ball, bool caught) {
  if (!caught) return 0.0;
  if (mode == TransferMode::Negative && ball == BallType::White) return -1.0;
  return 1.0;
}

ResetResult reset(TransferMode mode, std::uint64_t episode_index, Rng& rng, const Intensities& colors) {
  std::uniform_int_distribution<int> column(0, kGrid - 1);
  std::uniform_int_distribution<int> paddle(0, kMaxPaddleLeft);
  ResetResult r;
  r.state.mode = mode;
  r.state.ball = ball_for_episode(episode_index);
  r.state.ball_row = -1;
  r.state.ball_col = column(rng);
  r.state.paddle_left = paddle(rng);
  r.state.step_count = 0;
  const Frame first = render(r.state, colors);
  for (std::size_t f = 0; f < kFrames; ++f) {
    std::copy(first.begin(), first.end(), r.observation.pixels.begin() + f * kFramePixels);
  }
  return r;
}

StepResult step(const EnvState& state, Action action) {
  if (state.terminal()) throw std::logic_error("step: episode already terminated");
  StepResult r;
  r.state = state;
  const int shift = static_cast<int>(action) - 1;
  if (shift < -1 || shift > 1) throw std::invalid_argument("step: invalid action");
  r.state.paddle_left = std::clamp(state.paddle_left + shift, 0, kMaxPaddleLeft);
  r.state.ball_row = state.ball_row + 1;
  r.state.step_count = state.step_count + 1;
  r.terminal = r.state.terminal();
  if (r.terminal) r.reward = catch_reward(state.mode, state.ball, r.state.caught());
  return r;
}

Frame render(const EnvState& state, const Intensities& colors) {
  Frame frame;
  frame.fill(colors.background);
  for (int c = state.paddle_left; c < state.paddle_left + kPaddleWidth; ++c) {
    frame[(kGrid - 1) * kGrid + c] = colors.paddle;
  }
  if (state.ball_row >= 0) {
    frame[state.ball_row * kGrid + state.ball_col] =
        state.ball == BallType::White ? colors.white : colors.grey;
  }
  return frame;
}

void push_frame(Observation& observation, const Frame& frame) {
  auto& px = observation.pixels;
  std::copy(px.begin() + kFramePixels, px.end(), px.begin());
  std::copy(frame.begin(), frame.end(), px.end() - kFramePixels);
}

std::optional<BallSighting> locate_ball(const Observation& observation, const Intensities& colors) {
  const float* current = observation.frame(kFrames - 1);
  // The ball only reaches the paddle row on the terminal frame, which the
  // agent never acts on.
  for (int row = 0; row < kGrid - 1; ++row) {
    for (int col = 0; col < kGrid; ++col) {
      const float v = current[row * kGrid + col];
      if (v == colors.background) continue;
      const BallType ball =
          std::abs(v - colors.grey) < std::abs(v - colors.white) ? BallType::Grey : BallType::White;
      return BallSighting{row, col, ball};
    }
  }
  return std::nullopt;
}

namespace {

int paddle_left_from(const Observation& observation, const Intensities& colors) {
  const float* current = observation.frame(kFrames - 1);
  for (int col = 0; col < kGrid; ++col) {
    if (current[(kGrid - 1) * kGrid + col] == colors.paddle) return col;
  }
  return 0;
}

Action toward(int paddle_left, int target_left) {
  if (target_left < paddle_left) return Action::Left;
  if (target_left > paddle_left) return Action::Right;
  return Action::NoOp;
}

}  // namespace

Action scripted_action(const Observation& observation, TransferMode mode, const Intensities& colors) {
  const auto ball = locate_ball(observation, colors);
  if (!ball) return Action::NoOp;
  const int paddle_left = paddle_left_from(observation, colors);
  const bool wanted = catch_reward(mode, ball->ball, true) > 0.0;
  if (wanted) return toward(paddle_left, std::min(ball->col, kMaxPaddleLeft));
  return toward(paddle_left, ball->col < kGrid / 2 ? kMaxPaddleLeft : 0);
}

int min_moves_to_catch(int ball_col, int paddle_left) {
  std::vector<int> dist(kMaxPaddleLeft + 1, -1);
  std::queue<int> frontier;
  dist[paddle_left] = 0;
  frontier.push(paddle_left);
  while (!frontier.empty()) {
    const int p = frontier.front();
    frontier.pop();
    if (ball_col >= p && ball_col < p + kPaddleWidth) return dist[p];
    for (int shift : {-1, 1}) {
      const int next = std::clamp(p + shift, 0, kMaxPaddleLeft);
      if (dist[next] < 0) {
        dist[next] = dist[p] + 1;
        frontier.push(next);
      }
    }
  }
  return -1;
}

double optimal_episode_score(TransferMode mode) {
  double total = 0.0;
  int episodes = 0;
  for (BallType ball : {BallType::White, BallType::Grey}) {
    for (int col = 0; col < kGrid; ++col) {
      for (int start = 0; start <= kMaxPaddleLeft; ++start) {
        EnvState s;
        s.mode = mode;
        s.ball = ball;
        s.ball_col = col;
        s.paddle_left = start;
        // Ball dynamics are action-independent, so the reachable set of
        // paddle positions is the whole search state.
        std::vector<bool> reachable(kMaxPaddleLeft + 1, false);
        reachable[start] = true;
        int row = -1;
        double best = -2.0;
        for (int t = 0; t < kEpisodeSteps; ++t) {
          std::vector<bool> next(kMaxPaddleLeft + 1, false);
          for (int p = 0; p <= kMaxPaddleLeft; ++p) {
            if (!reachable[p]) continue;
            EnvState cur = s;
            cur.paddle_left = p;
            cur.ball_row = row;
            cur.step_count = t;
            for (Action a : {Action::Left, Action::NoOp, Action::Right}) {
              const StepResult r = step(cur, a);
              next[r.state.paddle_left] = true;
              if (r.terminal) best = std::max(best, r.reward);
            }
          }
          reachable.swap(next);
          ++row;
        }
        total += best;
        ++episodes;
      }
    }
  }
  return total / episodes;
}

CatchEnv::CatchEnv(TransferMode mode, std::uint64_t seed, Intensities colors)
    : mode_(mode), rng_(seed), colors_(colors) {}

const Observation& CatchEnv::reset() {
  if (started_) ++episode_;
  started_ = true;
  auto r = catch_game::reset(mode_, episode_, rng_, colors_);
  state_ = r.state;
  observation_ = r.observation;
  return observation_;
}

StepResult CatchEnv::step(Action action) {
  if (!started_) throw std::logic_error("CatchEnv::step before reset");
  StepResult r = catch_game::step(state_, action);
  state_ = r.state;
  push_frame(observation_, render(state_, colors_));
  return r;
}

void write_pgm(const Frame& frame, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  out << "P5\n" << kGrid << ' ' << kGrid << "\n255\n";
  for (float v : frame) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace ohdqn::catch_game
