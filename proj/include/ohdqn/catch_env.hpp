#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "ohdqn/random.hpp"

namespace ohdqn::catch_game {

inline constexpr int kGrid = 24;
inline constexpr int kPaddleWidth = 2;
inline constexpr int kMaxPaddleLeft = kGrid - kPaddleWidth;  // 22
inline constexpr int kEpisodeSteps = kGrid;                  // ball spawns one row above the grid
inline constexpr std::size_t kFrames = 4;
inline constexpr std::size_t kFramePixels = kGrid * kGrid;
inline constexpr std::size_t kObservationSize = kFrames * kFramePixels;
inline constexpr std::size_t kActionCount = 3;

enum class TransferMode { Positive, Negative };
enum class BallType { White, Grey };
enum class Action : int { Left = 0, NoOp = 1, Right = 2 };

std::string to_string(TransferMode mode);
std::string to_string(BallType ball);
TransferMode parse_transfer_mode(const std::string& text);

struct Intensities {
  float background = 0.0f;
  float paddle = 1.0f;
  float white = 1.0f;
  float grey = 0.5f;
  bool operator==(const Intensities&) const = default;
};

struct EnvState {
  int ball_row = -1;  // -1 before the ball enters the grid
  int ball_col = 0;
  int paddle_left = 0;
  BallType ball = BallType::White;
  int step_count = 0;
  TransferMode mode = TransferMode::Positive;

  bool terminal() const { return ball_row == kGrid - 1; }
  bool caught() const { return ball_col >= paddle_left && ball_col < paddle_left + kPaddleWidth; }
  bool operator==(const EnvState&) const = default;
};

using Frame = std::array<float, kFramePixels>;

// Channel 3 is the current frame, channels 0..2 the previous three (oldest first).
struct Observation {
  std::array<float, kObservationSize> pixels{};
  const float* frame(std::size_t channel) const { return pixels.data() + channel * kFramePixels; }
  bool operator==(const Observation&) const = default;
};

// White on even episodes, grey on odd ones.
BallType ball_for_episode(std::uint64_t episode_index);

double catch_reward(TransferMode mode, BallType ball, bool caught);

struct ResetResult {
  EnvState state;
  Observation observation;
};

ResetResult reset(TransferMode mode, std::uint64_t episode_index, Rng& rng, const Intensities& colors = {});

struct StepResult {
  EnvState state;
  double reward = 0.0;
  bool terminal = false;
};

// Pure transition. Throws std::logic_error when `state` is already terminal.
StepResult step(const EnvState& state, Action action);

Frame render(const EnvState& state, const Intensities& colors = {});

// Shifts the stack one frame and appends `frame` as the current one.
void push_frame(Observation& observation, const Frame& frame);

// Ball position and type read back from the current frame of an observation.
struct BallSighting {
  int row;
  int col;
  BallType ball;
};
std::optional<BallSighting> locate_ball(const Observation& observation, const Intensities& colors = {});

// Hand-coded optimal controller: catch rewarding balls, steer away from
// penalised ones. NoOp while no ball is visible.
Action scripted_action(const Observation& observation, TransferMode mode, const Intensities& colors = {});

// Fewest steps needed to place the paddle under `ball_col`.
int min_moves_to_catch(int ball_col, int paddle_left);

// Expected per-episode return of an optimal policy under alternating ball
// types, by exhaustive enumeration over ball columns, paddle starts and
// reachable paddle trajectories.
double optimal_episode_score(TransferMode mode);

// Stateful wrapper owning the frame stack and episode counter.
class CatchEnv {
 public:
  CatchEnv(TransferMode mode, std::uint64_t seed, Intensities colors = {});

  const Observation& reset();
  StepResult step(Action action);

  const EnvState& state() const { return state_; }
  const Observation& observation() const { return observation_; }
  std::uint64_t episode_index() const { return episode_; }
  TransferMode mode() const { return mode_; }
  const Intensities& colors() const { return colors_; }

 private:
  TransferMode mode_;
  Rng rng_;
  Intensities colors_;
  std::uint64_t episode_ = 0;
  bool started_ = false;
  EnvState state_;
  Observation observation_;
};

// Binary 8-bit PGM of one frame.
void write_pgm(const Frame& frame, const std::filesystem::path& path);

}  // namespace ohdqn::catch_game
