#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "ohdqn/catch_env.hpp"
#include "ohdqn/random.hpp"

namespace ohdqn {

struct Transition {
  catch_game::Observation observation;
  std::uint8_t action = 0;
  float reward = 0.0f;
  catch_game::Observation next_observation;
  bool terminal = false;
};

// Reward in {-1, 0, +1} and action in {0, 1, 2}.
bool is_valid(const Transition& t);

// Fixed-capacity FIFO ring with uniform sampling (with replacement).
template <typename T>
class RingBuffer {
 public:
  explicit RingBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ring buffer capacity must be positive");
  }

  void push(T item) {
    if (items_.size() < capacity_) {
      items_.push_back(std::move(item));
    } else {
      items_[cursor_] = std::move(item);
    }
    cursor_ = (cursor_ + 1) % capacity_;
  }

  std::size_t size() const { return items_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return items_.size() == capacity_; }

  // i-th oldest entry.
  const T& at(std::size_t i) const {
    if (i >= items_.size()) throw std::out_of_range("ring buffer index out of range");
    return full() ? items_[(cursor_ + i) % capacity_] : items_[i];
  }

  // n independent uniform draws. Throws std::length_error if fewer than n
  // entries are stored.
  std::vector<std::reference_wrapper<const T>> sample(std::size_t n, Rng& rng) const {
    if (items_.size() < n || items_.empty()) {
      throw std::length_error("cannot sample " + std::to_string(n) + " items from a buffer holding " +
                              std::to_string(items_.size()));
    }
    std::uniform_int_distribution<std::size_t> pick(0, items_.size() - 1);
    std::vector<std::reference_wrapper<const T>> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.emplace_back(items_[pick(rng)]);
    return out;
  }

 private:
  std::size_t capacity_;
  std::size_t cursor_ = 0;
  std::vector<T> items_;
};

using ReplayBuffer = RingBuffer<Transition>;

}  // namespace ohdqn
