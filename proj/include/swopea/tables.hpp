#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace swopea {

/// Shape shared by every tabular object: |S|, |A| and the horizon H.
struct Dims {
  int n_states = 0;
  int n_actions = 0;
  int horizon = 0;

  [[nodiscard]] std::size_t state_actions() const {
    return static_cast<std::size_t>(n_states) * static_cast<std::size_t>(n_actions);
  }
  bool operator==(const Dims&) const = default;
};

/// Dense |S| x |A| table of reals, row-major in the state.
class StepTable {
 public:
  StepTable() = default;
  StepTable(int n_states, int n_actions, double fill = 0.0)
      : n_states_(n_states), n_actions_(n_actions),
        values_(static_cast<std::size_t>(n_states) * n_actions, fill) {}

  [[nodiscard]] int n_states() const { return n_states_; }
  [[nodiscard]] int n_actions() const { return n_actions_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }

  double& operator()(int s, int a) { return values_[index(s, a)]; }
  double operator()(int s, int a) const { return values_[index(s, a)]; }

  [[nodiscard]] std::span<const double> row(int s) const {
    return {values_.data() + static_cast<std::size_t>(s) * n_actions_,
            static_cast<std::size_t>(n_actions_)};
  }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }

  /// max_a table(s, a)
  [[nodiscard]] double max_value(int s) const {
    auto r = row(s);
    return *std::max_element(r.begin(), r.end());
  }
  /// argmax_a table(s, a); ties go to the lowest action index.
  [[nodiscard]] int greedy_action(int s) const {
    auto r = row(s);
    return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  /// Vector of max_a table(s, a) over all states.
  [[nodiscard]] std::vector<double> state_values() const {
    std::vector<double> v(static_cast<std::size_t>(n_states_));
    for (int s = 0; s < n_states_; ++s) v[s] = max_value(s);
    return v;
  }

  [[nodiscard]] bool same_shape(const StepTable& o) const {
    return n_states_ == o.n_states_ && n_actions_ == o.n_actions_;
  }

  bool operator==(const StepTable&) const = default;

 private:
  [[nodiscard]] std::size_t index(int s, int a) const {
    return static_cast<std::size_t>(s) * n_actions_ + a;
  }

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> values_;
};

/// Largest absolute entrywise difference. Throws on shape mismatch.
inline double max_abs_diff(const StepTable& a, const StepTable& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("table shape mismatch");
  double d = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) d = std::max(d, std::abs(av[i] - bv[i]));
  return d;
}

/// Deterministic tabular policy: one action per (step, state).
class Policy {
 public:
  Policy() = default;
  Policy(int horizon, int n_states, int fill = 0)
      : horizon_(horizon), n_states_(n_states),
        actions_(static_cast<std::size_t>(horizon) * n_states, fill) {}

  [[nodiscard]] int horizon() const { return horizon_; }
  [[nodiscard]] int n_states() const { return n_states_; }

  int& operator()(int h, int s) { return actions_[static_cast<std::size_t>(h) * n_states_ + s]; }
  int operator()(int h, int s) const {
    return actions_[static_cast<std::size_t>(h) * n_states_ + s];
  }
  [[nodiscard]] std::span<const int> actions() const { return actions_; }

  bool operator==(const Policy&) const = default;

 private:
  int horizon_ = 0;
  int n_states_ = 0;
  std::vector<int> actions_;
};

}  // namespace swopea
