#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aup/rng.hpp"

namespace aup {

/// Raised when an operation is applied outside its contract (e.g. stepping a
/// terminated state, or a planner model disagreeing with the environment).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Transition {
  int next = 0;
  double prob = 1.0;
};

/// Finite MDP: indexed states and actions, a distinguished no-op action,
/// per-(state,action) successor distributions and rewards, discount in [0,1).
/// Terminal states self-loop and yield zero reward thereafter.
struct Mdp {
  int n_states = 0;
  int n_actions = 0;
  int noop = 0;
  double gamma = 0.0;
  // transitions[s][a] = distribution over successors (sums to 1)
  std::vector<std::vector<std::vector<Transition>>> transitions;
  // reward[s][a], received on taking a in s
  std::vector<std::vector<double>> reward;
  std::vector<bool> terminal;

  static Mdp make(int n_states, int n_actions, int noop, double gamma);

  void set_deterministic(int s, int a, int next, double r);
  void set_terminal(int s);

  /// Sample a successor of (s, a). Deterministic entries never draw.
  int sample_next(int s, int a, Rng& rng) const;

  /// Checks the structural invariants: distributions sum to 1, no-op exists,
  /// terminal states self-loop with zero reward. Throws on violation.
  void validate() const;
};

/// Dense (state x action) action-value table.
class TabularQ {
 public:
  TabularQ() = default;
  TabularQ(int n_states, int n_actions)
      : n_states_(n_states), n_actions_(n_actions),
        values_(static_cast<std::size_t>(n_states) * n_actions, 0.0) {}

  int n_states() const { return n_states_; }
  int n_actions() const { return n_actions_; }

  double operator()(int s, int a) const { return values_[flat(s, a)]; }
  double& at(int s, int a) { return values_[flat(s, a)]; }
  double at(int s, int a) const { return values_[flat(s, a)]; }

  /// max_a Q(s, a)
  double max_value(int s) const;
  /// argmax_a Q(s, a); ties broken by lowest action index.
  int argmax(int s) const;

  /// Largest absolute entry-wise difference against another table of the
  /// same shape.
  double max_abs_diff(const TabularQ& other) const;

  const std::vector<double>& data() const { return values_; }
  std::vector<double>& data() { return values_; }

 private:
  std::size_t flat(int s, int a) const {
    if (s < 0 || s >= n_states_ || a < 0 || a >= n_actions_)
      throw std::out_of_range("TabularQ: index (" + std::to_string(s) + "," +
                              std::to_string(a) + ") out of range");
    return static_cast<std::size_t>(s) * n_actions_ + a;
  }

  int n_states_ = 0;
  int n_actions_ = 0;
  std::vector<double> values_;
};

/// One Q-learning backup:
///   q(s,a) += alpha * (r + gamma * max_a' q(s',a') - q(s,a))
/// The bootstrap term is zero when s' is terminal.
void q_update(TabularQ& q, int s, int a, double r, int s_next, bool next_terminal,
              double alpha, double gamma);

/// Exact solver: iterates the Bellman optimality backup until the residual
/// drops below `tolerance` everywhere. Terminal states keep Q = 0.
/// `clip_max`, when set, clamps the bootstrapped value inside each backup
/// (used for discounted-reachability emulation).
TabularQ value_iteration(const Mdp& mdp, double tolerance = 1e-10,
                         int max_iterations = 100000,
                         std::optional<double> clip_max = std::nullopt);

enum class Phase { kRandom, kGreedy };

/// Exploration schedule: uniform-random for the first `random_episodes`,
/// then epsilon-greedy for the remaining `greedy_episodes`.
struct LearningSchedule {
  double alpha = 1.0;
  int random_episodes = 4000;
  int greedy_episodes = 2000;
  double epsilon = 0.2;

  int total_episodes() const { return random_episodes + greedy_episodes; }
  Phase phase_for(int episode) const {
    return episode < random_episodes ? Phase::kRandom : Phase::kGreedy;
  }
};

/// Behavior policy. Random phase: uniform over actions. Greedy phase: with
/// probability 1-epsilon the argmax action (lowest index wins ties),
/// otherwise uniform.
int select_action(const TabularQ& q, int s, Phase phase, double epsilon, Rng& rng);

}  // namespace aup
