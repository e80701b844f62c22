#include "aup/mdp.hpp"

#include <cmath>
#include <limits>

namespace aup {

Mdp Mdp::make(int n_states, int n_actions, int noop, double gamma) {
  if (n_states <= 0 || n_actions <= 0)
    throw std::invalid_argument("Mdp::make: empty state or action space");
  if (noop < 0 || noop >= n_actions)
    throw std::invalid_argument("Mdp::make: no-op action out of range");
  if (gamma < 0.0 || gamma >= 1.0)
    throw std::invalid_argument("Mdp::make: gamma must lie in [0,1)");
  Mdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.noop = noop;
  m.gamma = gamma;
  m.transitions.assign(n_states, std::vector<std::vector<Transition>>(n_actions));
  m.reward.assign(n_states, std::vector<double>(n_actions, 0.0));
  m.terminal.assign(n_states, false);
  return m;
}

void Mdp::set_deterministic(int s, int a, int next, double r) {
  transitions.at(s).at(a) = {Transition{next, 1.0}};
  reward.at(s).at(a) = r;
}

void Mdp::set_terminal(int s) {
  terminal.at(s) = true;
  for (int a = 0; a < n_actions; ++a) set_deterministic(s, a, s, 0.0);
}

int Mdp::sample_next(int s, int a, Rng& rng) const {
  const auto& dist = transitions.at(s).at(a);
  if (dist.empty()) throw ContractViolation("Mdp: no transition defined for (s,a)");
  if (dist.size() == 1) return dist[0].next;
  double u = rng.next_double();
  double acc = 0.0;
  for (const auto& t : dist) {
    acc += t.prob;
    if (u < acc) return t.next;
  }
  return dist.back().next;
}

void Mdp::validate() const {
  if (noop < 0 || noop >= n_actions)
    throw std::invalid_argument("Mdp: no-op action missing");
  for (int s = 0; s < n_states; ++s) {
    for (int a = 0; a < n_actions; ++a) {
      const auto& dist = transitions[s][a];
      if (dist.empty())
        throw std::invalid_argument("Mdp: undefined transition at s=" +
                                    std::to_string(s) + " a=" + std::to_string(a));
      double sum = 0.0;
      for (const auto& t : dist) {
        if (t.next < 0 || t.next >= n_states)
          throw std::invalid_argument("Mdp: successor out of range");
        if (t.prob < 0.0) throw std::invalid_argument("Mdp: negative probability");
        sum += t.prob;
      }
      if (std::abs(sum - 1.0) > 1e-9)
        throw std::invalid_argument("Mdp: transition distribution at s=" +
                                    std::to_string(s) + " a=" + std::to_string(a) +
                                    " sums to " + std::to_string(sum));
      if (terminal[s]) {
        if (dist.size() != 1 || dist[0].next != s)
          throw std::invalid_argument("Mdp: terminal state " + std::to_string(s) +
                                      " must self-loop");
        if (reward[s][a] != 0.0)
          throw std::invalid_argument("Mdp: terminal state " + std::to_string(s) +
                                      " must yield zero reward");
      }
    }
  }
}

double TabularQ::max_value(int s) const {
  double best = at(s, 0);
  for (int a = 1; a < n_actions_; ++a) best = std::max(best, at(s, a));
  return best;
}

int TabularQ::argmax(int s) const {
  int best = 0;
  double best_v = at(s, 0);
  for (int a = 1; a < n_actions_; ++a) {
    if (at(s, a) > best_v) {
      best_v = at(s, a);
      best = a;
    }
  }
  return best;
}

double TabularQ::max_abs_diff(const TabularQ& other) const {
  if (other.n_states_ != n_states_ || other.n_actions_ != n_actions_)
    throw std::invalid_argument("TabularQ: shape mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i)
    d = std::max(d, std::abs(values_[i] - other.values_[i]));
  return d;
}

void q_update(TabularQ& q, int s, int a, double r, int s_next, bool next_terminal,
              double alpha, double gamma) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("q_update: alpha must lie in (0,1]");
  const double bootstrap = next_terminal ? 0.0 : q.max_value(s_next);
  const double target = r + gamma * bootstrap;
  q.at(s, a) += alpha * (target - q.at(s, a));
}

TabularQ value_iteration(const Mdp& mdp, double tolerance, int max_iterations,
                         std::optional<double> clip_max) {
  if (tolerance <= 0.0) throw std::invalid_argument("value_iteration: tolerance must be > 0");
  TabularQ q(mdp.n_states, mdp.n_actions);
  TabularQ next(mdp.n_states, mdp.n_actions);
  for (int it = 0; it < max_iterations; ++it) {
    double residual = 0.0;
    for (int s = 0; s < mdp.n_states; ++s) {
      if (mdp.terminal[s]) continue;  // terminal rows stay 0
      for (int a = 0; a < mdp.n_actions; ++a) {
        double v = mdp.reward[s][a];
        for (const auto& t : mdp.transitions[s][a]) {
          if (!mdp.terminal[t.next]) v += mdp.gamma * t.prob * q.max_value(t.next);
        }
        if (clip_max) v = std::min(v, *clip_max);
        residual = std::max(residual, std::abs(v - q.at(s, a)));
        next.at(s, a) = v;
      }
    }
    std::swap(q, next);
    if (residual < tolerance) return q;
  }
  throw std::runtime_error("value_iteration: no convergence to tolerance " +
                           std::to_string(tolerance) + " within " +
                           std::to_string(max_iterations) + " iterations");
}

int select_action(const TabularQ& q, int s, Phase phase, double epsilon, Rng& rng) {
  if (phase == Phase::kRandom) return rng.next_int(q.n_actions());
  if (rng.next_double() < epsilon) return rng.next_int(q.n_actions());
  return q.argmax(s);
}

}  // namespace aup
