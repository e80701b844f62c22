#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "aup/mdp.hpp"

namespace aup {

/// Raised when the attainable-utility normalizer is not strictly positive,
/// which signals an auxiliary set violating the positivity requirement.
class ScaleDegeneracy : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Baseline { kStartingState, kInaction, kStepwiseInaction };
enum class Deviation { kAbsolute, kDecreaseOnly };
enum class ScaleMode { kEq2Total, kConstantOne };

const char* to_string(Baseline b);
const char* to_string(Deviation d);
const char* to_string(ScaleMode m);

/// Design-choice lattice for the impact penalty.
struct PenaltyConfig {
  double lambda = 0.67;
  Baseline baseline = Baseline::kStepwiseInaction;
  Deviation deviation = Deviation::kAbsolute;
  ScaleMode scale_mode = ScaleMode::kEq2Total;
  int rollout_horizon = 9;

  void validate() const {
    if (lambda < 0.0) throw std::invalid_argument("PenaltyConfig: lambda must be >= 0");
    if (rollout_horizon < 1)
      throw std::invalid_argument("PenaltyConfig: rollout_horizon must be >= 1");
  }
};

/// The finite auxiliary set: one state-indexed reward function per entry
/// (values in [0,1]; the reward for (s,a) is the reward of s) and one
/// Q-table per entry.
struct AuxiliarySet {
  std::vector<std::vector<double>> rewards;  // [i][state]
  std::vector<TabularQ> q_tables;            // [i]
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(rewards.size()); }
  double reward_of(int i, int s) const {
    return rewards[static_cast<std::size_t>(i)][static_cast<std::size_t>(s)];
  }
  /// Attainable utility of `s` under entry `i`: max_a Q_i(s,a), or 0 when
  /// the state is terminal (nothing can be optimized after the episode ends).
  double attainable(int i, int s, bool terminal) const {
    return terminal ? 0.0 : q_tables[static_cast<std::size_t>(i)].max_value(s);
  }
};

/// Draws `n` reward functions, each an independent uniform [0,1] value per
/// state. Q-tables start at zero.
AuxiliarySet sample_auxiliary_set(int n, int state_count, int action_count, Rng& rng);

/// Single-step impact penalty: the distance between acting and not acting
/// in the auxiliary Q-value embedding.
///   absolute:      sum_i |Q_i(s,a) - Q_i(s,noop)|
///   decrease-only: sum_i max(0, Q_i(s,noop) - Q_i(s,a))
double penalty(int s, int a, const AuxiliarySet& aux, Deviation deviation, int noop);

/// Normalizer: the total ability to optimize the auxiliary set,
/// sum_i Q_i(s,noop), or the constant 1. The total must be strictly
/// positive; otherwise throws ScaleDegeneracy.
double scale(int s, const AuxiliarySet& aux, ScaleMode mode, int noop);

/// R_AUP(s,a) = R(s,a) - lambda * Penalty(s,a) / Scale(s)
double aup_reward(int s, int a, double primary_r, const AuxiliarySet& aux,
                  const PenaltyConfig& config, int noop);

/// One observed transition drives |R|+1 backups: every auxiliary table
/// learns from its own reward, then the AUP table learns from the penalized
/// reward computed against the current (online) auxiliary tables. While the
/// online Eq.-2 scale is still nonpositive (early in training, before the
/// no-op has been tried at s) the penalty term is skipped rather than
/// raising: there is no attainable-utility information to preserve yet.
void aup_learning_step(int s, int a, int s_next, bool next_terminal, double primary_r,
                       AuxiliarySet& aux, TabularQ& q_aup, const PenaltyConfig& config,
                       double alpha, double gamma, int noop);

/// Flat text serialization of an auxiliary set (header: state count, action
/// count, |R|, seed; body: row-major values). Round-trips exactly.
void save_auxiliary_set(const AuxiliarySet& aux, std::ostream& out);
void save_auxiliary_set(const AuxiliarySet& aux, const std::string& path);
AuxiliarySet load_auxiliary_set(std::istream& in);
AuxiliarySet load_auxiliary_set_file(const std::string& path);

}  // namespace aup
