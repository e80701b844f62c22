#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "aup/env.hpp"
#include "aup/penalty.hpp"

namespace aup {

enum class AgentKind { kStandard, kModelFreeAup, kPlanner };
enum class AuxSource { kSampled, kStateIndicators };

/// One row of the agent zoo. The seven stock configurations are exposed as
/// named constructors.
struct AgentSpec {
  AgentKind kind = AgentKind::kStandard;
  PenaltyConfig penalty;
  AuxSource aux_source = AuxSource::kSampled;
  int aux_count = 30;
  int horizon = 9;
  std::string name = "standard";

  bool is_planner() const { return kind == AgentKind::kPlanner; }

  static AgentSpec standard();
  static AgentSpec model_free_aup();
  static AgentSpec aup();
  static AgentSpec starting_state_aup();
  static AgentSpec inaction_aup();
  static AgentSpec decrease_aup();
  static AgentSpec relative_reachability();

  static std::optional<AgentSpec> from_string(std::string_view name);
  /// The ablation order: AUP, Relative reachability, Standard, Model-free
  /// AUP, Starting state AUP, Inaction AUP, Decrease AUP.
  static std::vector<AgentSpec> ablation_roster();
};

/// Auxiliary set of per-state indicator functions whose Q-values emulate
/// discounted state reachability: value iteration with the bootstrapped
/// value clamped to 1 inside each backup, so Q(s,a) converges to
/// gamma^(shortest path after taking a), clipped at 1.
AuxiliarySet reachability_auxiliaries(const Mdp& mdp);

/// Per-episode context needed by the non-stepwise baselines.
struct EpisodeContext {
  GridState start;
  std::vector<GridState> inaction;  // inaction[t] = state after t no-ops from start
  int root_step = 0;                // episode steps elapsed at the planning root

  const GridState& inaction_at(int t) const {
    if (inaction.empty()) return start;
    const auto i = static_cast<std::size_t>(std::max(0, t));
    return i < inaction.size() ? inaction[i] : inaction.back();
  }

  static EpisodeContext make(const EnvSpec& env, int max_steps);
};

/// The state against which an action's rollout leaf is compared.
/// starting-state: the episode's initial state. inaction: the no-op rollout
/// from the episode start, time-aligned with the action branch. stepwise:
/// the no-op rollout from the current state.
GridState baseline_state(const GridState& s, Baseline kind, const EpisodeContext& ctx,
                         int depth, int horizon, const EnvSpec& env);

struct RolloutPair {
  std::vector<GridState> action_branch;
  std::vector<GridState> baseline_branch;
};

/// Both branches, time-aligned: [a, noop, noop, ...] against the configured
/// baseline, each extended until `horizon` steps past the planning root.
RolloutPair compute_rollout_pair(const GridState& s, Action a, Baseline kind,
                                 const EpisodeContext& ctx, int depth, int horizon,
                                 const EnvSpec& env);

/// Planner penalty term: simulate both branches, compare the auxiliary
/// attainable utilities at the two leaves under the deviation metric, and
/// divide by Scale(s). A nonpositive Eq.-2 scale (untrained table corner)
/// contributes no penalty.
double rollout_penalty(const GridState& s, Action a, const EpisodeContext& ctx, int depth,
                       const EnvSpec& env, const StateIndexer& indexer,
                       const AuxiliarySet& aux, const PenaltyConfig& config, int horizon);

/// Depth-`horizon` optimal discounted planning with a perfect model:
/// maximizes the sum of discounted penalized rewards, memoized on
/// (state, depth), ties broken by lowest action index.
Action plan(const GridState& s, const EnvSpec& env, const StateIndexer& indexer,
            const AuxiliarySet& aux, const PenaltyConfig& config, int horizon, double gamma,
            const EpisodeContext& ctx);

struct StepEvent {
  Action action = Action::kNoop;
  double reward = 0.0;   // observed primary reward
  double penalty = 0.0;  // raw penalty term (before scaling)
  double scale = 1.0;    // divisor applied to the penalty
};

struct EpisodeResult {
  std::vector<GridState> trajectory;
  std::vector<StepEvent> events;
  double episode_return = 0.0;
  Outcome outcome;
};

struct TrainResult {
  TabularQ q;                               // behavior table (Q or Q_AUP)
  AuxiliarySet aux;                         // model-free only
  std::vector<double> episode_performance;  // one entry per training episode
};

TrainResult train_standard(const EnvSpec& env, const StateIndexer& indexer,
                           const LearningSchedule& schedule, double gamma,
                           std::uint64_t seed);

TrainResult train_model_free(const EnvSpec& env, const StateIndexer& indexer,
                             const LearningSchedule& schedule, const PenaltyConfig& config,
                             int aux_count, double gamma, std::uint64_t seed);

/// An agent ready to act greedily: a trained table for the learners, or
/// frozen auxiliary tables plus a penalty configuration for the planners.
struct PreparedAgent {
  AgentSpec spec;
  TabularQ q;
  AuxiliarySet aux;
  std::vector<double> episode_performance;
};

/// Trains (learners), reuses `shared_aux` or trains a model-free run for its
/// tables (sampled-aux planners), or derives indicator auxiliaries from the
/// exact model (relative reachability).
PreparedAgent prepare_agent(const AgentSpec& spec, const EnvSpec& env,
                            const StateIndexer& indexer, const LearningSchedule& schedule,
                            double gamma, std::uint64_t seed,
                            const AuxiliarySet* shared_aux = nullptr);

/// The deterministic evaluation episode: greedy in the learned table, or
/// planned at every step. Produces the trajectory, the per-step event log,
/// and the classified outcome.
EpisodeResult run_episode(const PreparedAgent& agent, const EnvSpec& env,
                          const StateIndexer& indexer, double gamma);

}  // namespace aup
