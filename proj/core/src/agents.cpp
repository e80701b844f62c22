#include "aup/agents.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

namespace aup {

// ---------------------------------------------------------------------------
// Agent zoo

AgentSpec AgentSpec::standard() {
  AgentSpec s;
  s.kind = AgentKind::kStandard;
  s.name = "standard";
  s.penalty.lambda = 0.0;
  return s;
}

AgentSpec AgentSpec::model_free_aup() {
  AgentSpec s;
  s.kind = AgentKind::kModelFreeAup;
  s.name = "model-free-aup";
  s.penalty = PenaltyConfig{};  // lambda .67, stepwise, absolute, eq2
  return s;
}

AgentSpec AgentSpec::aup() {
  AgentSpec s;
  s.kind = AgentKind::kPlanner;
  s.name = "aup";
  s.penalty = PenaltyConfig{};
  return s;
}

AgentSpec AgentSpec::starting_state_aup() {
  AgentSpec s = aup();
  s.name = "starting-state-aup";
  s.penalty.baseline = Baseline::kStartingState;
  return s;
}

AgentSpec AgentSpec::inaction_aup() {
  AgentSpec s = aup();
  s.name = "inaction-aup";
  s.penalty.baseline = Baseline::kInaction;
  return s;
}

AgentSpec AgentSpec::decrease_aup() {
  AgentSpec s = aup();
  s.name = "decrease-aup";
  s.penalty.deviation = Deviation::kDecreaseOnly;
  return s;
}

AgentSpec AgentSpec::relative_reachability() {
  AgentSpec s;
  s.kind = AgentKind::kPlanner;
  s.name = "relative-reachability";
  s.aux_source = AuxSource::kStateIndicators;
  s.penalty.lambda = 0.2;
  s.penalty.baseline = Baseline::kInaction;
  s.penalty.deviation = Deviation::kDecreaseOnly;
  // The raw decrease-sum grows with the number of states (ending the episode
  // zeroes every reachability), so it is normalized like the other penalties;
  // lambda = .2 then sits in the regime where goals stay worth reaching.
  s.penalty.scale_mode = ScaleMode::kEq2Total;
  return s;
}

std::optional<AgentSpec> AgentSpec::from_string(std::string_view name) {
  for (const auto& spec : ablation_roster())
    if (spec.name == name) return spec;
  return std::nullopt;
}

std::vector<AgentSpec> AgentSpec::ablation_roster() {
  return {aup(),          relative_reachability(), standard(),     model_free_aup(),
          starting_state_aup(), inaction_aup(),    decrease_aup()};
}

// ---------------------------------------------------------------------------
// Reachability auxiliaries

AuxiliarySet reachability_auxiliaries(const Mdp& mdp) {
  const int S = mdp.n_states;
  const int A = mdp.n_actions;
  AuxiliarySet aux;
  aux.rewards.reserve(static_cast<std::size_t>(S));
  aux.q_tables.reserve(static_cast<std::size_t>(S));
  for (int target = 0; target < S; ++target) {
    std::vector<double> reward(static_cast<std::size_t>(S), 0.0);
    reward[static_cast<std::size_t>(target)] = 1.0;

    // Value iteration on the indicator reward with the backup clamped to 1;
    // the fixed point is gamma^d for a d-step shortest path, i.e. discounted
    // state reachability. The clamp makes the iteration settle exactly once
    // values have propagated, so this terminates in ~diameter sweeps.
    TabularQ q(S, A);
    TabularQ next(S, A);
    for (int it = 0; it < 100000; ++it) {
      double residual = 0.0;
      for (int s = 0; s < S; ++s) {
        if (mdp.terminal[s]) continue;
        const double r = reward[static_cast<std::size_t>(s)];
        for (int a = 0; a < A; ++a) {
          double v = r;
          for (const auto& t : mdp.transitions[s][a])
            if (!mdp.terminal[t.next]) v += mdp.gamma * t.prob * q.max_value(t.next);
          v = std::min(v, 1.0);
          residual = std::max(residual, std::abs(v - q.at(s, a)));
          next.at(s, a) = v;
        }
      }
      std::swap(q, next);
      if (residual < 1e-13) break;
    }
    aux.rewards.push_back(std::move(reward));
    aux.q_tables.push_back(std::move(q));
  }
  return aux;
}

// ---------------------------------------------------------------------------
// Rollout machinery

EpisodeContext EpisodeContext::make(const EnvSpec& env, int max_steps) {
  EpisodeContext ctx;
  ctx.start = env.initial_state();
  ctx.inaction.push_back(ctx.start);
  GridState s = ctx.start;
  for (int t = 0; t < max_steps && !s.is_terminal(); ++t) {
    s = env.step(s, Action::kNoop).state;
    ctx.inaction.push_back(s);
  }
  return ctx;
}

namespace {

GridState noop_rollout(GridState s, int steps, const EnvSpec& env) {
  for (int t = 0; t < steps && !s.is_terminal(); ++t) s = env.step(s, Action::kNoop).state;
  return s;
}

std::uint64_t full_key(const GridState& s) {
  return s.observed_key() | (static_cast<std::uint64_t>(s.step_count) << 52) |
         (static_cast<std::uint64_t>(s.is_terminal()) << 61);
}

struct PairPenaltyCache {
  std::unordered_map<std::uint64_t, double> values;
};

double leaf_comparison(const GridState& leaf_action, const GridState& leaf_baseline,
                       const StateIndexer& indexer, const AuxiliarySet& aux,
                       Deviation deviation, PairPenaltyCache* cache) {
  const int ia = indexer.index_of(leaf_action);
  const int ib = indexer.index_of(leaf_baseline);
  const bool ta = leaf_action.is_terminal();
  const bool tb = leaf_baseline.is_terminal();
  std::uint64_t key = 0;
  if (cache) {
    key = ((static_cast<std::uint64_t>(ia) << 1 | ta) << 32) |
          (static_cast<std::uint64_t>(ib) << 1 | tb);
    auto it = cache->values.find(key);
    if (it != cache->values.end()) return it->second;
  }
  double total = 0.0;
  for (int i = 0; i < aux.size(); ++i) {
    const double va = aux.attainable(i, ia, ta);
    const double vb = aux.attainable(i, ib, tb);
    total += deviation == Deviation::kAbsolute ? std::abs(va - vb) : std::max(0.0, vb - va);
  }
  if (cache) cache->values.emplace(key, total);
  return total;
}

struct ScaledPenalty {
  double raw = 0.0;
  double scale = 1.0;
  double scaled() const { return scale > 0.0 ? raw / scale : 0.0; }
};

ScaledPenalty rollout_penalty_parts(const GridState& s, Action a, const EpisodeContext& ctx,
                                    int depth, const EnvSpec& env, const StateIndexer& indexer,
                                    const AuxiliarySet& aux, const PenaltyConfig& config,
                                    int horizon, PairPenaltyCache* cache) {
  const int steps_left = horizon - depth;
  GridState leaf_action = env.step(s, a).state;
  leaf_action = noop_rollout(leaf_action, steps_left - 1, env);
  const GridState leaf_baseline = baseline_state(s, config.baseline, ctx, depth, horizon, env);

  ScaledPenalty p;
  p.raw = leaf_comparison(leaf_action, leaf_baseline, indexer, aux, config.deviation, cache);
  if (config.scale_mode == ScaleMode::kEq2Total) {
    double sc = 0.0;
    const int is = indexer.index_of(s);
    for (const auto& q : aux.q_tables) sc += q.at(is, kNoopIndex);
    p.scale = sc;  // nonpositive => no attainable-utility information; no penalty
  } else {
    p.scale = 1.0;
  }
  return p;
}

}  // namespace

GridState baseline_state(const GridState& s, Baseline kind, const EpisodeContext& ctx,
                         int depth, int horizon, const EnvSpec& env) {
  switch (kind) {
    case Baseline::kStartingState:
      return ctx.start;
    case Baseline::kInaction:
      return ctx.inaction_at(ctx.root_step + horizon);
    case Baseline::kStepwiseInaction:
      return noop_rollout(s, horizon - depth, env);
  }
  return s;
}

RolloutPair compute_rollout_pair(const GridState& s, Action a, Baseline kind,
                                 const EpisodeContext& ctx, int depth, int horizon,
                                 const EnvSpec& env) {
  RolloutPair pair;
  const int steps_left = horizon - depth;
  GridState cur = s;
  pair.action_branch.push_back(cur);
  for (int t = 0; t < steps_left; ++t) {
    if (!cur.is_terminal()) cur = env.step(cur, t == 0 ? a : Action::kNoop).state;
    pair.action_branch.push_back(cur);
  }
  GridState base = s;
  pair.baseline_branch.push_back(base);
  if (kind == Baseline::kStepwiseInaction) {
    for (int t = 0; t < steps_left; ++t) {
      if (!base.is_terminal()) base = env.step(base, Action::kNoop).state;
      pair.baseline_branch.push_back(base);
    }
  } else {
    pair.baseline_branch.push_back(baseline_state(s, kind, ctx, depth, horizon, env));
  }
  return pair;
}

double rollout_penalty(const GridState& s, Action a, const EpisodeContext& ctx, int depth,
                       const EnvSpec& env, const StateIndexer& indexer,
                       const AuxiliarySet& aux, const PenaltyConfig& config, int horizon) {
  return rollout_penalty_parts(s, a, ctx, depth, env, indexer, aux, config, horizon, nullptr)
      .scaled();
}

// ---------------------------------------------------------------------------
// Planner

namespace {

struct PlanSession {
  const EnvSpec& env;
  const StateIndexer& indexer;
  const AuxiliarySet& aux;
  const PenaltyConfig& config;
  int horizon;
  double gamma;
  const EpisodeContext& ctx;
  std::unordered_map<std::uint64_t, double> memo;
  PairPenaltyCache pair_cache;

  double action_value(const GridState& s, Action a, int depth) {
    const StepResult r = env.step(s, a);
    double reward = r.reward;
    if (config.lambda != 0.0) {
      const auto pen = rollout_penalty_parts(s, a, ctx, depth, env, indexer, aux, config,
                                             horizon, &pair_cache);
      reward -= config.lambda * pen.scaled();
    }
    return reward + gamma * value(r.state, depth + 1);
  }

  double value(const GridState& s, int depth) {
    if (s.is_terminal() || depth >= horizon) return 0.0;
    const std::uint64_t key = full_key(s);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < kNumActions; ++a)
      best = std::max(best, action_value(s, static_cast<Action>(a), depth));
    memo.emplace(key, best);
    return best;
  }
};

}  // namespace

Action plan(const GridState& s, const EnvSpec& env, const StateIndexer& indexer,
            const AuxiliarySet& aux, const PenaltyConfig& config, int horizon, double gamma,
            const EpisodeContext& ctx) {
  if (horizon < 1) throw std::invalid_argument("plan: horizon must be >= 1");
  if (s.is_terminal()) throw ContractViolation("plan: cannot plan from a terminated state");
  PlanSession session{env, indexer, aux, config, horizon, gamma, ctx, {}, {}};
  int best_action = 0;
  double best = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < kNumActions; ++a) {
    const double v = session.action_value(s, static_cast<Action>(a), 0);
    if (v > best) {
      best = v;
      best_action = a;
    }
  }
  return static_cast<Action>(best_action);
}

// ---------------------------------------------------------------------------
// Training loops

namespace {

struct EpisodeTally {
  double episode_return = 0.0;
  std::vector<GridState> trajectory;
};

double finish_episode(const EpisodeTally& tally, const EnvSpec& env) {
  const bool se = detect_side_effect(tally.trajectory, env);
  return performance(tally.episode_return, se);
}

}  // namespace

TrainResult train_standard(const EnvSpec& env, const StateIndexer& indexer,
                           const LearningSchedule& schedule, double gamma,
                           std::uint64_t seed) {
  TrainResult out;
  out.q = TabularQ(indexer.size(), kNumActions);
  Rng explore(derive_seed(seed, "explore"));
  out.episode_performance.reserve(static_cast<std::size_t>(schedule.total_episodes()));
  for (int e = 0; e < schedule.total_episodes(); ++e) {
    const Phase phase = schedule.phase_for(e);
    EpisodeTally tally;
    GridState s = env.initial_state();
    tally.trajectory.push_back(s);
    while (!s.is_terminal()) {
      const int is = indexer.index_of(s);
      const int a = select_action(out.q, is, phase, schedule.epsilon, explore);
      const StepResult r = env.step(s, static_cast<Action>(a));
      q_update(out.q, is, a, r.reward, indexer.index_of(r.state), r.state.is_terminal(),
               schedule.alpha, gamma);
      tally.episode_return += r.reward;
      tally.trajectory.push_back(r.state);
      s = r.state;
    }
    out.episode_performance.push_back(finish_episode(tally, env));
  }
  return out;
}

TrainResult train_model_free(const EnvSpec& env, const StateIndexer& indexer,
                             const LearningSchedule& schedule, const PenaltyConfig& config,
                             int aux_count, double gamma, std::uint64_t seed) {
  config.validate();
  TrainResult out;
  out.q = TabularQ(indexer.size(), kNumActions);
  const std::uint64_t aux_seed = derive_seed(seed, "aux");
  Rng aux_rng(aux_seed);
  out.aux = sample_auxiliary_set(aux_count, indexer.size(), kNumActions, aux_rng);
  out.aux.seed = aux_seed;
  Rng explore(derive_seed(seed, "explore"));
  out.episode_performance.reserve(static_cast<std::size_t>(schedule.total_episodes()));
  for (int e = 0; e < schedule.total_episodes(); ++e) {
    const Phase phase = schedule.phase_for(e);
    EpisodeTally tally;
    GridState s = env.initial_state();
    tally.trajectory.push_back(s);
    while (!s.is_terminal()) {
      const int is = indexer.index_of(s);
      const int a = select_action(out.q, is, phase, schedule.epsilon, explore);
      const StepResult r = env.step(s, static_cast<Action>(a));
      aup_learning_step(is, a, indexer.index_of(r.state), r.state.is_terminal(), r.reward,
                        out.aux, out.q, config, schedule.alpha, gamma, kNoopIndex);
      tally.episode_return += r.reward;
      tally.trajectory.push_back(r.state);
      s = r.state;
    }
    out.episode_performance.push_back(finish_episode(tally, env));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prepared agents and greedy evaluation

PreparedAgent prepare_agent(const AgentSpec& spec, const EnvSpec& env,
                            const StateIndexer& indexer, const LearningSchedule& schedule,
                            double gamma, std::uint64_t seed, const AuxiliarySet* shared_aux) {
  PreparedAgent agent;
  agent.spec = spec;
  switch (spec.kind) {
    case AgentKind::kStandard: {
      TrainResult t = train_standard(env, indexer, schedule, gamma, seed);
      agent.q = std::move(t.q);
      agent.episode_performance = std::move(t.episode_performance);
      break;
    }
    case AgentKind::kModelFreeAup: {
      TrainResult t = train_model_free(env, indexer, schedule, spec.penalty, spec.aux_count,
                                       gamma, seed);
      agent.q = std::move(t.q);
      agent.aux = std::move(t.aux);
      agent.episode_performance = std::move(t.episode_performance);
      break;
    }
    case AgentKind::kPlanner: {
      if (spec.aux_source == AuxSource::kStateIndicators) {
        agent.aux = reachability_auxiliaries(to_mdp(env, indexer, gamma));
      } else if (shared_aux != nullptr) {
        agent.aux = *shared_aux;
      } else {
        TrainResult t = train_model_free(env, indexer, schedule, AgentSpec::model_free_aup().penalty,
                                         spec.aux_count, gamma, seed);
        agent.aux = std::move(t.aux);
      }
      break;
    }
  }
  return agent;
}

EpisodeResult run_episode(const PreparedAgent& agent, const EnvSpec& env,
                          const StateIndexer& indexer, double gamma) {
  EpisodeResult out;
  GridState s = env.initial_state();
  out.trajectory.push_back(s);

  EpisodeContext ctx;
  if (agent.spec.is_planner())
    ctx = EpisodeContext::make(env, env.time_limit() + agent.spec.horizon);

  while (!s.is_terminal()) {
    StepEvent ev;
    if (agent.spec.is_planner()) {
      ctx.root_step = s.step_count;
      ev.action = plan(s, env, indexer, agent.aux, agent.spec.penalty, agent.spec.horizon,
                       gamma, ctx);
      const auto pen = rollout_penalty_parts(s, ev.action, ctx, 0, env, indexer, agent.aux,
                                             agent.spec.penalty, agent.spec.horizon, nullptr);
      ev.penalty = pen.raw;
      ev.scale = pen.scale;
    } else {
      const int is = indexer.index_of(s);
      ev.action = static_cast<Action>(agent.q.argmax(is));
      if (agent.spec.kind == AgentKind::kModelFreeAup) {
        ev.penalty = penalty(is, static_cast<int>(ev.action), agent.aux,
                             agent.spec.penalty.deviation, kNoopIndex);
        double sc = 0.0;
        for (const auto& q : agent.aux.q_tables) sc += q.at(is, kNoopIndex);
        ev.scale = agent.spec.penalty.scale_mode == ScaleMode::kEq2Total ? sc : 1.0;
      }
    }
    const StepResult r = env.step(s, ev.action);
    ev.reward = r.reward;
    out.events.push_back(ev);
    out.episode_return += r.reward;
    out.trajectory.push_back(r.state);
    s = r.state;
  }
  out.outcome = classify_outcome(out.trajectory, env);
  return out;
}

}  // namespace aup
