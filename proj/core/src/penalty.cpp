#include "aup/penalty.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace aup {

const char* to_string(Baseline b) {
  switch (b) {
    case Baseline::kStartingState: return "starting-state";
    case Baseline::kInaction: return "inaction";
    case Baseline::kStepwiseInaction: return "stepwise-inaction";
  }
  return "?";
}

const char* to_string(Deviation d) {
  return d == Deviation::kAbsolute ? "absolute" : "decrease-only";
}

const char* to_string(ScaleMode m) {
  return m == ScaleMode::kEq2Total ? "eq2-total" : "constant";
}

AuxiliarySet sample_auxiliary_set(int n, int state_count, int action_count, Rng& rng) {
  if (n < 1) throw std::invalid_argument("sample_auxiliary_set: need n >= 1");
  AuxiliarySet aux;
  aux.rewards.reserve(static_cast<std::size_t>(n));
  aux.q_tables.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<double> r(static_cast<std::size_t>(state_count));
    for (auto& v : r) v = rng.next_double();
    aux.rewards.push_back(std::move(r));
    aux.q_tables.emplace_back(state_count, action_count);
  }
  return aux;
}

double penalty(int s, int a, const AuxiliarySet& aux, Deviation deviation, int noop) {
  double total = 0.0;
  for (const auto& q : aux.q_tables) {
    const double diff = q.at(s, noop) - q.at(s, a);
    total += deviation == Deviation::kAbsolute ? std::abs(diff) : std::max(0.0, diff);
  }
  return total;
}

double scale(int s, const AuxiliarySet& aux, ScaleMode mode, int noop) {
  if (mode == ScaleMode::kConstantOne) return 1.0;
  double total = 0.0;
  for (const auto& q : aux.q_tables) total += q.at(s, noop);
  if (total <= 0.0)
    throw ScaleDegeneracy("scale: total no-op attainable utility is " +
                          std::to_string(total) + " at state " + std::to_string(s));
  return total;
}

double aup_reward(int s, int a, double primary_r, const AuxiliarySet& aux,
                  const PenaltyConfig& config, int noop) {
  if (config.lambda == 0.0) return primary_r;
  const double sc = scale(s, aux, config.scale_mode, noop);
  return primary_r - config.lambda * penalty(s, a, aux, config.deviation, noop) / sc;
}

void aup_learning_step(int s, int a, int s_next, bool next_terminal, double primary_r,
                       AuxiliarySet& aux, TabularQ& q_aup, const PenaltyConfig& config,
                       double alpha, double gamma, int noop) {
  for (int i = 0; i < aux.size(); ++i)
    q_update(aux.q_tables[static_cast<std::size_t>(i)], s, a, aux.reward_of(i, s), s_next,
             next_terminal, alpha, gamma);

  double r = primary_r;
  if (config.lambda != 0.0 && config.scale_mode == ScaleMode::kEq2Total) {
    double sc = 0.0;
    for (const auto& q : aux.q_tables) sc += q.at(s, noop);
    if (sc > 0.0)
      r = primary_r - config.lambda * penalty(s, a, aux, config.deviation, noop) / sc;
  } else if (config.lambda != 0.0) {
    r = primary_r - config.lambda * penalty(s, a, aux, config.deviation, noop);
  }
  q_update(q_aup, s, a, r, s_next, next_terminal, alpha, gamma);
}

// ---------------------------------------------------------------------------
// Serialization

void save_auxiliary_set(const AuxiliarySet& aux, std::ostream& out) {
  if (aux.size() == 0) throw std::invalid_argument("save_auxiliary_set: empty set");
  const int S = aux.q_tables[0].n_states();
  const int A = aux.q_tables[0].n_actions();
  out << "aupq 1 " << S << ' ' << A << ' ' << aux.size() << ' ' << aux.seed << '\n';
  out << std::setprecision(17);
  for (const auto& r : aux.rewards) {
    for (std::size_t s = 0; s < r.size(); ++s) out << (s ? " " : "") << r[s];
    out << '\n';
  }
  for (const auto& q : aux.q_tables) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) out << (a ? " " : "") << q.at(s, a);
      out << '\n';
    }
  }
}

void save_auxiliary_set(const AuxiliarySet& aux, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write auxiliary set: " + path);
  save_auxiliary_set(aux, out);
  if (!out) throw std::runtime_error("write failure: " + path);
}

AuxiliarySet load_auxiliary_set(std::istream& in) {
  std::string magic;
  int version = 0, S = 0, A = 0, N = 0;
  std::uint64_t seed = 0;
  in >> magic >> version >> S >> A >> N >> seed;
  if (!in || magic != "aupq" || version != 1)
    throw std::runtime_error("load_auxiliary_set: bad header");
  if (S <= 0 || A <= 0 || N <= 0)
    throw std::runtime_error("load_auxiliary_set: bad dimensions");
  AuxiliarySet aux;
  aux.seed = seed;
  aux.rewards.assign(static_cast<std::size_t>(N), std::vector<double>(static_cast<std::size_t>(S)));
  for (auto& r : aux.rewards)
    for (auto& v : r) in >> v;
  aux.q_tables.assign(static_cast<std::size_t>(N), TabularQ(S, A));
  for (auto& q : aux.q_tables)
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) in >> q.at(s, a);
  if (!in) throw std::runtime_error("load_auxiliary_set: truncated body");
  return aux;
}

AuxiliarySet load_auxiliary_set_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open auxiliary set: " + path);
  return load_auxiliary_set(in);
}

}  // namespace aup
