#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "sglab/attention.hpp"
#include "sglab/graph.hpp"
#include "sglab/rng.hpp"
#include "sglab/types.hpp"

namespace sglab {

/// One path of the jump process. states[k] is occupied on
/// [jump_times[k], jump_times[k+1]); jump_times[0] = 0.
struct Trajectory {
  std::vector<double> jump_times;
  std::vector<std::size_t> states;
  std::optional<double> killed_at;
  double horizon = 0.0;

  /// State at time t ≤ horizon; nullopt once killed.
  std::optional<std::size_t> state_at(double t) const;
  /// Time spent in each visited state before the next jump (the final,
  /// censored sojourn excluded).
  std::vector<std::pair<std::size_t, double>> completed_holding_times() const;
};

struct McEstimate {
  Vector mean;
  Vector std_error;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const McEstimate& estimate);

enum class KillingMode { hard_kill, exp_weight };
KillingMode parse_killing_mode(std::string_view name);

/// Jump process with generator A − I: sojourn at v is exponential with rate
/// 1 − a(v,v), after which the chain moves to w ≠ v with probability
/// a(v,w) / (1 − a(v,v)). Rows with no off-diagonal mass are absorbing.
class CtmcSampler {
 public:
  explicit CtmcSampler(const StochasticMatrix& attention);

  std::size_t size() const noexcept { return exit_rate_.size(); }
  double exit_rate(std::size_t v) const { return exit_rate_[v]; }

  /// `killing` (optional) holds c(v) ≤ 0; state v is killed at rate −c(v).
  Trajectory sample(std::size_t start, double horizon, StreamRng& rng, const Vector* killing = nullptr) const;

  struct Endpoint {
    std::optional<std::size_t> state;  // nullopt when killed
    double log_weight = 0.0;           // ∫₀ᵗ c(X_s) ds along the path, when requested
  };
  /// Samples X_t without storing the path.
  Endpoint endpoint(std::size_t start, double t, StreamRng& rng, const Vector* killing_clock,
                    const Vector* weight_rate) const;

 private:
  std::size_t jump_target(std::size_t v, double u) const;

  std::vector<double> exit_rate_;
  std::vector<std::vector<std::size_t>> targets_;
  std::vector<std::vector<double>> cumulative_;
};

struct SamplingOptions {
  std::uint64_t seed = 0;
  /// 0 selects std::thread::hardware_concurrency(). Results do not depend on it.
  unsigned threads = 0;
};

Trajectory sample_ctmc(const StochasticMatrix& attention, std::size_t start, double horizon, StreamRng& rng);

Trajectory sample_killed_ctmc(const StochasticMatrix& attention, const Vector& c, std::size_t start, double horizon,
                              StreamRng& rng);

/// Mean of f(X_t) over independent paths started at `start`; sample i draws
/// from stream (seed, i).
McEstimate feynman_kac_estimate(const StochasticMatrix& attention, const FeatureField& f, std::size_t start, double t,
                                std::size_t n_samples, const SamplingOptions& options = {});

/// Unbiased estimate of (e^{t(Q+diag c)} f)(start). hard_kill averages
/// f(X_t)·1{t < τ}; exp_weight averages f(X_t)·exp(∫₀ᵗ c(X_s) ds).
McEstimate killed_feature_estimate(const StochasticMatrix& attention, const Vector& c, const FeatureField& f,
                                   std::size_t start, double t, std::size_t n_samples, KillingMode mode,
                                   const SamplingOptions& options = {});

/// Row u is the empirical law of X_t started at u.
Matrix estimate_transition_function(const StochasticMatrix& attention, double t, std::size_t n_samples_per_start,
                                    const SamplingOptions& options = {});

/// Columns jump_index,time,state,killed_flag. A killed path gets a final row
/// at τ with state -1 and killed_flag 1.
void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path);

}  // namespace sglab
