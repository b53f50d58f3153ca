#include "sglab/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <thread>

#include "sglab/io.hpp"

namespace sglab {

namespace {

constexpr double kNever = std::numeric_limits<double>::infinity();

void check_killing(const Vector& c, std::size_t n) {
  if (static_cast<std::size_t>(c.size()) != n) throw std::invalid_argument("killing vector length must equal n");
  for (Eigen::Index v = 0; v < c.size(); ++v) {
    if (!std::isfinite(c(v)) || c(v) > 0.0) {
      throw std::invalid_argument("killing entry c(" + std::to_string(v) + ") must be finite and <= 0");
    }
  }
}

// Evaluates `sample(i, row)` for i in [0, n) across threads, each writing its
// own row, so the reduction below sees the same data in the same order for
// any thread count.
template <typename Fn>
RowMatrix run_samples(std::size_t n, std::size_t dim, unsigned threads, Fn&& sample) {
  RowMatrix values(n, dim);
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) sample(i, values.row(i));
  };
  if (threads <= 1) {
    work(0, n);
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n + threads - 1) / threads;
    for (unsigned k = 0; k < threads; ++k) {
      const std::size_t b = std::min(n, k * chunk), e = std::min(n, b + chunk);
      pool.emplace_back(work, b, e);
    }
  }
  return values;
}

// Neumaier-compensated running sum.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;
  void add(double x) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

// Mean and standard error per column, shifted by the first sample so that a
// constant column reproduces its constant exactly.
McEstimate summarize(const RowMatrix& values, std::uint64_t seed) {
  const auto n = static_cast<std::size_t>(values.rows());
  const auto d = values.cols();
  const double nn = static_cast<double>(n);
  McEstimate est{Vector::Zero(d), Vector::Zero(d), n, seed};
  for (Eigen::Index j = 0; j < d; ++j) {
    const double shift = values(0, j);
    CompensatedSum sum, sq;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = values(i, j) - shift;
      sum.add(x);
      sq.add(x * x);
    }
    const double mean_shifted = sum.value() / nn;
    est.mean(j) = shift + mean_shifted;
    if (n > 1) {
      const double var = std::max(0.0, (sq.value() - nn * mean_shifted * mean_shifted) / (nn - 1.0));
      est.std_error(j) = std::sqrt(var / nn);
    }
  }
  return est;
}

}  // namespace

std::optional<std::size_t> Trajectory::state_at(double t) const {
  if (t < 0.0 || t > horizon) throw std::invalid_argument("state_at: time outside [0, horizon]");
  if (killed_at && t >= *killed_at) return std::nullopt;
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return states[static_cast<std::size_t>(it - jump_times.begin()) - 1];
}

std::vector<std::pair<std::size_t, double>> Trajectory::completed_holding_times() const {
  std::vector<std::pair<std::size_t, double>> out;
  for (std::size_t k = 0; k + 1 < jump_times.size(); ++k) out.emplace_back(states[k], jump_times[k + 1] - jump_times[k]);
  return out;
}

nlohmann::json to_json(const McEstimate& estimate) {
  return {{"mean", std::vector<double>(estimate.mean.data(), estimate.mean.data() + estimate.mean.size())},
          {"std_error", std::vector<double>(estimate.std_error.data(), estimate.std_error.data() + estimate.std_error.size())},
          {"n_samples", estimate.n_samples},
          {"seed", estimate.seed}};
}

KillingMode parse_killing_mode(std::string_view name) {
  if (name == "hard-kill") return KillingMode::hard_kill;
  if (name == "exp-weight") return KillingMode::exp_weight;
  throw std::invalid_argument("unknown killing mode '" + std::string(name) + "' (hard-kill | exp-weight)");
}

CtmcSampler::CtmcSampler(const StochasticMatrix& attention) {
  const auto n = attention.size();
  exit_rate_.resize(n);
  targets_.resize(n);
  cumulative_.resize(n);
  for (std::size_t v = 0; v < n; ++v) {
    double acc = 0.0;
    for (std::size_t w = 0; w < n; ++w) {
      if (w == v || attention(v, w) == 0.0) continue;
      acc += attention(v, w);
      targets_[v].push_back(w);
      cumulative_[v].push_back(acc);
    }
    exit_rate_[v] = acc;
  }
}

std::size_t CtmcSampler::jump_target(std::size_t v, double u) const {
  const auto& cum = cumulative_[v];
  const auto it = std::upper_bound(cum.begin(), cum.end(), u * exit_rate_[v]);
  const auto idx = std::min<std::size_t>(static_cast<std::size_t>(it - cum.begin()), cum.size() - 1);
  return targets_[v][idx];
}

Trajectory CtmcSampler::sample(std::size_t start, double horizon, StreamRng& rng, const Vector* killing) const {
  if (start >= size()) throw std::invalid_argument("start node out of range");
  if (!std::isfinite(horizon) || horizon < 0.0) throw std::invalid_argument("horizon must be finite and nonnegative");
  Trajectory tr;
  tr.horizon = horizon;
  tr.jump_times.push_back(0.0);
  tr.states.push_back(start);
  double now = 0.0;
  std::size_t v = start;
  while (true) {
    const double hold = exit_rate_[v] > 0.0 ? rng.exponential(exit_rate_[v]) : kNever;
    const double kill_rate = killing ? -(*killing)(v) : 0.0;
    const double kill = kill_rate > 0.0 ? rng.exponential(kill_rate) : kNever;
    if (std::min(hold, kill) >= horizon - now) break;
    if (kill < hold) {
      tr.killed_at = now + kill;
      break;
    }
    now += hold;
    v = jump_target(v, rng.uniform());
    tr.jump_times.push_back(now);
    tr.states.push_back(v);
  }
  return tr;
}

CtmcSampler::Endpoint CtmcSampler::endpoint(std::size_t start, double t, StreamRng& rng, const Vector* killing_clock,
                                            const Vector* weight_rate) const {
  double now = 0.0;
  std::size_t v = start;
  Endpoint out;
  while (true) {
    const double hold = exit_rate_[v] > 0.0 ? rng.exponential(exit_rate_[v]) : kNever;
    const double kill_rate = killing_clock ? -(*killing_clock)(v) : 0.0;
    const double kill = kill_rate > 0.0 ? rng.exponential(kill_rate) : kNever;
    const double remaining = t - now;
    if (std::min(hold, kill) >= remaining) {
      if (weight_rate) out.log_weight += (*weight_rate)(v) * remaining;
      out.state = v;
      return out;
    }
    if (kill < hold) return out;
    if (weight_rate) out.log_weight += (*weight_rate)(v) * hold;
    now += hold;
    v = jump_target(v, rng.uniform());
  }
}

Trajectory sample_ctmc(const StochasticMatrix& attention, std::size_t start, double horizon, StreamRng& rng) {
  return CtmcSampler(attention).sample(start, horizon, rng);
}

Trajectory sample_killed_ctmc(const StochasticMatrix& attention, const Vector& c, std::size_t start, double horizon,
                              StreamRng& rng) {
  check_killing(c, attention.size());
  return CtmcSampler(attention).sample(start, horizon, rng, &c);
}

McEstimate feynman_kac_estimate(const StochasticMatrix& attention, const FeatureField& f, std::size_t start, double t,
                                std::size_t n_samples, const SamplingOptions& options) {
  if (n_samples == 0) throw std::invalid_argument("empty sample: n_samples must be positive");
  if (start >= attention.size()) throw std::invalid_argument("start node out of range");
  if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("time must be finite and nonnegative");
  const CtmcSampler sampler(attention);
  const auto& fv = f.values();
  const auto values = run_samples(n_samples, f.dim(), options.threads, [&](std::size_t i, auto row) {
    StreamRng rng(options.seed, i);
    row = fv.row(*sampler.endpoint(start, t, rng, nullptr, nullptr).state);
  });
  return summarize(values, options.seed);
}

McEstimate killed_feature_estimate(const StochasticMatrix& attention, const Vector& c, const FeatureField& f,
                                   std::size_t start, double t, std::size_t n_samples, KillingMode mode,
                                   const SamplingOptions& options) {
  check_killing(c, attention.size());
  if (n_samples == 0) throw std::invalid_argument("empty sample: n_samples must be positive");
  if (start >= attention.size()) throw std::invalid_argument("start node out of range");
  if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("time must be finite and nonnegative");
  const CtmcSampler sampler(attention);
  const auto& fv = f.values();
  const auto values = run_samples(n_samples, f.dim(), options.threads, [&](std::size_t i, auto row) {
    StreamRng rng(options.seed, i);
    if (mode == KillingMode::hard_kill) {
      const auto end = sampler.endpoint(start, t, rng, &c, nullptr);
      if (end.state) {
        row = fv.row(*end.state);
      } else {
        row.setZero();
      }
    } else {
      const auto end = sampler.endpoint(start, t, rng, nullptr, &c);
      row = std::exp(end.log_weight) * fv.row(*end.state);
    }
  });
  return summarize(values, options.seed);
}

Matrix estimate_transition_function(const StochasticMatrix& attention, double t, std::size_t n_samples_per_start,
                                    const SamplingOptions& options) {
  if (n_samples_per_start == 0) throw std::invalid_argument("empty sample: n_samples must be positive");
  if (!std::isfinite(t) || t < 0.0) throw std::invalid_argument("time must be finite and nonnegative");
  const auto n = attention.size();
  const CtmcSampler sampler(attention);
  Matrix p = Matrix::Zero(n, n);
  for (std::size_t u = 0; u < n; ++u) {
    const auto ends = run_samples(n_samples_per_start, 1, options.threads, [&](std::size_t i, auto row) {
      StreamRng rng(options.seed, u * n_samples_per_start + i);
      row(0) = static_cast<double>(*sampler.endpoint(u, t, rng, nullptr, nullptr).state);
    });
    for (Eigen::Index i = 0; i < ends.rows(); ++i) p(u, static_cast<Eigen::Index>(ends(i, 0))) += 1.0;
  }
  return p / static_cast<double>(n_samples_per_start);
}

void write_trajectory_csv(const Trajectory& trajectory, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  out << "jump_index,time,state,killed_flag\n";
  for (std::size_t k = 0; k < trajectory.states.size(); ++k) {
    out << k << ',' << io::format_real(trajectory.jump_times[k]) << ',' << trajectory.states[k] << ",0\n";
  }
  if (trajectory.killed_at) {
    out << trajectory.states.size() << ',' << io::format_real(*trajectory.killed_at) << ",-1,1\n";
  }
}

}  // namespace sglab
