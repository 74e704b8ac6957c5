#include "qlo/settle.hpp"

#include <cmath>
#include <stdexcept>

namespace qlo {

namespace {

// Window comparisons tolerate sample-time rounding.
constexpr double kTimeSlack = 1e-9;

double deviation(double e, const Level& level) { return std::abs(e - level.energy()); }

std::optional<Level> level_within(double e, double tolerance) {
  if (!std::isfinite(e) || e < 0.0 || e > static_cast<double>(Level::kMaxIndex)) {
    return std::nullopt;
  }
  const Level level = nearest_level(e);
  if (deviation(e, level) > tolerance) return std::nullopt;
  return level;
}

void check_series(const Trajectory& trajectory, std::span<const double> energy) {
  if (energy.size() != trajectory.size()) {
    throw std::invalid_argument("energy series length must match trajectory");
  }
}

}  // namespace

void SettleCriterion::validate() const {
  if (!(std::isfinite(tolerance) && tolerance > 0.0)) {
    throw std::invalid_argument("settle tolerance must be finite and > 0");
  }
  if (!(std::isfinite(window) && window > 0.0)) {
    throw std::invalid_argument("settle window must be finite and > 0");
  }
  if (!(std::isfinite(smoothing) && smoothing >= 0.0)) {
    throw std::invalid_argument("smoothing must be finite and >= 0");
  }
  if (!(max_drift >= 0.0)) throw std::invalid_argument("max_drift must be >= 0");
}

SettleCriterion SettleCriterion::undriven() { return {}; }

SettleCriterion SettleCriterion::driven() {
  return {.tolerance = 0.05, .window = kPi, .smoothing = 2.0 * kPi};
}

SettleCriterion SettleCriterion::for_params(const ModelParams& params) {
  return params.driven() ? driven() : undriven();
}

std::vector<double> smoothed_energy(const Trajectory& trajectory, double smoothing) {
  const auto samples = trajectory.samples();
  const std::size_t n = samples.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  if (smoothing <= 0.0 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) out[i] = samples[i].e;
    return out;
  }
  const double spacing = samples[1].t - samples[0].t;
  const auto half = static_cast<std::size_t>(std::llround(0.5 * smoothing / spacing));
  std::vector<long double> prefix(n + 1, 0.0L);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + samples[i].e;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(n - 1, i + half);
    out[i] = static_cast<double>((prefix[hi + 1] - prefix[lo]) /
                                 static_cast<long double>(hi - lo + 1));
  }
  return out;
}

std::optional<SettleEvent> detect_settle(const Trajectory& trajectory,
                                         std::span<const double> energy,
                                         const SettleCriterion& criterion, std::size_t from) {
  criterion.validate();
  check_series(trajectory, energy);
  const auto samples = trajectory.samples();
  const std::size_t n = samples.size();

  std::optional<Level> run_level;
  std::size_t run_start = 0;
  std::size_t anchor = 0;
  for (std::size_t j = from; j < n; ++j) {
    const auto level = level_within(energy[j], criterion.tolerance);
    if (!level) {
      run_level.reset();
      continue;
    }
    if (!run_level || *run_level != *level) {
      run_level = level;
      run_start = j;
      anchor = j;
    }
    const double cutoff = samples[j].t - criterion.window + kTimeSlack;
    while (anchor + 1 <= j && samples[anchor + 1].t <= cutoff) ++anchor;
    if (samples[anchor].t > cutoff || anchor < run_start) continue;
    const double drift = deviation(energy[j], *level) - deviation(energy[anchor], *level);
    if (drift > criterion.max_drift) continue;
    return SettleEvent{*level, samples[anchor].t, samples[j].t, anchor, j};
  }
  return std::nullopt;
}

std::optional<SettleEvent> detect_settle(const Trajectory& trajectory,
                                         const SettleCriterion& criterion) {
  if (trajectory.empty()) throw std::invalid_argument("detect_settle: empty trajectory");
  const auto energy = smoothed_energy(trajectory, criterion.smoothing);
  return detect_settle(trajectory, energy, criterion, 0);
}

std::optional<SettleEvent> detect_settle(const Trajectory& trajectory, double eps_settle,
                                         double window) {
  return detect_settle(trajectory, SettleCriterion{.tolerance = eps_settle, .window = window});
}

std::optional<Level> settled_at(const Trajectory& trajectory, std::span<const double> energy,
                                std::size_t index, const SettleCriterion& criterion) {
  criterion.validate();
  check_series(trajectory, energy);
  if (index >= trajectory.size()) throw std::out_of_range("settled_at: index out of range");
  const auto samples = trajectory.samples();
  const auto level = level_within(energy[index], criterion.tolerance);
  if (!level) return std::nullopt;
  const double cutoff = samples[index].t - criterion.window + kTimeSlack;
  std::size_t i = index;
  while (true) {
    if (deviation(energy[i], *level) > criterion.tolerance) return std::nullopt;
    if (samples[i].t <= cutoff) break;
    if (i == 0) return std::nullopt;  // not enough history
    --i;
  }
  const double drift = deviation(energy[index], *level) - deviation(energy[i], *level);
  if (drift > criterion.max_drift) return std::nullopt;
  return level;
}

std::vector<Plateau> extract_plateaus(const Trajectory& trajectory,
                                      const SettleCriterion& criterion, double exit_threshold) {
  if (trajectory.empty()) throw std::invalid_argument("extract_plateaus: empty trajectory");
  if (!(exit_threshold >= criterion.tolerance)) {
    throw std::invalid_argument("exit_threshold must be >= settle tolerance");
  }
  const auto samples = trajectory.samples();
  const std::size_t n = samples.size();
  const auto energy = smoothed_energy(trajectory, criterion.smoothing);

  std::vector<Plateau> plateaus;
  std::size_t pos = 0;
  while (pos < n) {
    const auto settle = detect_settle(trajectory, energy, criterion, pos);
    if (!settle) break;
    const Level level = settle->level;

    const std::size_t floor_index = plateaus.empty() ? 0 : plateaus.back().leave_index + 1;
    std::size_t arrive = settle->start_index;
    while (arrive > floor_index && deviation(energy[arrive - 1], level) <= exit_threshold) {
      --arrive;
    }
    std::size_t leave = settle->end_index;
    while (leave < n && deviation(energy[leave], level) <= exit_threshold) ++leave;
    const bool open = leave == n;
    const std::size_t leave_index = open ? n - 1 : leave;

    if (!plateaus.empty() && plateaus.back().level == level) {
      // Excursion that came back to the same level.
      Plateau& p = plateaus.back();
      p.t_leave = samples[leave_index].t;
      p.leave_index = leave_index;
      p.open = open;
    } else {
      plateaus.push_back(
          {level, samples[arrive].t, samples[leave_index].t, open, arrive, leave_index});
    }
    if (open) break;
    pos = leave;
  }
  return plateaus;
}

std::vector<TransitionEvent> transitions_between(std::span<const Plateau> plateaus) {
  std::vector<TransitionEvent> out;
  for (std::size_t i = 1; i < plateaus.size(); ++i) {
    const Plateau& a = plateaus[i - 1];
    const Plateau& b = plateaus[i];
    out.push_back({a.level, b.level, a.t_leave, b.t_arrive});
  }
  return out;
}

std::vector<TransitionEvent> extract_transitions(const Trajectory& trajectory,
                                                 const SettleCriterion& criterion,
                                                 double exit_threshold) {
  const auto plateaus = extract_plateaus(trajectory, criterion, exit_threshold);
  return transitions_between(plateaus);
}

std::vector<TransitionEvent> extract_transitions(const Trajectory& trajectory,
                                                 double exit_threshold) {
  return extract_transitions(trajectory, SettleCriterion{}, exit_threshold);
}


RelaxationResult integrate_until_settled(const OscillatorState& initial,
                                         const IntegratorConfig& integrator,
                                         const ModelParams& params,
                                         const SettleCriterion& criterion, double budget,
                                         double chunk) {
  criterion.validate();
  if (!(budget >= 0.0) || !(chunk > 0.0)) {
    throw std::invalid_argument("relaxation budget must be >= 0 and chunk > 0");
  }
  const double t_end = initial.t() + budget;
  RelaxationResult out;
  out.trajectory.append(initial);
  while (true) {
    const Sample& last = out.trajectory.back();
    const bool final_chunk = last.t + chunk >= t_end;
    IntegratorConfig cfg = integrator;
    cfg.t_max = final_chunk ? t_end : last.t + chunk;
    try {
      out.trajectory.extend(integrate(last.state(), cfg, params));
    } catch (NumericalFailure& failure) {
      Trajectory partial = out.trajectory;
      partial.extend(failure.partial());
      throw NumericalFailure(failure.time(), std::move(partial));
    }
    const auto energy = smoothed_energy(out.trajectory, criterion.smoothing);
    auto settle = detect_settle(out.trajectory, energy, criterion, 0);
    const double trusted = out.trajectory.back().t - 0.5 * criterion.smoothing;
    if (settle && (final_chunk || settle->t_settle <= trusted)) {
      out.settle = settle;
      return out;
    }
    if (final_chunk) return out;
  }
}

}  // namespace qlo
