#include "mirror_sinkhorn/schedules.hpp"

#include <cmath>
#include <stdexcept>

namespace mirror_sinkhorn {

namespace {

double require_positive(const std::optional<double>& v, const char* name, ScheduleKind kind) {
  if (!v) throw ConfigError(std::string("schedule ") + to_string(kind) + " requires " + name);
  if (!(*v > 0.0) || !std::isfinite(*v)) {
    throw ConfigError(std::string("schedule parameter ") + name + " must be finite and > 0");
  }
  return *v;
}

double parse_field(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("schedule field " + key + " is not a number: '" + text + "'");
  }
}

}  // namespace

std::string to_string(ScheduleKind kind) {
  switch (kind) {
    case ScheduleKind::anytime_sqrt: return "anytime_sqrt";
    case ScheduleKind::constant_horizon: return "constant_horizon";
    case ScheduleKind::inverse_t: return "inverse_t";
    case ScheduleKind::ot_anytime: return "ot_anytime";
    case ScheduleKind::ot_constant_epsilon: return "ot_constant_epsilon";
    case ScheduleKind::user_constant: return "user_constant";
  }
  return "unknown";
}

ScheduleKind parse_schedule_kind(const std::string& name) {
  for (auto kind : {ScheduleKind::anytime_sqrt, ScheduleKind::constant_horizon, ScheduleKind::inverse_t,
                    ScheduleKind::ot_anytime, ScheduleKind::ot_constant_epsilon, ScheduleKind::user_constant}) {
    if (to_string(kind) == name) return kind;
  }
  throw ConfigError("unknown schedule kind '" + name + "'");
}

StepSchedule StepSchedule::anytime_sqrt(double lipschitz, EntropicRadius radius, double sigma) {
  StepSchedule s;
  s.kind = ScheduleKind::anytime_sqrt;
  s.lipschitz = lipschitz;
  s.delta = radius.delta;
  s.sigma = sigma;
  return s;
}

StepSchedule StepSchedule::constant_horizon(double lipschitz, EntropicRadius radius, std::int64_t horizon,
                                            double sigma) {
  StepSchedule s;
  s.kind = ScheduleKind::constant_horizon;
  s.lipschitz = lipschitz;
  s.delta = radius.delta;
  s.horizon = horizon;
  s.sigma = sigma;
  return s;
}

StepSchedule StepSchedule::inverse_t(double ell) {
  StepSchedule s;
  s.kind = ScheduleKind::inverse_t;
  s.ell = ell;
  return s;
}

StepSchedule StepSchedule::ot_anytime(EntropicRadius radius, double sigma) {
  StepSchedule s;
  s.kind = ScheduleKind::ot_anytime;
  s.delta = radius.delta;
  s.sigma = sigma;
  return s;
}

StepSchedule StepSchedule::ot_constant_epsilon(double epsilon, EntropicRadius radius, double sigma) {
  StepSchedule s;
  s.kind = ScheduleKind::ot_constant_epsilon;
  s.epsilon = epsilon;
  s.delta = radius.delta;
  s.sigma = sigma;
  return s;
}

StepSchedule StepSchedule::user_constant(double value) {
  StepSchedule s;
  s.kind = ScheduleKind::user_constant;
  s.value = value;
  return s;
}

void StepSchedule::validate() const {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ConfigError("schedule sigma must be finite and >= 0");
  switch (kind) {
    case ScheduleKind::anytime_sqrt:
      require_positive(lipschitz, "B", kind);
      require_positive(delta, "delta", kind);
      break;
    case ScheduleKind::constant_horizon:
      require_positive(lipschitz, "B", kind);
      require_positive(delta, "delta", kind);
      if (!horizon || *horizon < 1) throw ConfigError("schedule constant_horizon requires T >= 1");
      break;
    case ScheduleKind::inverse_t:
      require_positive(ell, "ell", kind);
      break;
    case ScheduleKind::ot_anytime:
      require_positive(delta, "delta", kind);
      break;
    case ScheduleKind::ot_constant_epsilon:
      require_positive(delta, "delta", kind);
      require_positive(epsilon, "epsilon", kind);
      break;
    case ScheduleKind::user_constant:
      require_positive(value, "value", kind);
      break;
  }
}

double StepSchedule::noisy_lipschitz() const {
  const double b = lipschitz.value_or(0.0);
  return std::sqrt(b * b + sigma * sigma);
}

double eta(const StepSchedule& s, std::int64_t t) {
  if (t < 1) throw ConfigError("step index must be >= 1");
  s.validate();
  const double td = static_cast<double>(t);
  switch (s.kind) {
    case ScheduleKind::anytime_sqrt: return std::sqrt(*s.delta / td) / s.noisy_lipschitz();
    case ScheduleKind::constant_horizon:
      return std::sqrt(2.0 * *s.delta / static_cast<double>(*s.horizon)) / s.noisy_lipschitz();
    case ScheduleKind::inverse_t: return 1.0 / (*s.ell * td);
    case ScheduleKind::ot_anytime: return std::sqrt(*s.delta / ((1.0 + s.sigma * s.sigma) * td));
    case ScheduleKind::ot_constant_epsilon: return *s.epsilon * std::sqrt(*s.delta / (1.0 + s.sigma * s.sigma));
    case ScheduleKind::user_constant: return *s.value;
  }
  throw ConfigError("unknown schedule kind");
}

std::int64_t min_horizon_for_epsilon(double epsilon, double sigma, EntropicRadius radius) {
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (!(radius.delta > 0.0)) throw ConfigError("delta must be > 0");
  const double t = 5.0 * (1.0 + sigma * sigma) * radius.delta / (epsilon * epsilon);
  return static_cast<std::int64_t>(std::ceil(t));
}

StepSchedule schedule_from_fields(const std::map<std::string, std::string>& fields,
                                  std::optional<EntropicRadius> auto_delta) {
  StepSchedule s;
  const auto get = [&fields](const std::string& key) -> const std::string* {
    const auto it = fields.find(key);
    return it == fields.end() || it->second.empty() ? nullptr : &it->second;
  };
  if (const auto* k = get("kind")) s.kind = parse_schedule_kind(*k);
  if (const auto* v = get("B")) s.lipschitz = parse_field("B", *v);
  if (const auto* v = get("sigma")) s.sigma = parse_field("sigma", *v);
  if (const auto* v = get("ell")) s.ell = parse_field("ell", *v);
  if (const auto* v = get("epsilon")) s.epsilon = parse_field("epsilon", *v);
  if (const auto* v = get("value")) s.value = parse_field("value", *v);
  if (const auto* v = get("T")) s.horizon = static_cast<std::int64_t>(parse_field("T", *v));
  const auto* d = get("delta");
  if (d == nullptr || *d == "auto") {
    if (auto_delta) s.delta = auto_delta->delta;
  } else {
    s.delta = parse_field("delta", *d);
  }
  s.validate();
  return s;
}

}  // namespace mirror_sinkhorn
