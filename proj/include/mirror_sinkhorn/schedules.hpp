#pragma once

// Step-size rules eta_t. Each named constructor instantiates the step of
// one convergence guarantee; parameters the kind does not use stay empty.

#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "mirror_sinkhorn/transport.hpp"

namespace mirror_sinkhorn {

enum class ScheduleKind {
  anytime_sqrt,         // (1/B_sigma) sqrt(delta / t)
  constant_horizon,     // (1/B_sigma) sqrt(2 delta / T)
  inverse_t,            // 1 / (ell t)
  ot_anytime,           // sqrt(delta / ((1 + sigma^2) t))
  ot_constant_epsilon,  // epsilon sqrt(delta / (1 + sigma^2))
  user_constant,        // value
};

std::string to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(const std::string& name);

struct StepSchedule {
  ScheduleKind kind = ScheduleKind::anytime_sqrt;
  std::optional<double> lipschitz;  // B
  double sigma = 0.0;               // gradient noise bound
  std::optional<double> delta;
  std::optional<double> ell;        // strong-convexity modulus
  std::optional<std::int64_t> horizon;
  std::optional<double> epsilon;
  std::optional<double> value;      // user_constant

  static StepSchedule anytime_sqrt(double lipschitz, EntropicRadius radius, double sigma = 0.0);
  static StepSchedule constant_horizon(double lipschitz, EntropicRadius radius, std::int64_t horizon,
                                       double sigma = 0.0);
  static StepSchedule inverse_t(double ell);
  static StepSchedule ot_anytime(EntropicRadius radius, double sigma = 0.0);
  static StepSchedule ot_constant_epsilon(double epsilon, EntropicRadius radius, double sigma = 0.0);
  static StepSchedule user_constant(double value);

  // Throws ConfigError if a parameter required by `kind` is missing or
  // not strictly positive.
  void validate() const;

  // sqrt(B^2 + sigma^2)
  double noisy_lipschitz() const;
};

// Step size at iteration t >= 1.
double eta(const StepSchedule& schedule, std::int64_t t);

// ceil(5 (1 + sigma^2) delta / epsilon^2)
std::int64_t min_horizon_for_epsilon(double epsilon, double sigma, EntropicRadius radius);

// Builds a schedule from the key-value form {kind, B, sigma, delta, ell,
// T, epsilon, value}; delta = "auto" (or absent) takes `auto_delta`.
StepSchedule schedule_from_fields(const std::map<std::string, std::string>& fields,
                                  std::optional<EntropicRadius> auto_delta);

}  // namespace mirror_sinkhorn
