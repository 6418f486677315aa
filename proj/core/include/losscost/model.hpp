#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace losscost {

/// One Poisson call class sharing the link.
struct TrafficClass {
  double lambda = 0.0;  ///< arrival rate
  double mu = 1.0;      ///< service rate (1 / mean holding time)
  int bandwidth = 1;    ///< capacity units held by one call
  int omega = 0;        ///< cost of blocking one call

  double load() const { return lambda / mu; }
};

/// Any class fits while the total occupied bandwidth allows.
struct FullSharing {
  int capacity = 0;
};

/// Class j is admitted while fewer than thresholds[j]
/// of its calls are in progress.
struct PerClassThreshold {
  std::vector<int> thresholds;
};

using AdmissionPolicy = std::variant<FullSharing, PerClassThreshold>;

/// Throws ValidationError naming the offending class and field.
void validate_classes(std::span<const TrafficClass> classes);
void validate_policy(const AdmissionPolicy& policy, std::size_t class_count);

std::string policy_name(const AdmissionPolicy& policy);

/// True when every class has the same bandwidth.
bool equal_bandwidths(std::span<const TrafficClass> classes);
/// True when every class has the same service rate.
bool equal_service_rates(std::span<const TrafficClass> classes);

/// Offered load of the whole link, sum of lambda_j / mu_j.
double total_load(std::span<const TrafficClass> classes);

}  // namespace losscost
