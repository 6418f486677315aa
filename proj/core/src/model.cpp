#include "losscost/model.hpp"

#include <cmath>
#include <string>

#include "losscost/error.hpp"

namespace losscost {

namespace {

std::string where(std::size_t j) { return "classes[" + std::to_string(j) + "]"; }

}  // namespace

void validate_classes(std::span<const TrafficClass> classes) {
  if (classes.empty()) throw ValidationError("classes: at least one traffic class is required");
  if (classes.size() > 16) throw ValidationError("classes: at most 16 traffic classes are supported");
  for (std::size_t j = 0; j < classes.size(); ++j) {
    const auto& c = classes[j];
    if (!std::isfinite(c.lambda) || c.lambda < 0.0)
      throw ValidationError(where(j) + ".lambda must be a finite non-negative rate");
    if (!std::isfinite(c.mu) || c.mu <= 0.0)
      throw ValidationError(where(j) + ".mu must be a finite positive rate");
    if (c.bandwidth < 1) throw ValidationError(where(j) + ".bandwidth must be a positive integer");
    if (c.omega < 0) throw ValidationError(where(j) + ".omega must be a non-negative integer");
  }
}

void validate_policy(const AdmissionPolicy& policy, std::size_t class_count) {
  if (const auto* fs = std::get_if<FullSharing>(&policy)) {
    if (fs->capacity < 0) throw ValidationError("policy.capacity must be a non-negative integer");
    return;
  }
  const auto& pc = std::get<PerClassThreshold>(policy);
  if (pc.thresholds.size() != class_count)
    throw ValidationError("policy.thresholds must list one threshold per class (expected " +
                          std::to_string(class_count) + ", got " +
                          std::to_string(pc.thresholds.size()) + ")");
  for (std::size_t j = 0; j < pc.thresholds.size(); ++j)
    if (pc.thresholds[j] < 0)
      throw ValidationError("policy.thresholds[" + std::to_string(j) + "] must be non-negative");
}

std::string policy_name(const AdmissionPolicy& policy) {
  return std::holds_alternative<FullSharing>(policy) ? "full_sharing" : "per_class";
}

bool equal_bandwidths(std::span<const TrafficClass> classes) {
  for (const auto& c : classes)
    if (c.bandwidth != classes.front().bandwidth) return false;
  return true;
}

bool equal_service_rates(std::span<const TrafficClass> classes) {
  for (const auto& c : classes)
    if (c.mu != classes.front().mu) return false;
  return true;
}

double total_load(std::span<const TrafficClass> classes) {
  double rho = 0.0;
  for (const auto& c : classes) rho += c.load();
  return rho;
}

}  // namespace losscost
