#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "losscost/error.hpp"
#include "losscost/model.hpp"

namespace losscost::tools {

/// Validation error carrying the source location of the offending value.
class ModelError : public ValidationError {
 public:
  ModelError(std::string source, int line, std::string field, const std::string& message);

  const std::string& source() const { return source_; }
  int line() const { return line_; }  ///< 1-based, 0 when unknown
  const std::string& field() const { return field_; }

 private:
  std::string source_;
  int line_;
  std::string field_;
};

struct Model {
  std::vector<TrafficClass> classes;
  AdmissionPolicy policy;
  nlohmann::json document;  ///< the parsed input, kept for run manifests
};

/// Parses a model document:
///   {"classes": [{"lambda": 1.0, "mu": 1.0, "bandwidth": 1, "omega": 1}, ...],
///    "policy": {"type": "full_sharing", "capacity": 2}
///            | {"type": "per_class", "thresholds": [1, 1]}}
/// Unknown keys are rejected. `source` names the input in error messages.
Model parse_model(const std::string& text, const std::string& source = "<model>");
Model load_model(const std::string& path);

/// Inverse of parse_model.
nlohmann::json model_to_json(const std::vector<TrafficClass>& classes,
                             const AdmissionPolicy& policy);

}  // namespace losscost::tools
