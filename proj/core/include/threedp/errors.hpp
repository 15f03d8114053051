#pragma once

#include <stdexcept>
#include <string>

namespace threedp {

struct SingularOrientation : std::runtime_error {
  explicit SingularOrientation(const std::string& msg) : std::runtime_error(msg) {}
};

struct InvalidFace : std::invalid_argument {
  explicit InvalidFace(const std::string& msg) : std::invalid_argument(msg) {}
};

struct InvalidGraft : std::invalid_argument {
  explicit InvalidGraft(const std::string& msg) : std::invalid_argument(msg) {}
};

struct EmptyShape : std::invalid_argument {
  explicit EmptyShape(const std::string& msg) : std::invalid_argument(msg) {}
};

struct DimMismatch : std::invalid_argument {
  explicit DimMismatch(const std::string& msg) : std::invalid_argument(msg) {}
};

struct DegenerateCorrespondences : std::runtime_error {
  explicit DegenerateCorrespondences(const std::string& msg) : std::runtime_error(msg) {}
};

struct NoHypotheses : std::runtime_error {
  explicit NoHypotheses(const std::string& msg) : std::runtime_error(msg) {}
};

struct InconsistentObservation : std::runtime_error {
  explicit InconsistentObservation(const std::string& msg) : std::runtime_error(msg) {}
};

struct WeightMismatch : std::invalid_argument {
  explicit WeightMismatch(const std::string& msg) : std::invalid_argument(msg) {}
};

struct PlacementFailure : std::runtime_error {
  explicit PlacementFailure(const std::string& msg) : std::runtime_error(msg) {}
};

struct EmptyModel : std::invalid_argument {
  explicit EmptyModel(const std::string& msg) : std::invalid_argument(msg) {}
};

struct OutOfSupport : std::invalid_argument {
  explicit OutOfSupport(const std::string& msg) : std::invalid_argument(msg) {}
};

}  // namespace threedp
