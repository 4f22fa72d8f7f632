#pragma once

#include <stdexcept>
#include <string>

namespace enasep {

struct IoFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Sector / peak estimation
struct TooFewValid : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Mask construction
struct EmptyGradientSet : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Smooth surface fitting
struct IllConditioned : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Variance algebra
struct VarianceInversionPole : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct AllZeroVariances : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Center-estimation geometry
struct DegenerateGeometry : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NotAnEllipse : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct CenterEstimationFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Metrics
struct ZeroProfile : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct EmptyBand : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace enasep
