#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ebw {

enum class ErrorKind {
  UnknownWavelet,
  InsufficientRegularity,
  NonConvergentCascade,
  DomainViolation,
  QuadratureFailure,
  DivergentIntegral,
  EmptyData,
  SingularSystem,
  InvalidNu,
  EmptyGrid,
  ConfigError,
  VanishingMarginal,
  UnsupportedFamily,
  NegativeDensity,
  DegenerateFit,
  IoError,
};

std::string_view to_string(ErrorKind kind);

// All library failures are reported through this type; `kind()` lets callers
// branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownWavelet: return "UnknownWavelet";
    case ErrorKind::InsufficientRegularity: return "InsufficientRegularity";
    case ErrorKind::NonConvergentCascade: return "NonConvergentCascade";
    case ErrorKind::DomainViolation: return "DomainViolation";
    case ErrorKind::QuadratureFailure: return "QuadratureFailure";
    case ErrorKind::DivergentIntegral: return "DivergentIntegral";
    case ErrorKind::EmptyData: return "EmptyData";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::InvalidNu: return "InvalidNu";
    case ErrorKind::EmptyGrid: return "EmptyGrid";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::VanishingMarginal: return "VanishingMarginal";
    case ErrorKind::UnsupportedFamily: return "UnsupportedFamily";
    case ErrorKind::NegativeDensity: return "NegativeDensity";
    case ErrorKind::DegenerateFit: return "DegenerateFit";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace ebw
