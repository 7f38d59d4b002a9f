#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hmrate {

enum class ErrorCode {
  // constraint_core
  EmptyAlphabet,
  ForeignSymbol,
  OrderTooHigh,
  Degenerate,
  NotMixing,
  // markov_input
  NotStochastic,
  SupportViolation,
  NotPrimitive,
  ZeroMarginal,
  InfeasibleDelta,
  // channel_family
  BadParameter,
  RowSumNotOne,
  NoiselessViolation,
  NotInjective,
  // eps_series
  DivByZeroSeries,
  OrderUnderflow,
  DimensionMismatch,
  // output_model
  AlphabetMismatch,
  UnknownSymbol,
  ZeroHistory,
  ZeroMass,
  BudgetExceeded,
  NotZAllowed,
  WordTooShort,
  AssumptionViolated,
  PreconditionFailed,
  // entropy_decomp
  NonpositiveEps,
  GridTooCoarse,
  // mi_optimizer
  StepUnderflow,
  NoProgress,
  // cli_harness
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyAlphabet: return "EmptyAlphabet";
    case ErrorCode::ForeignSymbol: return "ForeignSymbol";
    case ErrorCode::OrderTooHigh: return "OrderTooHigh";
    case ErrorCode::Degenerate: return "Degenerate";
    case ErrorCode::NotMixing: return "NotMixing";
    case ErrorCode::NotStochastic: return "NotStochastic";
    case ErrorCode::SupportViolation: return "SupportViolation";
    case ErrorCode::NotPrimitive: return "NotPrimitive";
    case ErrorCode::ZeroMarginal: return "ZeroMarginal";
    case ErrorCode::InfeasibleDelta: return "InfeasibleDelta";
    case ErrorCode::BadParameter: return "BadParameter";
    case ErrorCode::RowSumNotOne: return "RowSumNotOne";
    case ErrorCode::NoiselessViolation: return "NoiselessViolation";
    case ErrorCode::NotInjective: return "NotInjective";
    case ErrorCode::DivByZeroSeries: return "DivByZeroSeries";
    case ErrorCode::OrderUnderflow: return "OrderUnderflow";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::AlphabetMismatch: return "AlphabetMismatch";
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::ZeroHistory: return "ZeroHistory";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::NotZAllowed: return "NotZAllowed";
    case ErrorCode::WordTooShort: return "WordTooShort";
    case ErrorCode::AssumptionViolated: return "AssumptionViolated";
    case ErrorCode::PreconditionFailed: return "PreconditionFailed";
    case ErrorCode::NonpositiveEps: return "NonpositiveEps";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::StepUnderflow: return "StepUnderflow";
    case ErrorCode::NoProgress: return "NoProgress";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-code mapping) can dispatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace hmrate
