#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crest {

enum class Errc {
  InvalidArgument,
  ParseError,
  IoError,
  MissingTroubleDescription,
  EmptyDataset,
  InsufficientFullCriteriaTRs,
  RemoteUnavailable,
  DimensionMismatch,
  EmptyInput,
  UnknownDocument,
  NonTrainableScorer,
  ProviderMismatch,
  CorpusMismatch,
  EmptyIndex,
  NoActiveCriteria,
  AllZeroWeights,
  InsufficientValidationData,
  LastCriterion,
  ConfigInvalid,
  MissingQrels,
  SplitMismatch,
  EmptySamples,
  Timeout,
};

constexpr std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::ParseError: return "ParseError";
    case Errc::IoError: return "IoError";
    case Errc::MissingTroubleDescription: return "MissingTroubleDescription";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::InsufficientFullCriteriaTRs: return "InsufficientFullCriteriaTRs";
    case Errc::RemoteUnavailable: return "RemoteUnavailable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::UnknownDocument: return "UnknownDocument";
    case Errc::NonTrainableScorer: return "NonTrainableScorer";
    case Errc::ProviderMismatch: return "ProviderMismatch";
    case Errc::CorpusMismatch: return "CorpusMismatch";
    case Errc::EmptyIndex: return "EmptyIndex";
    case Errc::NoActiveCriteria: return "NoActiveCriteria";
    case Errc::AllZeroWeights: return "AllZeroWeights";
    case Errc::InsufficientValidationData: return "InsufficientValidationData";
    case Errc::LastCriterion: return "LastCriterion";
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::MissingQrels: return "MissingQrels";
    case Errc::SplitMismatch: return "SplitMismatch";
    case Errc::EmptySamples: return "EmptySamples";
    case Errc::Timeout: return "Timeout";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable category. Every failure the
/// library reports goes through this type.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

  // Retrying can only help for transport failures.
  bool retryable() const noexcept { return code_ == Errc::RemoteUnavailable || code_ == Errc::Timeout; }

 private:
  Errc code_;
};

}  // namespace crest
