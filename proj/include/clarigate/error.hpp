// Copyright 2026 The Clarigate Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clarigate {

enum class ErrorCode {
  // hypothesis lists
  ConfidenceOutOfRange,
  EmptyList,
  RankNotUnique,
  RankOutOfOrder,
  NonMonotoneHypConf,
  // assembly
  DuplicateOccurrenceType,
  AltIndexOutOfRange,
  // detectors / featurizer
  EmptyTranscript,
  EmptyTokenSequence,
  // neural / training
  ShapeMismatch,
  NonFiniteGradient,
  EmptyDataset,
  UntrainableVariant,
  // data generation and io
  InjectionFailed,
  MalformedRecord,
  Io,
  // eval
  LengthMismatch,
  BaselineZero,
  // configuration
  Config,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfidenceOutOfRange: return "ConfidenceOutOfRange";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::RankNotUnique: return "RankNotUnique";
    case ErrorCode::RankOutOfOrder: return "RankOutOfOrder";
    case ErrorCode::NonMonotoneHypConf: return "NonMonotoneHypConf";
    case ErrorCode::DuplicateOccurrenceType: return "DuplicateOccurrenceType";
    case ErrorCode::AltIndexOutOfRange: return "AltIndexOutOfRange";
    case ErrorCode::EmptyTranscript: return "EmptyTranscript";
    case ErrorCode::EmptyTokenSequence: return "EmptyTokenSequence";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::UntrainableVariant: return "UntrainableVariant";
    case ErrorCode::InjectionFailed: return "InjectionFailed";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::Io: return "Io";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::BaselineZero: return "BaselineZero";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        message_(message) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace clarigate
