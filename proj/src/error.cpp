// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "memeforge/error.hpp"

namespace memeforge {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::FileMissing: return "FileMissing";
    case Errc::SchemaError: return "SchemaError";
    case Errc::EmptyCatalog: return "EmptyCatalog";
    case Errc::NOutOfRange: return "NOutOfRange";
    case Errc::Timeout: return "Timeout";
    case Errc::Unavailable: return "Unavailable";
    case Errc::AuthError: return "AuthError";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::CapabilityError: return "CapabilityError";
    case Errc::ConfigError: return "ConfigError";
    case Errc::UnknownCause: return "UnknownCause";
    case Errc::InapplicableTechnique: return "InapplicableTechnique";
    case Errc::InsufficientDemos: return "InsufficientDemos";
    case Errc::EmptyDescription: return "EmptyDescription";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyText: return "EmptyText";
    case Errc::ImageDecodeError: return "ImageDecodeError";
    case Errc::FontLoadError: return "FontLoadError";
    case Errc::ServiceError: return "ServiceError";
    case Errc::UnknownTemplate: return "UnknownTemplate";
    case Errc::UnknownBackend: return "UnknownBackend";
    case Errc::EmptyManifest: return "EmptyManifest";
    case Errc::IoError: return "IoError";
    case Errc::TooFewEvaluators: return "TooFewEvaluators";
    case Errc::NoRatings: return "NoRatings";
    case Errc::JoinError: return "JoinError";
    case Errc::NotAssigned: return "NotAssigned";
    case Errc::RangeError: return "RangeError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code) {}

}  // namespace memeforge
