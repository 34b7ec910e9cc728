// Copyright 2026 The memeforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memeforge {

/// Error kinds surfaced by the library. Per-meme failures inside a campaign
/// run are recorded in the manifest instead of being thrown.
enum class Errc {
  // template catalog
  FileMissing,
  SchemaError,
  EmptyCatalog,
  NOutOfRange,
  // model gateway
  Timeout,
  Unavailable,
  AuthError,
  ProtocolError,
  CapabilityError,
  ConfigError,
  // prompts
  UnknownCause,
  InapplicableTechnique,
  InsufficientDemos,
  // captions, safety
  EmptyDescription,
  EmptyInput,
  // compositor
  EmptyText,
  ImageDecodeError,
  FontLoadError,
  ServiceError,
  UnknownTemplate,
  // orchestration
  UnknownBackend,
  EmptyManifest,
  IoError,
  // evaluation
  TooFewEvaluators,
  NoRatings,
  JoinError,
  NotAssigned,
  RangeError,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace memeforge
