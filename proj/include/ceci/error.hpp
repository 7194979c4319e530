#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ceci {

enum class ErrorCode {
  // scene graph
  DuplicateId,
  DanglingEdge,
  LayerViolation,
  MultipleParents,
  InvalidNode,
  WrongKind,
  EmptyGraph,
  UnknownRoom,
  UnknownClass,
  NegativeCount,
  // dataset
  DegenerateRoom,
  BadRatios,
  // ontology
  CatalogMismatch,
  NonNumericCell,
  OutOfRange,
  EndpointError,
  ParseError,
  // numerics
  ShapeMismatch,
  NonFinite,
  NotNormalized,
  OutOfBounds,
  // model / pipeline
  ConfigMismatch,
  EmptyDataset,
  MissingArtifact,
  UnreadableInput,
  InvalidArgument,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ceci
