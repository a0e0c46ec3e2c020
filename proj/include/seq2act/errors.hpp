#pragma once

#include <stdexcept>
#include <string>

namespace seq2act {

// Error codes for every failure mode surfaced by the library. Verdicts from
// the constraint controller are plain data, not exceptions; these codes cover
// hard failures only.
enum class Errc {
  // graph
  UnknownEntity,
  UnknownType,
  DanglingEndpoint,
  SelfLoop,
  DuplicateAttachment,
  InvalidArgument,
  // action interpretation
  OrphanArgument,
  ArityViolation,
  ArityOrder,
  UnbalancedOperation,
  UnknownLabel,
  DuplicateLabel,
  EmptyScope,
  IllFormedResult,
  ParseError,
  // schema
  UndeclaredType,
  DuplicateDeclaration,
  // logical forms
  SyntaxError,
  UnknownSymbol,
  UnboundVariable,
  EmptyBody,
  // numerics
  ShapeMismatch,
  EmptyInput,
  EmptySentence,
  UnknownActionPart,
  NonFiniteLoss,
  // training / checkpoints
  UnresolvableEntity,
  DivergenceDetected,
  VersionMismatch,
  CorruptCheckpoint,
  // decoding / pipelines
  NoCompleteParse,
  LineCountMismatch,
  IoError,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::UnknownEntity: return "UnknownEntity";
    case Errc::UnknownType: return "UnknownType";
    case Errc::DanglingEndpoint: return "DanglingEndpoint";
    case Errc::SelfLoop: return "SelfLoop";
    case Errc::DuplicateAttachment: return "DuplicateAttachment";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::OrphanArgument: return "OrphanArgument";
    case Errc::ArityViolation: return "ArityViolation";
    case Errc::ArityOrder: return "ArityOrder";
    case Errc::UnbalancedOperation: return "UnbalancedOperation";
    case Errc::UnknownLabel: return "UnknownLabel";
    case Errc::DuplicateLabel: return "DuplicateLabel";
    case Errc::EmptyScope: return "EmptyScope";
    case Errc::IllFormedResult: return "IllFormedResult";
    case Errc::ParseError: return "ParseError";
    case Errc::UndeclaredType: return "UndeclaredType";
    case Errc::DuplicateDeclaration: return "DuplicateDeclaration";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownSymbol: return "UnknownSymbol";
    case Errc::UnboundVariable: return "UnboundVariable";
    case Errc::EmptyBody: return "EmptyBody";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptySentence: return "EmptySentence";
    case Errc::UnknownActionPart: return "UnknownActionPart";
    case Errc::NonFiniteLoss: return "NonFiniteLoss";
    case Errc::UnresolvableEntity: return "UnresolvableEntity";
    case Errc::DivergenceDetected: return "DivergenceDetected";
    case Errc::VersionMismatch: return "VersionMismatch";
    case Errc::CorruptCheckpoint: return "CorruptCheckpoint";
    case Errc::NoCompleteParse: return "NoCompleteParse";
    case Errc::LineCountMismatch: return "LineCountMismatch";
    case Errc::IoError: return "IoError";
  }
  return "UnknownError";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace seq2act
