#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace paygo {

/// Every failure the library reports carries one of these codes so callers
/// (and the protocol layer) can branch on the kind without parsing text.
enum class Errc {
  // crypto
  MalformedSeed,
  DanglingHandle,
  NoSigningKey,
  AuthFailure,
  MalformedCiphertext,
  // encoding
  MalformedMessage,
  // identity ledger
  PermissionDenied,
  UnknownSubmitter,
  DanglingReference,
  NotFound,
  OutOfRange,
  InvalidRecord,
  // wallet / credentials
  AlreadyExists,
  NoMasterSecret,
  UnknownDid,
  SchemaMismatch,
  UnknownCredDef,
  NotIssuer,
  NoMatchingCredential,
  MalformedRequest,
  BadIssuerSignature,
  BadHolderSignature,
  UntrustedIssuer,
  NonceMismatch,
  AttributeSetMismatch,
  LocationMismatch,
  // pairwise
  DecryptFailure,
  PeerUnresponsive,
  // tangle
  NegativeAllocation,
  NonPositiveAmount,
  InsufficientBalance,
  BadDebitSignature,
  InvalidTransaction,
  NoTips,
  // tolling / harness
  UnknownVehicleClass,
  InvalidConfig,
  MissingPhase,
  EmptySamples,
  Io,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}
  explicit Error(Errc code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace paygo
