#include "paygo/error.hpp"

namespace paygo {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::MalformedSeed: return "MalformedSeed";
    case Errc::DanglingHandle: return "DanglingHandle";
    case Errc::NoSigningKey: return "NoSigningKey";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::MalformedCiphertext: return "MalformedCiphertext";
    case Errc::MalformedMessage: return "MalformedMessage";
    case Errc::PermissionDenied: return "PermissionDenied";
    case Errc::UnknownSubmitter: return "UnknownSubmitter";
    case Errc::DanglingReference: return "DanglingReference";
    case Errc::NotFound: return "NotFound";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::InvalidRecord: return "InvalidRecord";
    case Errc::AlreadyExists: return "AlreadyExists";
    case Errc::NoMasterSecret: return "NoMasterSecret";
    case Errc::UnknownDid: return "UnknownDid";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::UnknownCredDef: return "UnknownCredDef";
    case Errc::NotIssuer: return "NotIssuer";
    case Errc::NoMatchingCredential: return "NoMatchingCredential";
    case Errc::MalformedRequest: return "MalformedRequest";
    case Errc::BadIssuerSignature: return "BadIssuerSignature";
    case Errc::BadHolderSignature: return "BadHolderSignature";
    case Errc::UntrustedIssuer: return "UntrustedIssuer";
    case Errc::NonceMismatch: return "NonceMismatch";
    case Errc::AttributeSetMismatch: return "AttributeSetMismatch";
    case Errc::LocationMismatch: return "LocationMismatch";
    case Errc::DecryptFailure: return "DecryptFailure";
    case Errc::PeerUnresponsive: return "PeerUnresponsive";
    case Errc::NegativeAllocation: return "NegativeAllocation";
    case Errc::NonPositiveAmount: return "NonPositiveAmount";
    case Errc::InsufficientBalance: return "InsufficientBalance";
    case Errc::BadDebitSignature: return "BadDebitSignature";
    case Errc::InvalidTransaction: return "InvalidTransaction";
    case Errc::NoTips: return "NoTips";
    case Errc::UnknownVehicleClass: return "UnknownVehicleClass";
    case Errc::InvalidConfig: return "InvalidConfig";
    case Errc::MissingPhase: return "MissingPhase";
    case Errc::EmptySamples: return "EmptySamples";
    case Errc::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace paygo
