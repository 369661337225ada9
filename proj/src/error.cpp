#include "capens/error.hpp"

namespace capens {

std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::MalformedJson: return "MalformedJson";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::BadNegativeCount: return "BadNegativeCount";
    case ErrorCode::NotTwoTokens: return "NotTwoTokens";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::EmptyPromptSet: return "EmptyPromptSet";
    case ErrorCode::NonFiniteScore: return "NonFiniteScore";
    case ErrorCode::CaptionSetMismatch: return "CaptionSetMismatch";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::MalformedCompletion: return "MalformedCompletion";
    case ErrorCode::TooFewCaptions: return "TooFewCaptions";
    case ErrorCode::InsufficientCaptions: return "InsufficientCaptions";
    case ErrorCode::DuplicateImageIds: return "DuplicateImageIds";
    case ErrorCode::EmptyClassList: return "EmptyClassList";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

NotTwoTokensError::NotTwoTokensError(std::string text, std::size_t count)
    : Error(ErrorCode::NotTwoTokens,
            "compound noun '" + text + "' has " + std::to_string(count) +
                " tokens, expected 2"),
      text_(std::move(text)),
      count_(count) {}

DimensionMismatchError::DimensionMismatchError(std::size_t a, std::size_t b)
    : Error(ErrorCode::DimensionMismatch,
            "dimension mismatch: " + std::to_string(a) + " vs " + std::to_string(b)),
      lhs_(a),
      rhs_(b) {}

TooFewCaptionsError::TooFewCaptionsError(std::size_t got, std::size_t want)
    : Error(ErrorCode::TooFewCaptions,
            "too few captions: got " + std::to_string(got) + ", want " + std::to_string(want)),
      got_(got),
      want_(want) {}

InsufficientCaptionsError::InsufficientCaptionsError(std::string compound_noun,
                                                     std::size_t have, std::size_t need)
    : Error(ErrorCode::InsufficientCaptions,
            "insufficient captions for '" + compound_noun + "': have " +
                std::to_string(have) + ", need " + std::to_string(need)),
      cn_(std::move(compound_noun)),
      have_(have),
      need_(need) {}

InstanceError::InstanceError(std::string instance_id, const Error& cause)
    : Error(cause.code(), "instance " + instance_id + ": " + cause.what()),
      instance_id_(std::move(instance_id)) {}

}  // namespace capens
