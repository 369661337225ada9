#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace capens {

enum class ErrorCode {
    MalformedJson,
    SchemaViolation,
    DuplicateId,
    BadNegativeCount,
    NotTwoTokens,
    DimensionMismatch,
    ZeroVector,
    NonFinite,
    EmptyPromptSet,
    NonFiniteScore,
    CaptionSetMismatch,
    ProviderUnavailable,
    MissingEmbedding,
    MalformedCompletion,
    TooFewCaptions,
    InsufficientCaptions,
    DuplicateImageIds,
    EmptyClassList,
    InvalidArgument,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Base of every error thrown by the library. The code is stable and is what
/// callers branch on; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

class NotTwoTokensError : public Error {
public:
    NotTwoTokensError(std::string text, std::size_t count);

    const std::string& text() const noexcept { return text_; }
    std::size_t count() const noexcept { return count_; }

private:
    std::string text_;
    std::size_t count_;
};

class DimensionMismatchError : public Error {
public:
    DimensionMismatchError(std::size_t a, std::size_t b);

    std::size_t lhs() const noexcept { return lhs_; }
    std::size_t rhs() const noexcept { return rhs_; }

private:
    std::size_t lhs_;
    std::size_t rhs_;
};

class TooFewCaptionsError : public Error {
public:
    TooFewCaptionsError(std::size_t got, std::size_t want);

    std::size_t got() const noexcept { return got_; }
    std::size_t want() const noexcept { return want_; }

private:
    std::size_t got_;
    std::size_t want_;
};

class InsufficientCaptionsError : public Error {
public:
    InsufficientCaptionsError(std::string compound_noun, std::size_t have, std::size_t need);

    const std::string& compound_noun() const noexcept { return cn_; }
    std::size_t have() const noexcept { return have_; }
    std::size_t need() const noexcept { return need_; }

private:
    std::string cn_;
    std::size_t have_;
    std::size_t need_;
};

/// Wraps a failure raised while evaluating one benchmark instance.
class InstanceError : public Error {
public:
    InstanceError(std::string instance_id, const Error& cause);

    const std::string& instance_id() const noexcept { return instance_id_; }

private:
    std::string instance_id_;
};

}  // namespace capens
