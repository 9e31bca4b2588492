#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace emosim {

enum class ErrorCode {
    InvalidArgument,   // precondition violation
    UnknownStrategy,
    Timeout,
    TransportError,
    BackendRefusal,
    MockExhausted,
    CassetteMiss,
    TemplateError,
    ProfileParseError,
    GroupParseError,
    TopicParseError,
    EmotionParseError,
    LabelOutOfPool,
    FormatError,
    EmptyConversation,
    UndefinedForEmpty,
    StepMismatch,
    UnreadableFile,
    SchemaMismatch,
    MissingSelfEmotion,
    GlobalBudgetExceeded,
    ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Every failure surfaced by the library carries one of the codes above.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, const std::string& message) {
    if (!condition)
        fail(ErrorCode::InvalidArgument, message);
}

} // namespace emosim
