#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <semaphore>
#include <string>
#include <vector>

#include "emosim/domain.hpp"

namespace emosim {

enum class ChatRole { System, User, Assistant };

std::string_view to_string(ChatRole r);

struct ChatMessage {
    ChatRole role = ChatRole::User;
    std::string content;
};

struct ChatRequest {
    std::string model;
    std::vector<ChatMessage> messages;
    double temperature = 0.7;
    int max_tokens = 1024;
    std::string request_tag;  // pipeline stage, used by scripts and cassettes

    void validate() const;

    /// A system + user request. Empty system text is omitted.
    static ChatRequest make(std::string tag, std::string system, std::string user,
                            double temperature = 0.7);

    /// All message contents joined by newlines.
    std::string prompt_text() const;
};

struct TokenUsage {
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

struct ChatResponse {
    std::string text;
    std::string backend_id;
    std::chrono::milliseconds latency{0};
    std::optional<TokenUsage> token_usage;
};

enum class BackendKind { Http, Mock, Replay };

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::optional<std::string> endpoint;
    std::string model_name = "gpt-4";
    std::chrono::milliseconds timeout{60'000};
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{250};
    std::optional<std::filesystem::path> cassette_path;
    std::optional<std::filesystem::path> mock_script_path;
    bool strict_digest = false;

    /// endpoint required iff http; cassette_path required iff replay.
    void validate() const;
};

/// A chat-completion backend. Implementations are safe for concurrent
/// complete() calls.
class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
    virtual std::string id() const = 0;
};

/// Scripted backend. Scripts are tried in registration order; the first
/// script whose pattern matches (regex search over the request tag, then
/// over the prompt text) and still has responses answers the request.
class MockBackend : public Backend {
public:
    void register_script(const std::string& matcher, std::vector<std::string> responses,
                         bool cycle = false);

    /// Load scripts from a JSON array of {"match", "responses", "cycle"}.
    void load_scripts(const std::filesystem::path& path);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return "mock"; }

    std::vector<ChatRequest> requests() const;
    std::size_t call_count() const;

private:
    struct Script {
        std::string pattern;
        std::regex matcher;
        std::vector<std::string> responses;
        std::size_t next = 0;
        bool cycle = false;
    };

    mutable std::mutex mutex_;
    std::vector<Script> scripts_;
    std::vector<ChatRequest> seen_;
};

/// Chat-completions client over HTTP(S). Bearer token from EMOSIM_API_KEY.
class HttpBackend : public Backend {
public:
    explicit HttpBackend(BackendConfig cfg);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override;

    /// Request body in the chat-completions wire format.
    static json request_body(const ChatRequest& req, const std::string& default_model);

private:
    BackendConfig cfg_;
    std::string scheme_host_port_;
    std::string path_;
    std::string api_key_;
};

/// Stable hex digest of (request_tag, message texts). Whitespace is
/// collapsed unless strict.
std::string request_digest(const ChatRequest& req, bool strict = false);

/// Forwards to an inner backend and appends {digest, request_tag,
/// response_text} to a JSONL cassette.
class RecordingBackend : public Backend {
public:
    RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path cassette,
                     bool strict_digest = false);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return "record:" + inner_->id(); }

private:
    std::shared_ptr<Backend> inner_;
    std::filesystem::path cassette_;
    bool strict_;
    std::mutex mutex_;
};

/// Serves recorded responses keyed by request digest. Repeated identical
/// requests are served in recording order.
class ReplayBackend : public Backend {
public:
    explicit ReplayBackend(const std::filesystem::path& cassette, bool strict_digest = false);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return "replay"; }

    std::size_t size() const { return total_; }

private:
    std::map<std::string, std::deque<std::string>> entries_;
    std::size_t total_ = 0;
    bool strict_;
    std::mutex mutex_;
};

/// Bounds the number of in-flight calls to an inner backend.
class ThrottledBackend : public Backend {
public:
    ThrottledBackend(std::shared_ptr<Backend> inner, int max_in_flight);

    ChatResponse complete(const ChatRequest& req) override;
    std::string id() const override { return inner_->id(); }

private:
    std::shared_ptr<Backend> inner_;
    std::counting_semaphore<1024> slots_;
};

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg);
std::shared_ptr<Backend> record(const BackendConfig& http_cfg, const std::filesystem::path& cassette);
std::shared_ptr<Backend> replay(const std::filesystem::path& cassette, bool strict_digest = false);

/// One-shot completion through a freshly built backend.
ChatResponse complete(const BackendConfig& cfg, const ChatRequest& req);

} // namespace emosim
