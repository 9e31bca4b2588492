#include "emosim/gateway.hpp"

#include <cstdlib>
#include <regex>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "emosim/error.hpp"
#include "emosim/jsonl.hpp"
#include "emosim/text.hpp"

namespace emosim {

using Clock = std::chrono::steady_clock;
using std::chrono::milliseconds;

std::string_view to_string(ChatRole r) {
    switch (r) {
    case ChatRole::System: return "system";
    case ChatRole::User: return "user";
    case ChatRole::Assistant: return "assistant";
    }
    return "user";
}

void ChatRequest::validate() const {
    require(!messages.empty(), "chat request has no messages");
    require(messages.front().role != ChatRole::Assistant, "first message must be system or user");
    for (const auto& m : messages)
        if (m.role != ChatRole::Assistant)
            require(!m.content.empty(), "empty " + std::string(to_string(m.role)) + " message");
    require(temperature >= 0.0 && temperature <= 2.0, "temperature outside [0, 2]");
    require(max_tokens > 0, "max_tokens must be positive");
}

ChatRequest ChatRequest::make(std::string tag, std::string system, std::string user, double temperature) {
    ChatRequest r;
    r.request_tag = std::move(tag);
    r.temperature = temperature;
    if (!system.empty())
        r.messages.push_back({ChatRole::System, std::move(system)});
    r.messages.push_back({ChatRole::User, std::move(user)});
    return r;
}

std::string ChatRequest::prompt_text() const {
    std::string out;
    for (const auto& m : messages) {
        if (!out.empty())
            out += '\n';
        out += m.content;
    }
    return out;
}

void BackendConfig::validate() const {
    if (kind == BackendKind::Http)
        require(endpoint.has_value() && !endpoint->empty(), "http backend needs an endpoint");
    else
        require(!endpoint.has_value(), "endpoint is only valid for the http backend");
    if (kind == BackendKind::Replay)
        require(cassette_path.has_value(), "replay backend needs a cassette_path");
    require(max_retries >= 0 && max_retries <= 10, "max_retries outside [0, 10]");
    require(timeout.count() > 0, "timeout must be positive");
}

// --- mock --------------------------------------------------------------------

void MockBackend::register_script(const std::string& matcher, std::vector<std::string> responses, bool cycle) {
    require(!responses.empty(), "mock script needs at least one response");
    Script s;
    s.pattern = matcher;
    try {
        s.matcher = std::regex(matcher.empty() ? std::string(".*") : matcher);
    } catch (const std::regex_error& e) {
        fail(ErrorCode::InvalidArgument, "bad mock matcher '" + matcher + "': " + e.what());
    }
    s.responses = std::move(responses);
    s.cycle = cycle;
    std::lock_guard lock(mutex_);
    scripts_.push_back(std::move(s));
}

void MockBackend::load_scripts(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(jsonl::read_file(path));
    } catch (const json::exception& e) {
        fail(ErrorCode::ConfigError, "mock script " + path.string() + ": " + e.what());
    }
    for (const auto& entry : doc)
        register_script(entry.value("match", ""), entry.at("responses").get<std::vector<std::string>>(),
                        entry.value("cycle", false));
}

ChatResponse MockBackend::complete(const ChatRequest& req) {
    req.validate();
    std::lock_guard lock(mutex_);
    seen_.push_back(req);
    const auto prompt = req.prompt_text();
    for (auto& s : scripts_) {
        if (!std::regex_search(req.request_tag, s.matcher) && !std::regex_search(prompt, s.matcher))
            continue;
        if (!s.cycle && s.next >= s.responses.size())
            continue;
        const auto& text = s.responses[s.next % s.responses.size()];
        ++s.next;
        return ChatResponse{text, id(), milliseconds(0), std::nullopt};
    }
    fail(ErrorCode::MockExhausted, "no scripted response left for request '" + req.request_tag + "'");
}

std::vector<ChatRequest> MockBackend::requests() const {
    std::lock_guard lock(mutex_);
    return seen_;
}

std::size_t MockBackend::call_count() const {
    std::lock_guard lock(mutex_);
    return seen_.size();
}

// --- http --------------------------------------------------------------------

HttpBackend::HttpBackend(BackendConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    static const std::regex url(R"(^(https?://[^/]+)(/.*)?$)");
    std::smatch m;
    if (!std::regex_match(*cfg_.endpoint, m, url))
        fail(ErrorCode::ConfigError, "bad endpoint URL '" + *cfg_.endpoint + "'");
    scheme_host_port_ = m[1].str();
    path_ = m[2].matched ? m[2].str() : "/v1/chat/completions";
    if (const char* key = std::getenv("EMOSIM_API_KEY"))
        api_key_ = key;
}

std::string HttpBackend::id() const { return "http:" + cfg_.model_name; }

json HttpBackend::request_body(const ChatRequest& req, const std::string& default_model) {
    json messages = json::array();
    for (const auto& m : req.messages)
        messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
    return json{{"model", req.model.empty() ? default_model : req.model},
                {"messages", messages},
                {"temperature", req.temperature},
                {"max_tokens", req.max_tokens}};
}

namespace {

ChatResponse parse_completion_body(const std::string& body, const std::string& backend_id) {
    ChatResponse out;
    out.backend_id = backend_id;
    try {
        auto j = json::parse(body);
        out.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
        if (j.contains("usage") && j["usage"].is_object())
            out.token_usage = TokenUsage{j["usage"].value("prompt_tokens", 0), j["usage"].value("completion_tokens", 0)};
    } catch (const json::exception& e) {
        fail(ErrorCode::BackendRefusal, std::string("malformed completion body: ") + e.what());
    }
    return out;
}

void set_timeouts(httplib::Client& cli, milliseconds remaining) {
    const auto sec = static_cast<time_t>(remaining.count() / 1000);
    const auto usec = static_cast<time_t>((remaining.count() % 1000) * 1000);
    cli.set_connection_timeout(sec, usec);
    cli.set_read_timeout(sec, usec);
    cli.set_write_timeout(sec, usec);
}

} // namespace

ChatResponse HttpBackend::complete(const ChatRequest& req) {
    req.validate();
    const auto start = Clock::now();
    const auto deadline = start + cfg_.timeout;
    const auto body = request_body(req, cfg_.model_name).dump();

    std::optional<Error> last;
    for (int attempt = 0;; ++attempt) {
        const auto remaining = std::chrono::duration_cast<milliseconds>(deadline - Clock::now());
        if (remaining.count() <= 0)
            fail(ErrorCode::Timeout, "deadline of " + std::to_string(cfg_.timeout.count()) + " ms exceeded" +
                                         (last ? std::string(" (last error: ") + last->what() + ")" : ""));

        httplib::Client cli(scheme_host_port_);
        set_timeouts(cli, remaining);

        httplib::Request hreq;
        hreq.method = "POST";
        hreq.path = path_;
        hreq.body = body;
        hreq.set_header("Content-Type", "application/json");
        if (!api_key_.empty())
            hreq.set_header("Authorization", "Bearer " + api_key_);

        std::string received;
        bool body_started = false;
        hreq.content_receiver = [&](const char* data, std::size_t len, std::uint64_t, std::uint64_t) {
            body_started = true;
            received.append(data, len);
            return true;
        };

        httplib::Response hres;
        httplib::Error err = httplib::Error::Success;
        const bool sent = cli.send(hreq, hres, err);

        bool retryable = false;
        if (!sent) {
            const bool timed_out = err == httplib::Error::ConnectionTimeout || Clock::now() >= deadline;
            last = Error(timed_out ? ErrorCode::Timeout : ErrorCode::TransportError,
                         "request failed: " + httplib::to_string(err));
            retryable = !body_started;
        } else if (hres.status >= 200 && hres.status < 300) {
            auto out = parse_completion_body(received, id());
            out.latency = std::chrono::duration_cast<milliseconds>(Clock::now() - start);
            return out;
        } else {
            last = Error(ErrorCode::BackendRefusal,
                         "status " + std::to_string(hres.status) + ": " + received.substr(0, 512));
            retryable = hres.status >= 500 || hres.status == 429;
        }

        if (!retryable || attempt >= cfg_.max_retries)
            throw *last;

        spdlog::warn("{} (attempt {}), retrying", last->what(), attempt + 1);
        auto backoff = cfg_.backoff_base * (1LL << std::min(attempt, 16));
        auto left = std::chrono::duration_cast<milliseconds>(deadline - Clock::now());
        std::this_thread::sleep_for(std::min<milliseconds>(backoff, std::max(left, milliseconds(0))));
    }
}

// --- cassettes ---------------------------------------------------------------

std::string request_digest(const ChatRequest& req, bool strict) {
    std::uint64_t h = text::fnv1a64(req.request_tag);
    for (const auto& m : req.messages) {
        h = text::fnv1a64(std::string_view("\x1f", 1), h);
        h = text::fnv1a64(strict ? m.content : text::collapse_whitespace(m.content), h);
    }
    return text::hex64(h);
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, std::filesystem::path cassette, bool strict)
    : inner_(std::move(inner)), cassette_(std::move(cassette)), strict_(strict) {
    if (cassette_.has_parent_path())
        std::filesystem::create_directories(cassette_.parent_path());
}

ChatResponse RecordingBackend::complete(const ChatRequest& req) {
    auto resp = inner_->complete(req);
    std::lock_guard lock(mutex_);
    jsonl::append_line(cassette_, json{{"digest", request_digest(req, strict_)},
                                       {"request_tag", req.request_tag},
                                       {"response_text", resp.text}});
    return resp;
}

ReplayBackend::ReplayBackend(const std::filesystem::path& cassette, bool strict) : strict_(strict) {
    if (!std::filesystem::exists(cassette))
        fail(ErrorCode::UnreadableFile, "cassette not found: " + cassette.string());
    for (const auto& row : jsonl::read(cassette)) {
        entries_[row.at("digest").get<std::string>()].push_back(row.at("response_text").get<std::string>());
        ++total_;
    }
}

ChatResponse ReplayBackend::complete(const ChatRequest& req) {
    req.validate();
    const auto digest = request_digest(req, strict_);
    std::lock_guard lock(mutex_);
    if (total_ == 0)
        fail(ErrorCode::MockExhausted, "replay cassette is empty");
    auto it = entries_.find(digest);
    if (it == entries_.end() || it->second.empty())
        fail(ErrorCode::CassetteMiss, "no recording for request '" + req.request_tag + "' (" + digest + ")");
    ChatResponse out{std::move(it->second.front()), id(), milliseconds(0), std::nullopt};
    it->second.pop_front();
    return out;
}

ThrottledBackend::ThrottledBackend(std::shared_ptr<Backend> inner, int max_in_flight)
    : inner_(std::move(inner)), slots_(std::clamp(max_in_flight, 1, 1024)) {}

ChatResponse ThrottledBackend::complete(const ChatRequest& req) {
    slots_.acquire();
    try {
        auto r = inner_->complete(req);
        slots_.release();
        return r;
    } catch (...) {
        slots_.release();
        throw;
    }
}

std::shared_ptr<Backend> make_backend(const BackendConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
    case BackendKind::Http:
        return std::make_shared<HttpBackend>(cfg);
    case BackendKind::Replay:
        return std::make_shared<ReplayBackend>(*cfg.cassette_path, cfg.strict_digest);
    case BackendKind::Mock: {
        auto mock = std::make_shared<MockBackend>();
        if (cfg.mock_script_path)
            mock->load_scripts(*cfg.mock_script_path);
        return mock;
    }
    }
    fail(ErrorCode::ConfigError, "unknown backend kind");
}

std::shared_ptr<Backend> record(const BackendConfig& http_cfg, const std::filesystem::path& cassette) {
    require(http_cfg.kind == BackendKind::Http, "recording needs an http backend config");
    return std::make_shared<RecordingBackend>(std::make_shared<HttpBackend>(http_cfg), cassette,
                                              http_cfg.strict_digest);
}

std::shared_ptr<Backend> replay(const std::filesystem::path& cassette, bool strict_digest) {
    return std::make_shared<ReplayBackend>(cassette, strict_digest);
}

ChatResponse complete(const BackendConfig& cfg, const ChatRequest& req) {
    return make_backend(cfg)->complete(req);
}

} // namespace emosim
