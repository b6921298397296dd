#pragma once
// Uniform access to chat-completion endpoints by named role.
//
// A Gateway owns the role table (from YAML config), a Backend (HTTP or
// scripted mock), per-role admission limits, and an append-only JSONL run
// log. complete() retries transport/5xx failures with exponential backoff.
//
// Request fingerprint = FNV-1a over role + concatenated message text. Run
// logs store the fingerprint with every exchange, so a recorded run can be
// replayed bit-for-bit through MockBackend::from_run_log.

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "qkg/error.hpp"

namespace qkg {

struct RoleConfig {
    std::string role;  // reasoner | validator | annotator | patient-context-llm
    std::string endpoint;
    std::string model;
    std::string api_key_env;  // API keys come from the environment only
    double timeout_seconds = 120.0;
    int max_retries = 3;
    int max_parallel = 4;
    double temperature = 0.0;
    int backoff_initial_ms = 250;
};

struct Message {
    std::string speaker;  // system | user | assistant
    std::string text;
};

struct ChatExchange {
    std::string role;
    std::vector<Message> messages;
    std::string response;
    bool ok = false;
    std::string error;
    int attempts = 0;
    std::uint64_t fingerprint = 0;
    std::int64_t latency_ms = 0;
    std::int64_t prompt_chars = 0;
    std::int64_t response_chars = 0;
};

std::uint64_t request_fingerprint(const std::string& role, const std::vector<Message>& messages);

// ------------------------------------------------------------------ backend

class Backend {
public:
    virtual ~Backend() = default;
    // One attempt. Throws Error on transport failure or retryable status.
    virtual std::string complete_once(const RoleConfig& role,
                                      const std::vector<Message>& messages) = 0;
};

// POSTs the de-facto chat-completions JSON shape and extracts
// choices[0].message.content. 5xx raises a retryable Error; 4xx raises a
// non-retryable one.
class HttpBackend : public Backend {
public:
    std::string complete_once(const RoleConfig& role,
                              const std::vector<Message>& messages) override;
};

// Deterministic scripted backend for tests.
//
// Resolution order per request: exact fingerprint script, then trigger rules
// (first rule whose markers all appear in the concatenated message text),
// then the per-role response queue, then the miss policy.
class MockBackend : public Backend {
public:
    enum class MissPolicy { Error, Default };

    MockBackend() = default;
    explicit MockBackend(std::map<std::uint64_t, std::string> script,
                         MissPolicy policy = MissPolicy::Error,
                         std::string default_response = "");

    static std::shared_ptr<MockBackend> from_run_log(const std::string& path);

    void script_fingerprint(std::uint64_t fingerprint, std::string response);
    void add_trigger(std::vector<std::string> markers, std::string response);
    void push_response(const std::string& role, std::string response);
    void set_miss_policy(MissPolicy policy, std::string default_response = "");

    // Scripts a transport failure for the next n requests hitting the role
    // queue; used to exercise retry paths.
    void push_failure(const std::string& role, std::string message);

    std::string complete_once(const RoleConfig& role,
                              const std::vector<Message>& messages) override;

private:
    struct Trigger {
        std::vector<std::string> markers;
        std::string response;
    };
    struct Queued {
        bool failure = false;
        std::string payload;
    };

    std::mutex mutex_;
    std::map<std::uint64_t, std::string> script_;
    std::vector<Trigger> triggers_;
    std::map<std::string, std::deque<Queued>> queues_;
    MissPolicy policy_ = MissPolicy::Error;
    std::string default_response_;
};

// ------------------------------------------------------------------ gateway

class Gateway {
public:
    Gateway(std::map<std::string, RoleConfig> roles, std::shared_ptr<Backend> backend);

    bool has_role(const std::string& role) const;
    const RoleConfig& config(const std::string& role) const;

    // Retries on retryable failures up to the role's max_retries, enforcing
    // the role's max_parallel admission. Every call appends one exchange to
    // the run log. Throws Error after the final attempt fails.
    std::string complete(const std::string& role, const std::vector<Message>& messages);

    void set_run_log(const std::string& path);
    const std::vector<ChatExchange>& exchanges() const { return exchanges_; }

private:
    class Admission;
    void log_exchange(const ChatExchange& exchange);

    std::map<std::string, RoleConfig> roles_;
    std::shared_ptr<Backend> backend_;
    std::mutex log_mutex_;
    std::string run_log_path_;
    std::vector<ChatExchange> exchanges_;
    std::map<std::string, std::shared_ptr<Admission>> admissions_;
};

// Role blocks from a YAML config file (see conf/config_template.yaml).
std::map<std::string, RoleConfig> load_role_configs(const std::string& yaml_path);

// --------------------------------------------------------------- QAResponse

struct QAResponse {
    char llm_answer_choice = '?';  // A..J
    std::string selected_option_text;
    std::string reasoning;
};

// Locates the first JSON object in raw text (tolerating prose and code
// fences). Throws ParseError when none parses.
std::string extract_first_json_object(const std::string& raw);

// Total over strings: returns a valid QAResponse or throws
// ParseError/ValidationError. The answer letter is normalized to uppercase.
QAResponse parse_qa_response(const std::string& raw);

}  // namespace qkg
