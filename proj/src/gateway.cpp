#include "qkg/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "qkg/text.hpp"

#define CPPHTTPLIB_THREAD_POOL_COUNT 4
#include <httplib.h>

namespace qkg {

using nlohmann::json;

std::uint64_t request_fingerprint(const std::string& role, const std::vector<Message>& messages) {
    std::string blob = role;
    for (const auto& m : messages) {
        blob.push_back('\x1f');
        blob += m.speaker;
        blob.push_back('\x1e');
        blob += m.text;
    }
    return fnv1a64(blob);
}

// ------------------------------------------------------------- HTTP backend

namespace {

struct RetryableError : Error {
    explicit RetryableError(const std::string& what) : Error(what) {}
};

// Splits "http://host:port/path" into (scheme://host:port, /path).
std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos)
        throw Error("endpoint missing scheme: " + endpoint);
    auto path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

std::string HttpBackend::complete_once(const RoleConfig& role,
                                       const std::vector<Message>& messages) {
    auto [base, path] = split_endpoint(role.endpoint);

    json body;
    body["model"] = role.model;
    body["temperature"] = role.temperature;
    body["messages"] = json::array();
    for (const auto& m : messages)
        body["messages"].push_back({{"role", m.speaker}, {"content", m.text}});

    httplib::Client client(base);
    client.set_connection_timeout(static_cast<time_t>(role.timeout_seconds), 0);
    client.set_read_timeout(static_cast<time_t>(role.timeout_seconds), 0);

    httplib::Headers headers;
    if (!role.api_key_env.empty()) {
        const char* key = std::getenv(role.api_key_env.c_str());
        if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    auto result = client.Post(path, headers, body.dump(), "application/json");
    if (!result)
        throw RetryableError("transport failure: " + httplib::to_string(result.error()));
    if (result->status >= 500)
        throw RetryableError("server error " + std::to_string(result->status));
    if (result->status >= 400)
        throw Error("request rejected with status " + std::to_string(result->status) + ": " +
                    result->body);

    json parsed = json::parse(result->body, nullptr, false);
    if (parsed.is_discarded())
        throw Error("endpoint returned non-JSON body");
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw Error("endpoint response missing choices[0].message.content");
    }
}

// ------------------------------------------------------------- mock backend

MockBackend::MockBackend(std::map<std::uint64_t, std::string> script, MissPolicy policy,
                         std::string default_response)
    : script_(std::move(script)), policy_(policy), default_response_(std::move(default_response)) {}

std::shared_ptr<MockBackend> MockBackend::from_run_log(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open run log: " + path);
    std::map<std::uint64_t, std::string> script;
    std::string line;
    size_t row = 0;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded())
            throw Error("run log line " + std::to_string(row) + ": malformed JSON");
        if (!j.value("ok", false)) continue;
        script[j.at("fingerprint").get<std::uint64_t>()] = j.at("response").get<std::string>();
    }
    return std::make_shared<MockBackend>(std::move(script));
}

void MockBackend::script_fingerprint(std::uint64_t fingerprint, std::string response) {
    std::lock_guard lock(mutex_);
    script_[fingerprint] = std::move(response);
}

void MockBackend::add_trigger(std::vector<std::string> markers, std::string response) {
    std::lock_guard lock(mutex_);
    triggers_.push_back({std::move(markers), std::move(response)});
}

void MockBackend::push_response(const std::string& role, std::string response) {
    std::lock_guard lock(mutex_);
    queues_[role].push_back({false, std::move(response)});
}

void MockBackend::push_failure(const std::string& role, std::string message) {
    std::lock_guard lock(mutex_);
    queues_[role].push_back({true, std::move(message)});
}

void MockBackend::set_miss_policy(MissPolicy policy, std::string default_response) {
    std::lock_guard lock(mutex_);
    policy_ = policy;
    default_response_ = std::move(default_response);
}

std::string MockBackend::complete_once(const RoleConfig& role,
                                       const std::vector<Message>& messages) {
    std::lock_guard lock(mutex_);

    auto hit = script_.find(request_fingerprint(role.role, messages));
    if (hit != script_.end()) return hit->second;

    std::string blob;
    for (const auto& m : messages) {
        blob += m.text;
        blob.push_back('\n');
    }
    for (const auto& trigger : triggers_) {
        bool all = true;
        for (const auto& marker : trigger.markers) {
            if (blob.find(marker) == std::string::npos) {
                all = false;
                break;
            }
        }
        if (all) return trigger.response;
    }

    auto queue = queues_.find(role.role);
    if (queue != queues_.end() && !queue->second.empty()) {
        Queued next = std::move(queue->second.front());
        queue->second.pop_front();
        if (next.failure) throw RetryableError(next.payload);
        return next.payload;
    }

    if (policy_ == MissPolicy::Default) return default_response_;
    throw Error("mock backend has no script for role '" + role.role + "'");
}

// ------------------------------------------------------------------ gateway

// Per-role admission: a plain counting gate.
class Gateway::Admission {
public:
    explicit Admission(int slots) : slots_(slots > 0 ? slots : 1) {}

    void acquire() {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return in_use_ < slots_; });
        ++in_use_;
    }
    void release() {
        {
            std::lock_guard lock(mutex_);
            --in_use_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    int slots_;
    int in_use_ = 0;
};

Gateway::Gateway(std::map<std::string, RoleConfig> roles, std::shared_ptr<Backend> backend)
    : roles_(std::move(roles)), backend_(std::move(backend)) {
    for (auto& [name, config] : roles_) {
        if (config.role.empty()) config.role = name;
        if (config.max_retries < 0) throw Error("role '" + name + "': max_retries must be >= 0");
        if (config.max_parallel < 1) throw Error("role '" + name + "': max_parallel must be >= 1");
        admissions_[name] = std::make_shared<Admission>(config.max_parallel);
    }
}

bool Gateway::has_role(const std::string& role) const { return roles_.count(role) > 0; }

const RoleConfig& Gateway::config(const std::string& role) const {
    auto it = roles_.find(role);
    if (it == roles_.end()) throw Error("role not configured: " + role);
    return it->second;
}

void Gateway::set_run_log(const std::string& path) {
    std::lock_guard lock(log_mutex_);
    run_log_path_ = path;
}

void Gateway::log_exchange(const ChatExchange& exchange) {
    std::lock_guard lock(log_mutex_);
    exchanges_.push_back(exchange);
    if (run_log_path_.empty()) return;
    json j;
    j["role"] = exchange.role;
    j["fingerprint"] = exchange.fingerprint;
    j["messages"] = json::array();
    for (const auto& m : exchange.messages)
        j["messages"].push_back({{"speaker", m.speaker}, {"text", m.text}});
    j["response"] = exchange.response;
    j["ok"] = exchange.ok;
    j["error"] = exchange.error;
    j["attempts"] = exchange.attempts;
    j["latency_ms"] = exchange.latency_ms;
    j["prompt_chars"] = exchange.prompt_chars;
    j["response_chars"] = exchange.response_chars;
    std::ofstream out(run_log_path_, std::ios::app);
    out << j.dump() << "\n";
}

std::string Gateway::complete(const std::string& role, const std::vector<Message>& messages) {
    const RoleConfig& cfg = config(role);
    auto admission = admissions_.at(role);
    admission->acquire();
    struct Release {
        std::shared_ptr<Admission> a;
        ~Release() { a->release(); }
    } release{admission};

    ChatExchange exchange;
    exchange.role = role;
    exchange.messages = messages;
    exchange.fingerprint = request_fingerprint(role, messages);
    for (const auto& m : messages) exchange.prompt_chars += static_cast<std::int64_t>(m.text.size());

    auto start = std::chrono::steady_clock::now();
    std::string last_error;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        ++exchange.attempts;
        try {
            exchange.response = backend_->complete_once(cfg, messages);
            exchange.ok = true;
            break;
        } catch (const RetryableError& e) {
            last_error = e.what();
            if (attempt == cfg.max_retries) break;
            auto delay = std::chrono::milliseconds(
                static_cast<std::int64_t>(cfg.backoff_initial_ms) * (1LL << attempt));
            std::this_thread::sleep_for(delay);
        } catch (const Error& e) {
            last_error = e.what();
            break;  // non-retryable
        }
    }
    exchange.latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                              std::chrono::steady_clock::now() - start)
                              .count();
    exchange.response_chars = static_cast<std::int64_t>(exchange.response.size());
    if (!exchange.ok) exchange.error = last_error;
    log_exchange(exchange);

    if (!exchange.ok)
        throw Error("role '" + role + "' failed after " + std::to_string(exchange.attempts) +
                    " attempt(s): " + last_error);
    return exchange.response;
}

// ------------------------------------------------------------------- config

std::map<std::string, RoleConfig> load_role_configs(const std::string& yaml_path) {
    YAML::Node root;
    try {
        root = YAML::LoadFile(yaml_path);
    } catch (const YAML::Exception& e) {
        throw Error("cannot parse config '" + yaml_path + "': " + e.what());
    }
    YAML::Node roles = root["roles"] ? root["roles"] : root;
    std::map<std::string, RoleConfig> out;
    for (const auto& entry : roles) {
        std::string name = entry.first.as<std::string>();
        YAML::Node node = entry.second;
        if (!node.IsMap()) continue;
        RoleConfig cfg;
        cfg.role = name;
        cfg.endpoint = node["endpoint"] ? node["endpoint"].as<std::string>() : "";
        cfg.model = node["model"] ? node["model"].as<std::string>() : "";
        cfg.api_key_env = node["api_key_env"] ? node["api_key_env"].as<std::string>() : "";
        if (node["timeout_seconds"]) cfg.timeout_seconds = node["timeout_seconds"].as<double>();
        if (node["max_retries"]) cfg.max_retries = node["max_retries"].as<int>();
        if (node["max_parallel"]) cfg.max_parallel = node["max_parallel"].as<int>();
        if (node["temperature"]) cfg.temperature = node["temperature"].as<double>();
        if (node["backoff_initial_ms"]) cfg.backoff_initial_ms = node["backoff_initial_ms"].as<int>();
        out.emplace(name, std::move(cfg));
    }
    if (out.empty()) throw Error("config '" + yaml_path + "' defines no roles");
    return out;
}

// --------------------------------------------------------------- QAResponse

std::string extract_first_json_object(const std::string& raw) {
    for (size_t start = raw.find('{'); start != std::string::npos;
         start = raw.find('{', start + 1)) {
        int depth = 0;
        bool in_string = false;
        for (size_t i = start; i < raw.size(); ++i) {
            char ch = raw[i];
            if (in_string) {
                if (ch == '\\')
                    ++i;
                else if (ch == '"')
                    in_string = false;
            } else if (ch == '"') {
                in_string = true;
            } else if (ch == '{') {
                ++depth;
            } else if (ch == '}') {
                if (--depth == 0) {
                    std::string candidate = raw.substr(start, i - start + 1);
                    json parsed = json::parse(candidate, nullptr, false);
                    if (!parsed.is_discarded() && parsed.is_object()) return candidate;
                    break;  // balanced but unparseable; try the next '{'
                }
            }
        }
    }
    throw ParseError("no JSON object found in response");
}

QAResponse parse_qa_response(const std::string& raw) {
    json j = json::parse(extract_first_json_object(raw));

    for (const char* field : {"llm_answer_choice", "selected_option_text", "reasoning"}) {
        if (!j.contains(field))
            throw ValidationError(std::string("QAResponse missing field '") + field + "'");
        if (!j.at(field).is_string())
            throw ValidationError(std::string("QAResponse field '") + field + "' must be a string");
    }

    std::string choice = trim(j.at("llm_answer_choice").get<std::string>());
    if (choice.size() != 1)
        throw ValidationError("llm_answer_choice must be a single letter, got '" + choice + "'");
    char letter = static_cast<char>(std::toupper(static_cast<unsigned char>(choice[0])));
    if (letter < 'A' || letter > 'J')
        throw ValidationError("llm_answer_choice outside A-J: '" + choice + "'");

    QAResponse out;
    out.llm_answer_choice = letter;
    out.selected_option_text = j.at("selected_option_text").get<std::string>();
    out.reasoning = j.at("reasoning").get<std::string>();
    return out;
}

}  // namespace qkg
