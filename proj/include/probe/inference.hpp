#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "probe/synthesis.hpp"
#include "probe/synthetic.hpp"

namespace probe {

enum class Mode { single_round, multi_round };

std::string_view mode_name(Mode mode);
Mode parse_mode(std::string_view name);

struct Message {
  std::string role;
  std::string content;

  bool operator==(const Message&) const = default;
};

struct DecodeSettings {
  bool greedy = true;
  int max_tokens = 2048;
};

struct EndpointConfig {
  std::string kind = "http";  // "http" or "synthetic"
  std::string base_url;
  std::string path = "/v1/chat/completions";
  std::string model_id;
  std::string token_env;  // name of the variable holding the bearer token
  double timeout_seconds = 120.0;
  int max_retries = 3;
  int max_parallel = 4;
  double backoff_initial_seconds = 1.0;
  double backoff_max_seconds = 30.0;
  bool send_do_sample = false;  // some servers reject unknown fields
  nlohmann::json extra_body = nlohmann::json::object();
  // Synthetic endpoint only.
  SyntheticProfile profile = SyntheticProfile::uniform(1.0);
  std::uint64_t synthetic_seed = 0;

  static EndpointConfig from_json(const nlohmann::json& j);
  static EndpointConfig load(const std::filesystem::path& path);
};

struct InferenceRecord {
  std::string probe_id;
  Mode mode = Mode::single_round;
  std::vector<Message> transcript;
  std::string final_response;
  DecodeSettings decode;
  std::string model_id;
  std::string started_at;
  std::string finished_at;
  std::optional<std::string> error;

  nlohmann::json to_json() const;
  static InferenceRecord from_json(const nlohmann::json& j);
};

// A chat-completion endpoint. The probe is passed along so that the offline
// synthetic model can read the structured constraints; network backends
// only see the messages.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string complete(const std::vector<Message>& messages, const DecodeSettings& decode,
                               const ProbeInstance& probe) = 0;
  virtual std::string model_id() const = 0;
};

// Request body in the common chat-completion schema.
nlohmann::json build_request_body(const EndpointConfig& config, const std::vector<Message>& messages,
                                  const DecodeSettings& decode);

class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(EndpointConfig config);

  // Retries transport failures, 429 and 5xx with exponential backoff; other
  // statuses fail at once. Throws TransportError when retries run out.
  std::string complete(const std::vector<Message>& messages, const DecodeSettings& decode,
                       const ProbeInstance& probe) override;
  std::string model_id() const override { return config_.model_id; }

 private:
  EndpointConfig config_;
};

// Deterministic offline model. Each visible constraint is followed with its
// position-adjusted probability; the response is assembled so that the
// checkers see exactly those decisions.
class SyntheticBackend : public ChatBackend {
 public:
  SyntheticBackend(SyntheticProfile profile, std::uint64_t seed, const ResponseBuilder& builder = ResponseBuilder::shared());

  std::string complete(const std::vector<Message>& messages, const DecodeSettings& decode,
                       const ProbeInstance& probe) override;
  std::string model_id() const override { return "synthetic"; }

  // Decisions for the first `visible` constraints of the probe.
  std::vector<bool> decisions(const ProbeInstance& probe, std::size_t visible) const;

 private:
  SyntheticProfile profile_;
  std::uint64_t seed_;
  const ResponseBuilder* builder_;
};

std::unique_ptr<ChatBackend> make_backend(const EndpointConfig& config);

// Response text for `probe` with the first `visible` constraints in force.
std::string synthetic_respond(const SyntheticProfile& profile, const ProbeInstance& probe, std::size_t visible,
                              std::uint64_t seed, std::string_view turn_key,
                              const ResponseBuilder& builder = ResponseBuilder::shared());

InferenceRecord run_single_round(const ProbeInstance& probe, ChatBackend& backend, const DecodeSettings& decode);

// Seed first, then one constraint per turn. ArgumentError for a probe
// without constraints; a failure mid-conversation keeps the partial
// transcript and sets the error.
InferenceRecord run_multi_round(const ProbeInstance& probe, ChatBackend& backend, const DecodeSettings& decode);

struct OrchestratorStats {
  std::size_t launched = 0;
  std::size_t skipped = 0;
  std::size_t errors = 0;
};

// Issues conversations concurrently up to `max_parallel` and appends each
// record through one writer. Probe ids already present in `out` are skipped,
// and a truncated final line from an interrupted run is dropped first.
class Orchestrator {
 public:
  Orchestrator(ChatBackend& backend, DecodeSettings decode, int max_parallel);

  OrchestratorStats run(std::span<const ProbeInstance> probes, Mode mode, const std::filesystem::path& out);

  // Observes each finished record (progress reporting, tests).
  void on_record(std::function<void(const InferenceRecord&)> fn) { on_record_ = std::move(fn); }

 private:
  ChatBackend* backend_;
  DecodeSettings decode_;
  int max_parallel_;
  std::function<void(const InferenceRecord&)> on_record_;
};

// Records in file order; a truncated final line is ignored.
std::vector<InferenceRecord> load_records(const std::filesystem::path& path);

}  // namespace probe
