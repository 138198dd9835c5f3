#include "probe/inference.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <mutex>
#include <sstream>
#include <thread>
#include <unordered_set>

#include <httplib.h>

#include "probe/error.hpp"
#include "probe/json_io.hpp"
#include "probe/log.hpp"
#include "probe/text.hpp"

namespace probe {

namespace {

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[40];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
  return out;
}

bool retryable(int status) { return status == 429 || status >= 500; }

std::size_t count_user_turns(const std::vector<Message>& messages) {
  return static_cast<std::size_t>(
      std::count_if(messages.begin(), messages.end(), [](const Message& m) { return m.role == "user"; }));
}

// Lines of a records file; a malformed last line (interrupted write) is
// reported through `truncated` instead of raising.
std::vector<nlohmann::json> read_record_lines(const std::filesystem::path& path, bool& truncated) {
  truncated = false;
  std::vector<nlohmann::json> out;
  if (!std::filesystem::exists(path)) return out;
  const std::string content = read_text_file(path);
  const auto lines = text::split_lines(content);
  std::size_t last = lines.size();
  while (last > 0 && text::trim(lines[last - 1]).empty()) --last;
  for (std::size_t i = 0; i < last; ++i) {
    if (text::trim(lines[i]).empty()) continue;
    try {
      out.push_back(nlohmann::json::parse(lines[i]));
    } catch (const nlohmann::json::parse_error& e) {
      if (i + 1 == last) {
        truncated = true;
        break;
      }
      throw ParseError(std::string("malformed record: ") + e.what(), i + 1);
    }
  }
  return out;
}

}  // namespace

std::string_view mode_name(Mode mode) { return mode == Mode::single_round ? "single_round" : "multi_round"; }

Mode parse_mode(std::string_view name) {
  if (name == "single_round" || name == "single") return Mode::single_round;
  if (name == "multi_round" || name == "multi") return Mode::multi_round;
  throw ArgumentError("unknown inference mode '" + std::string(name) + "'");
}

EndpointConfig EndpointConfig::from_json(const nlohmann::json& j) {
  EndpointConfig c;
  c.kind = j.value("kind", c.kind);
  if (c.kind != "http" && c.kind != "synthetic") throw ConfigError("endpoint kind must be http or synthetic");
  c.base_url = j.value("base_url", c.base_url);
  c.path = j.value("path", c.path);
  c.model_id = j.value("model_id", c.model_id);
  c.token_env = j.value("token_env", c.token_env);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.max_parallel = j.value("max_parallel", c.max_parallel);
  c.backoff_initial_seconds = j.value("backoff_initial_seconds", c.backoff_initial_seconds);
  c.backoff_max_seconds = j.value("backoff_max_seconds", c.backoff_max_seconds);
  c.send_do_sample = j.value("send_do_sample", c.send_do_sample);
  if (j.contains("extra_body")) c.extra_body = j.at("extra_body");
  if (j.contains("profile")) c.profile = SyntheticProfile::from_json(j.at("profile"));
  c.synthetic_seed = j.value("synthetic_seed", c.synthetic_seed);
  if (c.max_parallel < 1) throw ConfigError("max_parallel must be at least 1");
  if (c.max_retries < 0) throw ConfigError("max_retries must be non-negative");
  if (c.kind == "http" && c.base_url.empty()) throw ConfigError("http endpoint needs base_url");
  if (c.kind == "synthetic" && c.model_id.empty()) c.model_id = "synthetic";
  return c;
}

EndpointConfig EndpointConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("endpoint config not found: " + path.string());
  return from_json(read_json_file(path));
}

nlohmann::json InferenceRecord::to_json() const {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& m : transcript) turns.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json j{{"probe_id", probe_id},
                   {"mode", mode_name(mode)},
                   {"transcript", turns},
                   {"final_response", final_response},
                   {"decode", {{"greedy", decode.greedy}, {"max_tokens", decode.max_tokens}}},
                   {"model_id", model_id},
                   {"started_at", started_at},
                   {"finished_at", finished_at}};
  j["error"] = error ? nlohmann::json(*error) : nlohmann::json(nullptr);
  return j;
}

InferenceRecord InferenceRecord::from_json(const nlohmann::json& j) {
  InferenceRecord r;
  r.probe_id = j.at("probe_id").get<std::string>();
  r.mode = parse_mode(j.at("mode").get<std::string>());
  for (const auto& m : j.at("transcript")) r.transcript.push_back({m.at("role"), m.at("content")});
  r.final_response = j.value("final_response", std::string());
  if (j.contains("decode")) {
    r.decode.greedy = j["decode"].value("greedy", true);
    r.decode.max_tokens = j["decode"].value("max_tokens", 2048);
  }
  r.model_id = j.value("model_id", std::string());
  r.started_at = j.value("started_at", std::string());
  r.finished_at = j.value("finished_at", std::string());
  if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
  return r;
}

nlohmann::json build_request_body(const EndpointConfig& config, const std::vector<Message>& messages,
                                  const DecodeSettings& decode) {
  nlohmann::json body = config.extra_body.is_object() ? config.extra_body : nlohmann::json::object();
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  body["model"] = config.model_id;
  body["messages"] = msgs;
  body["max_tokens"] = decode.max_tokens;
  body["stream"] = false;
  if (decode.greedy) {
    body["temperature"] = 0.0;
    body["top_p"] = 1.0;
    if (config.send_do_sample) body["do_sample"] = false;
  }
  return body;
}

HttpChatBackend::HttpChatBackend(EndpointConfig config) : config_(std::move(config)) {}

std::string HttpChatBackend::complete(const std::vector<Message>& messages, const DecodeSettings& decode,
                                      const ProbeInstance&) {
  httplib::Client client(config_.base_url);
  const auto seconds = static_cast<time_t>(config_.timeout_seconds);
  const auto micros = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(seconds)) * 1e6);
  client.set_connection_timeout(seconds, micros);
  client.set_read_timeout(seconds, micros);
  client.set_write_timeout(seconds, micros);
  if (!config_.token_env.empty()) {
    if (const char* token = std::getenv(config_.token_env.c_str()); token && *token) client.set_bearer_token_auth(token);
  }
  const std::string body = build_request_body(config_, messages, decode).dump();

  std::string last_error;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      const double wait = std::min(config_.backoff_max_seconds, config_.backoff_initial_seconds * std::pow(2.0, attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(wait));
    }
    auto res = client.Post(config_.path, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      try {
        const auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("unexpected response body: ") + e.what());
      }
    }
    last_error = "HTTP " + std::to_string(res->status);
    if (!retryable(res->status)) break;
  }
  throw TransportError(last_error + " after " + std::to_string(config_.max_retries) + " retries");
}

SyntheticBackend::SyntheticBackend(SyntheticProfile profile, std::uint64_t seed, const ResponseBuilder& builder)
    : profile_(profile), seed_(seed), builder_(&builder) {}

std::vector<bool> SyntheticBackend::decisions(const ProbeInstance& probe, std::size_t visible) const {
  std::vector<bool> out;
  const std::size_t n = probe.constraints.size();
  const std::string family = probe.family_id();
  for (std::size_t i = 0; i < visible && i < n; ++i) {
    const Kind k = probe.constraints[i].kind;
    out.push_back(decision_draw(family, k, seed_) < profile_.probability(k, i, n));
  }
  return out;
}

std::string synthetic_respond(const SyntheticProfile& profile, const ProbeInstance& probe, std::size_t visible,
                              std::uint64_t seed, std::string_view turn_key, const ResponseBuilder& builder) {
  SyntheticBackend backend(profile, seed, builder);
  const auto follow = backend.decisions(probe, visible);
  const std::span<const ConstraintInstance> shown(probe.constraints.data(), follow.size());
  Rng rng(stable_hash(probe.probe_id + "#" + std::string(turn_key), seed));
  return builder.build(shown, follow, rng);
}

std::string SyntheticBackend::complete(const std::vector<Message>& messages, const DecodeSettings&,
                                       const ProbeInstance& probe) {
  const std::size_t users = count_user_turns(messages);
  if (users == 0) throw ArgumentError("conversation has no user turn");
  // One turn carrying the whole instruction, or the seed followed by one
  // constraint per turn.
  const bool single = users == 1 && messages.back().content == probe.text;
  const std::size_t visible = single ? probe.constraints.size() : users - 1;
  return synthetic_respond(profile_, probe, visible, seed_, "turn" + std::to_string(users), *builder_);
}

std::unique_ptr<ChatBackend> make_backend(const EndpointConfig& config) {
  if (config.kind == "synthetic") return std::make_unique<SyntheticBackend>(config.profile, config.synthetic_seed);
  return std::make_unique<HttpChatBackend>(config);
}

InferenceRecord run_single_round(const ProbeInstance& probe, ChatBackend& backend, const DecodeSettings& decode) {
  InferenceRecord r;
  r.probe_id = probe.probe_id;
  r.mode = Mode::single_round;
  r.decode = decode;
  r.model_id = backend.model_id();
  r.started_at = utc_now();
  r.transcript.push_back({"user", probe.text});
  try {
    r.final_response = backend.complete(r.transcript, decode, probe);
    r.transcript.push_back({"assistant", r.final_response});
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.finished_at = utc_now();
  return r;
}

InferenceRecord run_multi_round(const ProbeInstance& probe, ChatBackend& backend, const DecodeSettings& decode) {
  if (probe.constraints.empty()) throw ArgumentError("multi-round inference needs at least one constraint");
  InferenceRecord r;
  r.probe_id = probe.probe_id;
  r.mode = Mode::multi_round;
  r.decode = decode;
  r.model_id = backend.model_id();
  r.started_at = utc_now();
  const std::string seed_text = probe.seed_text.empty() ? probe.text.substr(0, probe.text.find('\n')) : probe.seed_text;
  try {
    for (std::size_t turn = 0; turn <= probe.constraints.size(); ++turn) {
      r.transcript.push_back({"user", turn == 0 ? seed_text : probe.constraints[turn - 1].rendered_text});
      const std::string reply = backend.complete(r.transcript, decode, probe);
      r.transcript.push_back({"assistant", reply});
    }
    r.final_response = r.transcript.back().content;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.finished_at = utc_now();
  return r;
}

Orchestrator::Orchestrator(ChatBackend& backend, DecodeSettings decode, int max_parallel)
    : backend_(&backend), decode_(decode), max_parallel_(max_parallel) {
  if (max_parallel_ < 1) throw ArgumentError("max_parallel must be at least 1");
}

OrchestratorStats Orchestrator::run(std::span<const ProbeInstance> probes, Mode mode, const std::filesystem::path& out) {
  bool truncated = false;
  const auto existing = read_record_lines(out, truncated);
  std::unordered_set<std::string> done;
  for (const auto& j : existing) done.insert(j.at("probe_id").get<std::string>());
  if (truncated) {
    log::warn("dropping a truncated record at the end of " + out.string());
    std::string content;
    for (const auto& j : existing) content += j.dump() + "\n";
    write_file_atomic(out, content);
  }

  std::vector<const ProbeInstance*> todo;
  OrchestratorStats stats;
  std::unordered_set<std::string> queued;
  for (const auto& p : probes) {
    if (done.count(p.probe_id) || !queued.insert(p.probe_id).second) {
      ++stats.skipped;
      continue;
    }
    todo.push_back(&p);
  }

  JsonlAppender writer(out);
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> errors{0};
  std::mutex callback_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < todo.size(); i = next++) {
      const ProbeInstance& probe = *todo[i];
      InferenceRecord record;
      try {
        record = mode == Mode::single_round ? run_single_round(probe, *backend_, decode_)
                                            : run_multi_round(probe, *backend_, decode_);
      } catch (const std::exception& e) {
        record.probe_id = probe.probe_id;
        record.mode = mode;
        record.decode = decode_;
        record.model_id = backend_->model_id();
        record.error = e.what();
      }
      if (record.error) ++errors;
      writer.append(record.to_json());
      if (on_record_) {
        std::lock_guard lock(callback_mutex);
        on_record_(record);
      }
    }
  };
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(max_parallel_), std::max<std::size_t>(todo.size(), 1));
  std::vector<std::thread> threads;
  for (std::size_t t = 0; t + 1 < workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  stats.launched = todo.size();
  stats.errors = errors.load();
  return stats;
}

std::vector<InferenceRecord> load_records(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("records file not found: " + path.string());
  bool truncated = false;
  std::vector<InferenceRecord> out;
  for (const auto& j : read_record_lines(path, truncated)) out.push_back(InferenceRecord::from_json(j));
  if (truncated) log::warn("ignoring a truncated record at the end of " + path.string());
  return out;
}

}  // namespace probe
