#include "probe/synthesis.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "probe/error.hpp"
#include "probe/json_io.hpp"

namespace probe {

namespace {

std::string combination_id(std::size_t index) {
  std::string digits = std::to_string(index);
  return "c" + std::string(digits.size() < 3 ? 3 - digits.size() : 0, '0') + digits;
}

std::string describe(const std::vector<Kind>& kinds) {
  std::string out = "[";
  for (std::size_t i = 0; i < kinds.size(); ++i) {
    if (i) out += ", ";
    out += kind_name(kinds[i]);
  }
  return out + "]";
}

// Random maximal walk: each step picks uniformly among kinds compatible with
// everything chosen so far. Returns fewer than n kinds on a dead end.
std::vector<Kind> draw_kinds(const ConflictMatrix& conflicts, std::size_t n, Rng& rng) {
  std::vector<Kind> chosen;
  while (chosen.size() < n) {
    std::vector<Kind> open;
    for (Kind k : all_kinds()) {
      const bool ok = std::none_of(chosen.begin(), chosen.end(), [&](Kind c) { return conflicts.conflicts(c, k); });
      if (ok) open.push_back(k);
    }
    if (open.empty()) break;
    chosen.push_back(open[rng.index(open.size())]);
  }
  return chosen;
}

}  // namespace

std::string_view seed_source_name(SeedSource s) {
  switch (s) {
    case SeedSource::natural_instructions: return "natural_instructions";
    case SeedSource::self_instruct: return "self_instruct";
    case SeedSource::open_assistant: return "open_assistant";
    case SeedSource::custom: return "custom";
  }
  return "custom";
}

SeedSource parse_seed_source(std::string_view name) {
  for (auto s : {SeedSource::natural_instructions, SeedSource::self_instruct, SeedSource::open_assistant,
                 SeedSource::custom}) {
    if (seed_source_name(s) == name) return s;
  }
  throw DataError("unknown seed source '" + std::string(name) + "'");
}

std::vector<SeedInstruction> load_seeds(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("seeds file not found: " + path.string());
  std::vector<SeedInstruction> seeds;
  std::unordered_set<std::string> ids;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError("seed record is not an object", line);
    if (!j.contains("id") || !j["id"].is_string()) throw ParseError("seed record missing string field 'id'", line);
    if (!j.contains("text") || !j["text"].is_string()) throw ParseError("seed record missing string field 'text'", line);
    SeedInstruction s;
    s.id = j["id"].get<std::string>();
    s.text = j["text"].get<std::string>();
    if (s.text.empty()) throw ParseError("seed text is empty", line);
    if (j.contains("source")) {
      try {
        s.source = parse_seed_source(j["source"].get<std::string>());
      } catch (const std::exception& e) {
        throw ParseError(e.what(), line);
      }
    }
    if (!ids.insert(s.id).second) throw DataError("duplicate seed id '" + s.id + "' at line " + std::to_string(line));
    seeds.push_back(std::move(s));
  });
  return seeds;
}

nlohmann::json ConstraintCombination::to_json() const {
  nlohmann::json members_json = nlohmann::json::array();
  for (const auto& m : members) members_json.push_back(probe::to_json(m));
  return {{"id", id}, {"members", members_json}};
}

ConstraintCombination ConstraintCombination::from_json(const nlohmann::json& j) {
  ConstraintCombination c;
  c.id = j.at("id").get<std::string>();
  for (const auto& m : j.at("members")) c.members.push_back(constraint_from_json(m));
  return c;
}

std::vector<ConstraintCombination> sample_combinations(const Taxonomy& taxonomy, const ConflictMatrix& conflicts,
                                                       std::size_t n, std::size_t n_cc, Rng& rng) {
  if (n == 0) throw ArgumentError("constraint count must be positive");
  if (n_cc == 0) throw ArgumentError("combination count must be positive");
  std::vector<ConstraintCombination> out;
  std::set<std::vector<Kind>> seen;
  for (std::size_t index = 0; index < n_cc; ++index) {
    std::vector<Kind> last;
    bool done = false;
    for (int attempt = 0; attempt < kSamplingRetryCap && !done; ++attempt) {
      auto kinds = draw_kinds(conflicts, n, rng);
      last = kinds;
      if (kinds.size() < n) continue;
      auto key = kinds;
      std::sort(key.begin(), key.end());
      if (seen.count(key)) continue;
      ConstraintCombination combo;
      combo.id = combination_id(index);
      for (Kind k : kinds) combo.members.push_back(taxonomy.instantiate(k, rng));
      bool clash = false;
      for (std::size_t a = 0; a < n && !clash; ++a) {
        for (std::size_t b = a + 1; b < n && !clash; ++b) clash = conflicts.conflicts(combo.members[a], combo.members[b]);
      }
      if (clash) continue;
      seen.insert(std::move(key));
      out.push_back(std::move(combo));
      done = true;
    }
    if (!done) {
      throw SamplingError("no conflict-free combination of " + std::to_string(n) + " constraints after " +
                          std::to_string(kSamplingRetryCap) + " draws; last partial set " + describe(last));
    }
  }
  return out;
}

ComposedInstruction compose(const SeedInstruction& seed, const ConstraintCombination& combination,
                            const std::vector<std::size_t>& order) {
  const std::size_t n = combination.members.size();
  if (order.size() != n) throw ArgumentError("order length does not match the combination");
  std::vector<bool> used(n, false);
  for (std::size_t i : order) {
    if (i >= n || used[i]) throw ArgumentError("order is not a permutation of the combination");
    used[i] = true;
  }
  ComposedInstruction c;
  c.seed_id = seed.id;
  c.text = seed.text;
  for (std::size_t i : order) {
    const auto& member = combination.members[i];
    c.text += '\n';
    c.spans.push_back({c.text.size(), c.text.size() + member.rendered_text.size()});
    c.text += member.rendered_text;
    c.ordered.push_back(member);
  }
  return c;
}

nlohmann::json ProbeInstance::to_json() const {
  nlohmann::json order = nlohmann::json::array();
  nlohmann::json members = nlohmann::json::array();
  nlohmann::json span_json = nlohmann::json::array();
  for (const auto& c : constraints) {
    order.push_back(kind_name(c.kind));
    members.push_back(probe::to_json(c));
  }
  for (const auto& s : spans) span_json.push_back({s.begin, s.end});
  return {{"probe_id", probe_id},
          {"seed_id", seed_id},
          {"combination_id", combination_id},
          {"order", order},
          {"target_cddi", target_cddi},
          {"realized_cddi", realized_cddi},
          {"discordant_pairs", discordant_pairs},
          {"seed_text", seed_text},
          {"constraints", members},
          {"spans", span_json},
          {"text", text}};
}

ProbeInstance ProbeInstance::from_json(const nlohmann::json& j) {
  ProbeInstance p;
  p.probe_id = j.at("probe_id").get<std::string>();
  p.seed_id = j.at("seed_id").get<std::string>();
  p.combination_id = j.at("combination_id").get<std::string>();
  p.target_cddi = j.value("target_cddi", 0.0);
  p.realized_cddi = j.value("realized_cddi", 0.0);
  p.discordant_pairs = j.value("discordant_pairs", std::size_t{0});
  p.seed_text = j.value("seed_text", std::string());
  p.text = j.at("text").get<std::string>();
  for (const auto& c : j.at("constraints")) p.constraints.push_back(constraint_from_json(c));
  if (j.contains("spans")) {
    for (const auto& s : j.at("spans")) p.spans.push_back({s.at(0).get<std::size_t>(), s.at(1).get<std::size_t>()});
  }
  return p;
}

std::vector<ProbeInstance> load_probes(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("probes file not found: " + path.string());
  std::vector<ProbeInstance> probes;
  read_jsonl(path, [&](const nlohmann::json& j, std::size_t line) {
    try {
      probes.push_back(ProbeInstance::from_json(j));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("malformed probe record: ") + e.what(), line);
    }
  });
  return probes;
}

}  // namespace probe
