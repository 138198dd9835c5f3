#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "probe/constraints.hpp"
#include "probe/rng.hpp"
#include "probe/verifier.hpp"

namespace probe {

// Position-dependent satisfaction model of the offline synthetic model.
// At 0-based position i of n the probability of following kind k is
//   clamp(p_k + (beta + gamma * (1 - p_k)) * (i / (n - 1) - 0.5)).
// gamma = 0 gives the plain additive form.
struct SyntheticProfile {
  std::array<double, kKindCount> p{};
  double beta = 0.0;
  double gamma = 0.0;

  double probability(Kind kind, std::size_t position, std::size_t n) const;

  static SyntheticProfile uniform(double p, double beta = 0.0, double gamma = 0.0);

  // p spread evenly over [lo, hi]; kinds are assigned to levels in a fixed
  // scrambled order so that difficulty does not follow the taxonomy layout.
  static SyntheticProfile spread(double lo, double hi, double beta, double gamma);

  nlohmann::json to_json() const;
  static SyntheticProfile from_json(const nlohmann::json& j);
};

// Expected constraint-level accuracy of one ordered instruction.
double expected_accuracy(const SyntheticProfile& profile, std::span<const Kind> order);

// Uniform draw shared by every probe of the same family and kind, so that
// reorderings of one instruction differ only through their positions.
double decision_draw(std::string_view family_id, Kind kind, std::uint64_t seed);

// Builds responses that follow or break each constraint as requested.
class ResponseBuilder {
 public:
  ResponseBuilder(const Taxonomy& taxonomy, const Verifier& verifier);

  static const ResponseBuilder& shared();

  // `follow[j]` decides constraint j. Every verdict of the result matches
  // the request; ConfigError when no such response could be assembled.
  std::string build(std::span<const ConstraintInstance> constraints, const std::vector<bool>& follow, Rng& rng) const;

  std::span<const std::string> pool(std::string_view language) const;

 private:
  std::string attempt(std::span<const ConstraintInstance> constraints, const std::vector<bool>& follow, Rng& rng) const;

  const Taxonomy* taxonomy_;
  const Verifier* verifier_;
  std::map<std::string, std::vector<std::string>, std::less<>> pools_;
  std::map<std::string, bool, std::less<>> cased_;
};

}  // namespace probe
