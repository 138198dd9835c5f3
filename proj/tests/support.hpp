#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "probe/constraints.hpp"
#include "probe/synthesis.hpp"

namespace probe::testing {

inline ParamValue num(std::int64_t v) { return v; }

inline ConstraintInstance make(Kind kind, Params params = {}, int variant = 0) {
  ConstraintInstance c;
  c.kind = kind;
  c.params = std::move(params);
  c.variant_index = variant;
  c.rendered_text = Taxonomy::shared().render(c);
  return c;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("probe-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::vector<SeedInstruction> make_seeds(std::size_t count) {
  std::vector<SeedInstruction> seeds;
  for (std::size_t i = 0; i < count; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "s%03zu", i);
    seeds.push_back({id, "Write a short note about topic number " + std::to_string(i) + ".", SeedSource::custom});
  }
  return seeds;
}

}  // namespace probe::testing
