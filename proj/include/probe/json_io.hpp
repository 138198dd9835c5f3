#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <string>
#include <string_view>

#include <json.hpp>

namespace probe {

nlohmann::json read_json_file(const std::filesystem::path& path);

// Calls fn(record, line_number) for each non-blank line. Malformed JSON
// raises ParseError carrying the 1-based line number.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const nlohmann::json&, std::size_t)>& fn);

std::string read_text_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// Line-delimited appender shared by concurrent producers.
class JsonlAppender {
 public:
  explicit JsonlAppender(const std::filesystem::path& path);

  void append(const nlohmann::json& record);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

}  // namespace probe
