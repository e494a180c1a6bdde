#pragma once

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "rto/errors.hpp"

namespace rto::detail {

inline int line_at_offset(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  int line = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') ++line;
  }
  return line;
}

/// 1-based line of the first occurrence of "key" (quoted), 0 if absent.
inline int line_of_key(const std::string& text, const std::string& key) {
  const auto pos = text.find('"' + key + '"');
  return pos == std::string::npos ? 0 : line_at_offset(text, pos);
}

/// Best-effort line for a nlohmann exception: byte position for parse
/// errors, otherwise the first quoted key named in the message.
inline int line_of_error(const std::string& text, const nlohmann::json::exception& e) {
  if (const auto* pe = dynamic_cast<const nlohmann::json::parse_error*>(&e)) {
    return line_at_offset(text, pe->byte > 0 ? pe->byte - 1 : 0);
  }
  const std::string what = e.what();
  const auto open = what.find('\'');
  if (open != std::string::npos) {
    const auto close = what.find('\'', open + 1);
    if (close != std::string::npos) return line_of_key(text, what.substr(open + 1, close - open - 1));
  }
  return 0;
}

inline nlohmann::json parse_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(e.what(), line_of_error(text, e));
  }
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed for " + path.string());
}

/// Shortest decimal that round-trips to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw ParameterError("not a number: '" + std::string(s) + "'");
  return v;
}

}  // namespace rto::detail
