#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace nni {

// Flat key = value configuration text. '#' starts a comment; keys and
// values are whitespace-trimmed.
class Config {
  public:
    static Config from_file(const std::string& path);
    static Config from_string(const std::string& text, const std::string& origin = "<string>");

    bool has(const std::string& key) const { return entries_.count(key) != 0; }
    std::string get(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    const std::map<std::string, std::string>& entries() const { return entries_; }

  private:
    std::map<std::string, std::string> entries_;
    std::string origin_;
};

}  // namespace nni
