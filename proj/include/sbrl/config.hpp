#ifndef SBRL_CONFIG_HPP_
#define SBRL_CONFIG_HPP_

#include <map>
#include <string>

namespace sbrl {

/// Flat key-value configuration with [section] headers. Keys are addressed
/// as "section.key"; every lookup carries a default so a missing file or key
/// falls back to the built-in value.
class Config {
 public:
  Config() = default;

  static Config load(const std::string& path);
  void save(const std::string& path) const;

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;

  std::string get_string(const std::string& key, const std::string& def) const;
  double get_double(const std::string& key, double def) const;
  int get_int(const std::string& key, int def) const;
  long get_long(const std::string& key, long def) const;
  bool get_bool(const std::string& key, bool def) const;

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
};

}  // namespace sbrl

#endif  // SBRL_CONFIG_HPP_
