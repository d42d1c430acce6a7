#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace pkt::cfg {

struct KeySpec {
    std::string key;
    std::string default_value;
    std::string description;
};

// Flat "key = value" configuration with a fixed key registry; unknown
// keys are rejected. Every run writes its resolved snapshot next to
// its outputs.
class Config {
  public:
    Config();  // all defaults

    static const std::vector<KeySpec>& registry();

    void load_file(const std::string& path);
    void set(const std::string& key, const std::string& value);

    std::int64_t get_int(const std::string& key) const;
    double get_real(const std::string& key) const;
    const std::string& get_str(const std::string& key) const;

    // full snapshot in registry order
    std::string resolved_text() const;
    void write_resolved(const std::string& path) const;

  private:
    std::map<std::string, std::string> values_;
};

}  // namespace pkt::cfg
