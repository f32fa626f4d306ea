#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "cqad/device_model.hpp"

namespace cqad {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat "key = value" text; '#' starts a comment.
class KeyValueDocument {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static KeyValueDocument parse(std::istream& in, const std::string& source);
  static KeyValueDocument load(const std::string& path);

  const std::string& source() const { return source_; }
  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  const std::map<std::string, Entry>& entries() const { return entries_; }

  std::optional<std::string> get_string(const std::string& key) const;
  std::optional<double> get_quantity(const std::string& key) const;
  std::optional<long> get_integer(const std::string& key) const;
  std::optional<bool> get_bool(const std::string& key) const;
  // Comma-separated list of quantities.
  std::optional<std::vector<double>> get_quantity_list(const std::string& key) const;

  std::string where(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { entries_[key] = {value, 0}; }

 private:
  std::string source_;
  std::map<std::string, Entry> entries_;
};

// "259.5k", "-4.1 MHz", "15us", "3.2e3" -> SI value. Case matters: m is milli, M is mega.
double parse_quantity(const std::string& text);

// Keys: omega_q, omega_m_lg00, ..., delta_rest, ..., and rates.<label>.<name>
// where <label> is one of rest/coherent/fock/ramsey.
SystemParams load_params(const KeyValueDocument& doc, SystemParams base = {});
// Throws ValidationError naming the first value that differs from the preset.
void check_paper_defaults(const SystemParams& params);
std::string params_to_text(const SystemParams& params);

}  // namespace cqad
