#include "cqad/params_io.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace cqad {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

struct NumericKey {
  const char* key;
  double SystemParams::*field;
};

constexpr NumericKey kNumericKeys[] = {
    {"omega_q", &SystemParams::omega_q},
    {"omega_m_lg00", &SystemParams::omega_m_lg00},
    {"omega_m_lg10", &SystemParams::omega_m_lg10},
    {"g_lg00", &SystemParams::g_lg00},
    {"g_lg10", &SystemParams::g_lg10},
    {"alpha", &SystemParams::alpha},
    {"fsr", &SystemParams::fsr},
    {"e_c", &SystemParams::e_c},
    {"e_j", &SystemParams::e_j},
    {"delta_rest", &SystemParams::delta_rest},
    {"delta_coherent", &SystemParams::delta_coherent},
    {"delta_fock", &SystemParams::delta_fock},
    {"delta_ramsey", &SystemParams::delta_ramsey},
};

struct RateKey {
  const char* key;
  double CoherenceRates::*field;
};

constexpr RateKey kRateKeys[] = {
    {"gamma1", &CoherenceRates::gamma1},
    {"gamma2_star", &CoherenceRates::gamma2_star},
    {"gamma2_echo", &CoherenceRates::gamma2_echo},
    {"kappa1", &CoherenceRates::kappa1},
    {"kappa2_star", &CoherenceRates::kappa2_star},
};

double operating_delta(const SystemParams& p, const std::string& label) {
  for (const auto& op : p.operating_points())
    if (op.label == label) return op.delta;
  throw ValidationError("unknown operating point '" + label + "'");
}

}  // namespace

KeyValueDocument KeyValueDocument::parse(std::istream& in, const std::string& source) {
  KeyValueDocument doc;
  doc.source_ = source;
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = raw;
    if (auto h = s.find('#'); h != std::string::npos) s = s.substr(0, h);
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string::npos) {
      std::ostringstream os;
      os << source << ":" << line << ": expected 'key = value'";
      throw ValidationError(os.str());
    }
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (key.empty()) {
      std::ostringstream os;
      os << source << ":" << line << ": empty key";
      throw ValidationError(os.str());
    }
    if (doc.entries_.count(key)) {
      std::ostringstream os;
      os << source << ":" << line << ": duplicate key '" << key << "' (first on line "
         << doc.entries_[key].line << ")";
      throw ValidationError(os.str());
    }
    doc.entries_[key] = {value, line};
  }
  return doc;
}

KeyValueDocument KeyValueDocument::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return parse(in, path);
}

std::string KeyValueDocument::where(const std::string& key) const {
  std::ostringstream os;
  os << source_;
  if (auto it = entries_.find(key); it != entries_.end() && it->second.line > 0)
    os << ":" << it->second.line;
  os << ": field '" << key << "'";
  return os.str();
}

std::optional<std::string> KeyValueDocument::get_string(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second.value;
}

std::optional<double> KeyValueDocument::get_quantity(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  try {
    return parse_quantity(*s);
  } catch (const std::exception& e) {
    throw ValidationError(where(key) + ": " + e.what());
  }
}

std::optional<long> KeyValueDocument::get_integer(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  try {
    size_t pos = 0;
    long v = std::stol(*s, &pos);
    if (pos != s->size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where(key) + ": expected an integer, got '" + *s + "'");
  }
}

std::optional<bool> KeyValueDocument::get_bool(const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  if (*s == "true" || *s == "1" || *s == "yes") return true;
  if (*s == "false" || *s == "0" || *s == "no") return false;
  throw ValidationError(where(key) + ": expected true/false, got '" + *s + "'");
}

std::optional<std::vector<double>> KeyValueDocument::get_quantity_list(
    const std::string& key) const {
  auto s = get_string(key);
  if (!s) return std::nullopt;
  std::vector<double> out;
  std::stringstream ss(*s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) continue;
    try {
      out.push_back(parse_quantity(item));
    } catch (const std::exception& e) {
      throw ValidationError(where(key) + ": " + e.what());
    }
  }
  if (out.empty()) throw ValidationError(where(key) + ": empty list");
  return out;
}

double parse_quantity(const std::string& text) {
  std::string s = trim(text);
  if (s.empty()) throw std::invalid_argument("empty number");
  size_t pos = 0;
  double v;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  std::string rest = trim(s.substr(pos));
  if (rest.size() >= 2 && rest.substr(rest.size() - 2) == "Hz") rest = rest.substr(0, rest.size() - 2);
  else if (!rest.empty() && rest.back() == 's' && rest.size() >= 1) rest = rest.substr(0, rest.size() - 1);
  double scale = 1.0;
  if (rest.empty()) scale = 1.0;
  else if (rest == "p") scale = 1e-12;
  else if (rest == "n") scale = 1e-9;
  else if (rest == "u" || rest == "µ") scale = 1e-6;
  else if (rest == "m") scale = 1e-3;
  else if (rest == "k") scale = 1e3;
  else if (rest == "M") scale = 1e6;
  else if (rest == "G") scale = 1e9;
  else throw std::invalid_argument("unknown unit suffix in '" + text + "'");
  if (!std::isfinite(v)) throw std::invalid_argument("non-finite number: '" + text + "'");
  return v * scale;
}

SystemParams load_params(const KeyValueDocument& doc, SystemParams base) {
  SystemParams p = std::move(base);
  for (const auto& [key, entry] : doc.entries()) {
    bool known = false;
    for (const auto& nk : kNumericKeys)
      if (key == nk.key) {
        p.*(nk.field) = *doc.get_quantity(key);
        known = true;
      }
    if (!known && key.rfind("rates.", 0) == 0) continue;
    if (!known) throw ValidationError(doc.where(key) + ": unknown parameter");
  }
  // Rate entries are resolved after operating points so labels map to final detunings.
  for (auto& rp : p.rate_table) rp.delta = operating_delta(p, rp.label);
  for (const auto& [key, entry] : doc.entries()) {
    if (key.rfind("rates.", 0) != 0) continue;
    auto dot = key.find('.', 6);
    if (dot == std::string::npos) throw ValidationError(doc.where(key) + ": expected rates.<point>.<rate>");
    std::string label = key.substr(6, dot - 6);
    std::string name = key.substr(dot + 1);
    double delta;
    try {
      delta = operating_delta(p, label);
    } catch (const ValidationError& e) {
      throw ValidationError(doc.where(key) + ": " + e.what());
    }
    RatePoint* target = nullptr;
    for (auto& rp : p.rate_table)
      if (rp.label == label) target = &rp;
    if (!target) {
      p.rate_table.push_back({label, delta, p.rates_at(delta)});
      target = &p.rate_table.back();
    }
    bool ok = false;
    for (const auto& rk : kRateKeys)
      if (name == rk.key) {
        target->rates.*(rk.field) = *doc.get_quantity(key);
        ok = true;
      }
    if (!ok) throw ValidationError(doc.where(key) + ": unknown rate '" + name + "'");
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ValidationError(doc.source() + ": " + e.what());
  }
  return p;
}

void check_paper_defaults(const SystemParams& params) {
  const SystemParams ref = SystemParams::paper_defaults();
  auto same = [](double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); };
  for (const auto& nk : kNumericKeys)
    if (!same(params.*(nk.field), ref.*(nk.field)))
      throw ValidationError(std::string("parameter '") + nk.key + "' differs from the preset value");
  for (const auto& r : ref.rate_table) {
    const RatePoint* found = nullptr;
    for (const auto& rp : params.rate_table)
      if (rp.label == r.label) found = &rp;
    if (!found) throw ValidationError("rate point '" + r.label + "' missing");
    for (const auto& rk : kRateKeys)
      if (!same(found->rates.*(rk.field), r.rates.*(rk.field)))
        throw ValidationError("rate 'rates." + r.label + "." + rk.key + "' differs from the preset value");
  }
}

std::string params_to_text(const SystemParams& params) {
  std::ostringstream os;
  os << std::setprecision(12);
  for (const auto& nk : kNumericKeys) os << nk.key << " = " << params.*(nk.field) << "\n";
  for (const auto& rp : params.rate_table)
    for (const auto& rk : kRateKeys)
      os << "rates." << rp.label << "." << rk.key << " = " << rp.rates.*(rk.field) << "\n";
  return os.str();
}

}  // namespace cqad
