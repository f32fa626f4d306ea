#include "cqad/experiment.hpp"

#include <cmath>
#include <set>
#include <sstream>

namespace cqad {

namespace {

struct KindName {
  ExperimentKind kind;
  const char* name;
};

constexpr KindName kKinds[] = {
    {ExperimentKind::spectroscopy, "spectroscopy"},   {ExperimentKind::ramsey_parity, "ramsey_parity"},
    {ExperimentKind::echo_parity, "echo_parity"},     {ExperimentKind::wigner, "wigner"},
    {ExperimentKind::fock_prep_check, "fock_prep_check"}, {ExperimentKind::t1, "t1"},
    {ExperimentKind::t2_ramsey, "t2_ramsey"},         {ExperimentKind::rabi_chevron, "rabi_chevron"},
    {ExperimentKind::chi_scan, "chi_scan"},
};

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

// Sweep axes each kind accepts; the flag marks required ones.
std::map<std::string, bool> kind_axes(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::spectroscopy: return {{"frequency", false}};
    case ExperimentKind::ramsey_parity:
    case ExperimentKind::echo_parity: return {{"time", false}};
    case ExperimentKind::wigner: return {{"re", true}, {"im", true}};
    case ExperimentKind::fock_prep_check: return {};
    case ExperimentKind::t1:
    case ExperimentKind::t2_ramsey: return {{"delay", true}};
    case ExperimentKind::rabi_chevron: return {{"detuning", true}, {"time", true}};
    case ExperimentKind::chi_scan: return {{"delta", false}};
  }
  return {};
}

std::set<std::string> kind_keys(ExperimentKind k) {
  std::set<std::string> keys{"kind", "phonon_dim", "noise", "ideal_pulses", "rtol", "repetitions"};
  const std::set<std::string> prep{"prep.target", "prep.fock_number", "prep.method",
                                   "prep.beta", "prep.beta_phase", "prep.custom"};
  auto add = [&](std::initializer_list<const char*> more) { keys.insert(more.begin(), more.end()); };
  switch (k) {
    case ExperimentKind::spectroscopy:
      keys.insert(prep.begin(), prep.end());
      add({"detuning", "probe.duration", "probe.amplitude", "peaks"});
      break;
    case ExperimentKind::ramsey_parity:
    case ExperimentKind::echo_parity:
      keys.insert(prep.begin(), prep.end());
      add({"averaging", "theta", "normalize"});
      break;
    case ExperimentKind::wigner:
      keys.insert(prep.begin(), prep.end());
      add({"variant", "averaging", "normalize"});
      break;
    case ExperimentKind::fock_prep_check: keys.insert(prep.begin(), prep.end()); break;
    case ExperimentKind::t1:
    case ExperimentKind::t2_ramsey: add({"subject", "artificial_detuning"}); break;
    case ExperimentKind::rabi_chevron: break;
    case ExperimentKind::chi_scan: add({"n_max"}); break;
  }
  for (const auto& [axis, required] : kind_axes(k)) keys.insert("sweep." + axis);
  return keys;
}

double detuning_value(const KeyValueDocument& doc, const std::string& key, const SystemParams& params) {
  const std::string s = *doc.get_string(key);
  for (const auto& op : params.operating_points())
    if (op.label == s) return op.delta;
  return *doc.get_quantity(key);
}

template <class E>
E choose(const KeyValueDocument& doc, const std::string& key, std::initializer_list<std::pair<const char*, E>> opts,
         E fallback) {
  auto s = doc.get_string(key);
  if (!s) return fallback;
  std::string names;
  for (const auto& [name, value] : opts) {
    if (*s == name) return value;
    names += names.empty() ? name : std::string(", ") + name;
  }
  throw ValidationError(doc.where(key) + ": '" + *s + "' is not one of " + names);
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.name;
  return "?";
}

ExperimentKind parse_experiment_kind(const std::string& name) {
  for (const auto& k : kKinds)
    if (name == k.name) return k.kind;
  std::string all;
  for (const auto& k : kKinds) all += (all.empty() ? "" : ", ") + std::string(k.name);
  throw ValidationError("unsupported experiment kind '" + name + "' (expected one of " + all + ")");
}

const std::vector<double>* ExperimentSpec::axis(const std::string& name) const {
  auto it = sweep.find(name);
  return it == sweep.end() ? nullptr : &it->second;
}

std::vector<double> parse_grid(const std::string& text) {
  const std::string s = trim(text);
  if (s.rfind("linspace(", 0) == 0) {
    if (s.back() != ')') throw std::invalid_argument("unterminated linspace(...)");
    std::stringstream ss(s.substr(9, s.size() - 10));
    std::string a, b, n;
    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, n))
      throw std::invalid_argument("linspace expects (start, stop, points)");
    const double lo = parse_quantity(a), hi = parse_quantity(b);
    size_t pos = 0;
    const int count = std::stoi(trim(n), &pos);
    if (pos != trim(n).size() || count < 1) throw std::invalid_argument("linspace point count must be a positive integer");
    std::vector<double> v;
    for (int i = 0; i < count; ++i) v.push_back(count == 1 ? lo : lo + (hi - lo) * i / (count - 1));
    return v;
  }
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) v.push_back(parse_quantity(item));
  if (v.empty()) throw std::invalid_argument("empty grid");
  return v;
}

ExperimentSpec load_experiment(const KeyValueDocument& doc, const SystemParams& params) {
  ExperimentSpec spec;
  spec.source = doc.source();
  auto kind = doc.get_string("kind");
  if (!kind) throw ValidationError(doc.source() + ": missing required field 'kind'");
  try {
    spec.kind = parse_experiment_kind(*kind);
  } catch (const ValidationError& e) {
    throw ValidationError(doc.where("kind") + ": " + e.what());
  }

  const auto allowed = kind_keys(spec.kind);
  for (const auto& [key, entry] : doc.entries())
    if (!allowed.count(key)) throw ValidationError(doc.where(key) + ": not used by kind '" + *kind + "'");

  auto integer = [&](const std::string& key, int lo, int fallback) {
    auto v = doc.get_integer(key);
    if (!v) return fallback;
    if (*v < lo) throw ValidationError(doc.where(key) + ": must be >= " + std::to_string(lo));
    return static_cast<int>(*v);
  };
  auto positive = [&](const std::string& key, double fallback) {
    auto v = doc.get_quantity(key);
    if (!v) return fallback;
    if (!(*v > 0)) throw ValidationError(doc.where(key) + ": must be positive");
    return *v;
  };

  spec.phonon_dim = integer("phonon_dim", 2, spec.phonon_dim);
  spec.repetitions = integer("repetitions", 1, 1);
  spec.paper_noise = choose<bool>(doc, "noise", {{"paper", true}, {"none", false}}, true);
  spec.ideal_pulses = doc.get_bool("ideal_pulses").value_or(false);
  spec.rtol = positive("rtol", spec.rtol);
  if (doc.has("detuning")) spec.detuning = detuning_value(doc, "detuning", params);
  spec.averaging = choose<PhaseAveraging>(
      doc, "averaging",
      {{"single", PhaseAveraging::single}, {"two_phase", PhaseAveraging::two_phase}, {"four_phase", PhaseAveraging::four_phase}},
      PhaseAveraging::four_phase);
  spec.theta = doc.get_quantity("theta").value_or(0.0);
  spec.normalize = doc.get_bool("normalize").value_or(true);
  spec.wigner_variant =
      choose<ParityVariant>(doc, "variant", {{"echo", ParityVariant::echo}, {"ramsey", ParityVariant::ramsey}},
                            ParityVariant::echo);
  spec.probe_duration = positive("probe.duration", spec.probe_duration);
  spec.probe_amplitude = positive("probe.amplitude", spec.probe_amplitude);
  spec.peaks = integer("peaks", 0, 0);
  spec.subject = choose<std::string>(doc, "subject", {{"qubit", "qubit"}, {"phonon", "phonon"}}, "qubit");
  spec.artificial_detuning = doc.get_quantity("artificial_detuning").value_or(spec.artificial_detuning);
  spec.n_max = integer("n_max", 0, spec.n_max);

  auto& prep = spec.preparation;
  prep.target = choose<PrepTarget>(doc, "prep.target",
                                   {{"vacuum", PrepTarget::vacuum},
                                    {"fock", PrepTarget::fock},
                                    {"coherent", PrepTarget::coherent},
                                    {"superposition_01", PrepTarget::superposition_01},
                                    {"custom", PrepTarget::custom}},
                                   PrepTarget::vacuum);
  prep.method = choose<PrepMethod>(doc, "prep.method",
                                   {{"ideal_injection", PrepMethod::ideal_injection},
                                    {"swap_sequence", PrepMethod::swap_sequence},
                                    {"displacement_drive", PrepMethod::displacement_drive}},
                                   PrepMethod::ideal_injection);
  if (prep.target == PrepTarget::fock) {
    if (!doc.has("prep.fock_number")) throw ValidationError(doc.where("prep.target") + ": fock target needs prep.fock_number");
    prep.fock_number = integer("prep.fock_number", 0, 0);
  } else if (doc.has("prep.fock_number")) {
    throw ValidationError(doc.where("prep.fock_number") + ": only valid with prep.target = fock");
  }
  if (prep.target == PrepTarget::coherent) {
    if (!doc.has("prep.beta")) throw ValidationError(doc.where("prep.target") + ": coherent target needs prep.beta");
    prep.beta = std::polar(*doc.get_quantity("prep.beta"), doc.get_quantity("prep.beta_phase").value_or(0.0));
  } else if (doc.has("prep.beta") || doc.has("prep.beta_phase")) {
    throw ValidationError(doc.where(doc.has("prep.beta") ? "prep.beta" : "prep.beta_phase") +
                          ": only valid with prep.target = coherent");
  }
  if (prep.target == PrepTarget::custom) {
    auto amps = doc.get_quantity_list("prep.custom");
    if (!amps) throw ValidationError(doc.where("prep.target") + ": custom target needs prep.custom");
    if (static_cast<int>(amps->size()) != spec.phonon_dim)
      throw ValidationError(doc.where("prep.custom") + ": needs phonon_dim = " + std::to_string(spec.phonon_dim) + " amplitudes");
    prep.custom = CVector::Zero(spec.phonon_dim);
    for (int i = 0; i < spec.phonon_dim; ++i) prep.custom[i] = (*amps)[i];
  } else if (doc.has("prep.custom")) {
    throw ValidationError(doc.where("prep.custom") + ": only valid with prep.target = custom");
  }
  try {
    prep.validate();
  } catch (const std::exception& e) {
    throw ValidationError(doc.where(doc.has("prep.method") ? "prep.method" : "prep.target") + ": " + e.what());
  }

  for (const auto& [axis, required] : kind_axes(spec.kind)) {
    const std::string key = "sweep." + axis;
    if (!doc.has(key)) {
      if (required) throw ValidationError(doc.source() + ": missing required field '" + key + "' for kind '" + *kind + "'");
      continue;
    }
    try {
      spec.sweep[axis] = parse_grid(*doc.get_string(key));
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw ValidationError(doc.where(key) + ": " + e.what());
    }
  }
  if (spec.kind == ExperimentKind::t1 || spec.kind == ExperimentKind::t2_ramsey) {
    const auto& d = spec.sweep.at("delay");
    if (d.size() < 8) throw ValidationError(doc.where("sweep.delay") + ": needs at least 8 delays");
    for (size_t i = 0; i < d.size(); ++i)
      if (d[i] < 0 || (i > 0 && d[i] <= d[i - 1]))
        throw ValidationError(doc.where("sweep.delay") + ": delays must be non-negative and increasing");
  }
  if (auto* t = spec.axis("time"); t && spec.kind != ExperimentKind::rabi_chevron)
    for (double x : *t)
      if (!(x > 0)) throw ValidationError(doc.where("sweep.time") + ": times must be positive");
  if (auto* f = spec.axis("frequency"))
    for (size_t i = 1; i < f->size(); ++i)
      if (!((*f)[i] > (*f)[i - 1])) throw ValidationError(doc.where("sweep.frequency") + ": must be increasing");
  return spec;
}

SequenceSettings experiment_settings(const ExperimentSpec& spec, const SystemParams& params, int jobs) {
  SequenceSettings s;
  s.params = params;
  s.config = HilbertConfig(2, {spec.phonon_dim});
  s.noise = spec.paper_noise ? paper_noise(params, params.delta_ramsey) : NoiseModel::none();
  s.ideal_pulses = spec.ideal_pulses;
  s.evolve.rtol = spec.rtol;
  s.evolve.atol = spec.rtol * 1e-2;
  s.jobs = jobs;
  return s;
}

}  // namespace cqad
