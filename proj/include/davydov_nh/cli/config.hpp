#pragma once

// Experiment configuration: YAML with sections preset / model / integrator /
// sweep / spectrum / output. A preset fills every field; the file overrides
// individual keys. Unknown keys are errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <type_traits>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "davydov_nh/errors.hpp"
#include "davydov_nh/models.hpp"
#include "davydov_nh/presets.hpp"
#include "davydov_nh/tdvp.hpp"

namespace davydov_nh::cli {

enum class Preset { NlzSpectrum, NlzSingleMode, NlzBath, JcMultimode, HtcLoss, Custom };
enum class ModelKind { Nlz, Jc, Htc };

inline std::string to_string(Preset p) {
  switch (p) {
    case Preset::NlzSpectrum: return "nlz-spectrum";
    case Preset::NlzSingleMode: return "nlz-single-mode";
    case Preset::NlzBath: return "nlz-bath";
    case Preset::JcMultimode: return "jc-multimode";
    case Preset::HtcLoss: return "htc-loss";
    case Preset::Custom: return "custom";
  }
  return "custom";
}

inline Preset parse_preset(const std::string& name) {
  for (Preset p : {Preset::NlzSpectrum, Preset::NlzSingleMode, Preset::NlzBath, Preset::JcMultimode,
                   Preset::HtcLoss, Preset::Custom}) {
    if (to_string(p) == name) return p;
  }
  throw ConfigError("preset: unknown preset '" + name + "'");
}

inline std::string to_string(ModelKind k) {
  switch (k) {
    case ModelKind::Nlz: return "nlz";
    case ModelKind::Jc: return "jc";
    case ModelKind::Htc: return "htc";
  }
  return "nlz";
}

inline ModelKind parse_kind(const std::string& name) {
  for (ModelKind k : {ModelKind::Nlz, ModelKind::Jc, ModelKind::Htc}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("model.kind: expected nlz, jc or htc, got '" + name + "'");
}

// Each parameter block lists its fields once; parsing, emission and sweeps all
// go through fields().

struct NlzParams {
  double sweep_velocity = 0.5;
  double tunneling = 0.5;
  double g = 0.0;
  std::string bath = "single";  // single | ohmic
  double mode_frequency = 10.0;
  double mode_coupling = 0.2;
  double alpha = 0.002;
  double cutoff = 10.0;
  double omega_max = 40.0;
  int n_modes = 60;

  template <class Self, class F>
  static void fields(Self& p, F&& f) {
    f("sweep_velocity", p.sweep_velocity);
    f("tunneling", p.tunneling);
    f("g", p.g);
    f("bath", p.bath);
    f("mode_frequency", p.mode_frequency);
    f("mode_coupling", p.mode_coupling);
    f("alpha", p.alpha);
    f("cutoff", p.cutoff);
    f("omega_max", p.omega_max);
    f("n_modes", p.n_modes);
  }
};

struct JcParams {
  double qubit_frequency = 1.0;
  double qubit_decay = 1e-2;
  std::vector<double> mode_frequencies{1.0, 1.2, 1.3};
  std::vector<double> couplings{0.2, 0.2, 0.2};
  double kappa_ratio = 1.0;  // kappa_k = kappa_ratio * qubit_decay

  template <class Self, class F>
  static void fields(Self& p, F&& f) {
    f("qubit_frequency", p.qubit_frequency);
    f("qubit_decay", p.qubit_decay);
    f("mode_frequencies", p.mode_frequencies);
    f("couplings", p.couplings);
    f("kappa_ratio", p.kappa_ratio);
  }
};

struct HtcParams {
  double cavity_frequency = 1.0;
  double qubit_frequency = 1.0;
  double rabi_coupling = 0.1;
  int n_qubits = 10;
  double phonon_coupling = 0.1;
  double phonon_center = 0.1;
  double bandwidth = 0.5;
  double cavity_loss = 0.0;

  template <class Self, class F>
  static void fields(Self& p, F&& f) {
    f("cavity_frequency", p.cavity_frequency);
    f("qubit_frequency", p.qubit_frequency);
    f("rabi_coupling", p.rabi_coupling);
    f("n_qubits", p.n_qubits);
    f("phonon_coupling", p.phonon_coupling);
    f("phonon_center", p.phonon_center);
    f("bandwidth", p.bandwidth);
    f("cavity_loss", p.cavity_loss);
  }
};

struct IntegratorParams {
  int multiplicity = 3;
  double dt = 0.0;
  double t_start = 0.0;
  double t_end = 1.0;
  int sample_stride = 1;
  double svd_cutoff = kDefaultSvdCutoff;
  std::string regularization = "filter";  // filter | truncate
  double energy_shift = 0.0;
  double max_step_change = 0.01;
  int max_step_retries = 8;
  double noise_radius = kDefaultNoiseRadius;
  std::uint64_t seed = 7;
  int n_max = 20;  // Fock truncation of the exact reference

  template <class Self, class F>
  static void fields(Self& p, F&& f) {
    f("multiplicity", p.multiplicity);
    f("dt", p.dt);
    f("t_start", p.t_start);
    f("t_end", p.t_end);
    f("sample_stride", p.sample_stride);
    f("svd_cutoff", p.svd_cutoff);
    f("regularization", p.regularization);
    f("energy_shift", p.energy_shift);
    f("max_step_change", p.max_step_change);
    f("max_step_retries", p.max_step_retries);
    f("noise_radius", p.noise_radius);
    f("seed", p.seed);
    f("n_max", p.n_max);
  }

  static IntegratorParams from(const IntegratorConfig& c, int multiplicity) {
    IntegratorParams p;
    p.multiplicity = multiplicity;
    p.dt = c.dt;
    p.t_start = c.t_start;
    p.t_end = c.t_end;
    p.sample_stride = static_cast<int>(c.sample_stride);
    p.svd_cutoff = c.svd_cutoff;
    p.regularization = c.regularization == Regularization::Filter ? "filter" : "truncate";
    p.energy_shift = c.energy_shift;
    p.max_step_change = c.max_step_change;
    p.max_step_retries = c.max_step_retries;
    return p;
  }

  IntegratorConfig to_config() const {
    IntegratorConfig c;
    c.dt = dt;
    c.t_start = t_start;
    c.t_end = t_end;
    c.sample_stride = sample_stride;
    c.svd_cutoff = svd_cutoff;
    if (regularization == "filter") {
      c.regularization = Regularization::Filter;
    } else if (regularization == "truncate") {
      c.regularization = Regularization::Truncate;
    } else {
      throw ConfigError("integrator.regularization: expected filter or truncate, got '" + regularization + "'");
    }
    c.energy_shift = energy_shift;
    c.max_step_change = max_step_change;
    c.max_step_retries = max_step_retries;
    c.seed = seed;
    return c;
  }
};

struct SweepParams {
  std::string parameter;
  std::vector<double> values;

  template <class Self, class F>
  static void fields(Self& p, F&& f) {
    f("parameter", p.parameter);
    f("values", p.values);
  }
};

/// Time grid of the nlz-spectrum preset.
struct SpectrumParams {
  double t_start = -10.0;
  double t_end = 10.0;
  int t_points = 201;

  template <class Self, class F>
  static void fields(Self& p, F&& f) {
    f("t_start", p.t_start);
    f("t_end", p.t_end);
    f("t_points", p.t_points);
  }

  std::vector<double> times() const {
    std::vector<double> t(static_cast<std::size_t>(t_points));
    for (int i = 0; i < t_points; ++i) {
      t[static_cast<std::size_t>(i)] =
          t_points == 1 ? t_start : t_start + (t_end - t_start) * i / static_cast<double>(t_points - 1);
    }
    return t;
  }
};

struct OutputParams {
  std::string directory = "out";
  bool compare = false;
  double tolerance = 1e-3;

  template <class Self, class F>
  static void fields(Self& p, F&& f) {
    f("directory", p.directory);
    f("compare", p.compare);
    f("tolerance", p.tolerance);
  }
};

struct ExperimentConfig {
  Preset preset = Preset::Custom;
  ModelKind kind = ModelKind::Nlz;
  NlzParams nlz;
  JcParams jc;
  HtcParams htc;
  IntegratorParams integrator;
  SweepParams sweep;
  SpectrumParams spectrum;
  OutputParams output;
};

inline ModelKind preset_kind(Preset p) {
  switch (p) {
    case Preset::JcMultimode: return ModelKind::Jc;
    case Preset::HtcLoss: return ModelKind::Htc;
    default: return ModelKind::Nlz;
  }
}

/// One-line description of the parameter set behind a preset.
inline std::string preset_description(Preset p) {
  switch (p) {
    case Preset::NlzSpectrum:
      return "non-Hermitian LZ, one mode (w = 10, lambda = 0.2), v = 0.5, Delta = 0.5: spectrum over g";
    case Preset::NlzSingleMode:
      return "non-Hermitian LZ, one mode (w = 10, lambda = 0.2), v = 0.5, Delta = 0.5, M = 3";
    case Preset::NlzBath:
      return "non-Hermitian LZ, Ohmic bath alpha = 0.002, w_c = 10, 60 modes, M = 5";
    case Preset::JcMultimode:
      return "JC, modes (1.0, 1.2, 1.3), g_k = 0.2, gamma = 0.01, kappa_k = ratio * gamma, M = 3";
    case Preset::HtcLoss:
      return "HTC, N = 10, w_R = 0.1 eV, w_c = w0 = 1 eV, Omega = 0.5, lambda = 0.1, w_k0 = 0.1 eV";
    case Preset::Custom: return "user-defined";
  }
  return "user-defined";
}

inline ExperimentConfig preset_config(Preset p) {
  ExperimentConfig c;
  c.preset = p;
  c.kind = preset_kind(p);
  switch (p) {
    case Preset::NlzSpectrum: {
      c.sweep.parameter = "g";
      for (int i = 0; i <= 50; ++i) c.sweep.values.push_back(0.05 * i);
      c.output.directory = "out/nlz-spectrum";
      break;
    }
    case Preset::NlzSingleMode: {
      const NlzModel m = presets::nlz_single_mode(0.0);
      c.integrator = IntegratorParams::from(presets::nlz_integrator(m), 3);
      c.integrator.sample_stride = 50;
      c.sweep = {"g", {0.5, 1.0, 1.5, 2.0, 2.5}};
      c.output.directory = "out/nlz-single-mode";
      break;
    }
    case Preset::NlzBath: {
      c.nlz.bath = "ohmic";
      const NlzModel m = presets::nlz_ohmic_bath(0.0);
      c.integrator = IntegratorParams::from(presets::nlz_bath_integrator(m), 5);
      c.sweep = {"g", {0.0, 0.5, 1.0, 1.5, 2.0, 2.5}};
      c.output.directory = "out/nlz-bath";
      break;
    }
    case Preset::JcMultimode: {
      c.integrator = IntegratorParams::from(presets::jc_integrator(), 3);
      c.integrator.sample_stride = 20;
      c.sweep = {"kappa_ratio", {1.0, 5.0}};
      c.output.directory = "out/jc-multimode";
      break;
    }
    case Preset::HtcLoss: {
      c.integrator = IntegratorParams::from(presets::htc_integrator(presets::htc_loss(0.0)), 3);
      c.integrator.sample_stride = 4;
      c.sweep = {"cavity_loss", {0.0, 0.002, 0.004, 0.006}};
      c.output.directory = "out/htc-loss";
      break;
    }
    case Preset::Custom: break;
  }
  return c;
}

namespace detail {

template <class T>
T read_as(const YAML::Node& node, const std::string& key) {
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(key + ": cannot read value '" + YAML::Dump(node) + "'");
  }
}

template <class T>
void assign(T& field, const YAML::Node& node, const std::string& key) {
  if constexpr (std::is_same_v<T, std::vector<double>>) {
    if (!node.IsSequence()) throw ConfigError(key + ": expected a list");
    field.clear();
    for (const auto& item : node) field.push_back(read_as<double>(item, key));
    for (double v : field) {
      if (!std::isfinite(v)) throw ConfigError(key + ": values must be finite");
    }
  } else {
    if (!node.IsScalar()) throw ConfigError(key + ": expected a scalar");
    field = read_as<T>(node, key);
    if constexpr (std::is_same_v<T, double>) {
      if (!std::isfinite(field)) throw ConfigError(key + ": value must be finite");
    }
  }
}

template <class P>
void parse_section(const YAML::Node& node, const std::string& section, P& params,
                   const std::vector<std::string>& skip = {}) {
  if (!node.IsMap()) throw ConfigError(section + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::find(skip.begin(), skip.end(), key) != skip.end()) continue;
    bool found = false;
    P::fields(params, [&](const char* name, auto& field) {
      if (key == name) {
        found = true;
        assign(field, kv.second, section + "." + key);
      }
    });
    if (!found) throw ConfigError("unknown key " + section + "." + key);
  }
}

template <class T>
void emit_value(YAML::Emitter& out, const T& v) {
  if constexpr (std::is_same_v<T, std::vector<double>>) {
    out << YAML::Flow << YAML::BeginSeq;
    for (double x : v) out << x;
    out << YAML::EndSeq;
  } else {
    out << v;
  }
}

template <class P>
void emit_section(YAML::Emitter& out, const char* section, const P& params,
                  const std::optional<std::string>& kind = std::nullopt) {
  out << YAML::Key << section << YAML::Value << YAML::BeginMap;
  if (kind) out << YAML::Key << "kind" << YAML::Value << *kind;
  P::fields(params, [&](const char* name, const auto& field) {
    out << YAML::Key << name << YAML::Value;
    emit_value(out, field);
  });
  out << YAML::EndMap;
}

template <class P>
bool set_numeric(P& params, const std::string& name, double value) {
  bool found = false;
  P::fields(params, [&](const char* n, auto& field) {
    using T = std::decay_t<decltype(field)>;
    if (name != n) return;
    if constexpr (std::is_same_v<T, double>) {
      field = value;
      found = true;
    } else if constexpr (std::is_same_v<T, int>) {
      if (std::floor(value) != value) throw ConfigError("sweep.values: '" + name + "' takes integers");
      field = static_cast<int>(value);
      found = true;
    }
  });
  return found;
}

}  // namespace detail

/// Model with the sweep parameter set to `value`.
inline ModelSpec build_model(const ExperimentConfig& c, std::optional<double> value = std::nullopt) {
  ExperimentConfig k = c;
  if (value) {
    bool ok = false;
    switch (k.kind) {
      case ModelKind::Nlz: ok = detail::set_numeric(k.nlz, k.sweep.parameter, *value); break;
      case ModelKind::Jc: ok = detail::set_numeric(k.jc, k.sweep.parameter, *value); break;
      case ModelKind::Htc: ok = detail::set_numeric(k.htc, k.sweep.parameter, *value); break;
    }
    if (!ok) {
      throw ConfigError("sweep.parameter: '" + k.sweep.parameter + "' is not a numeric " +
                        to_string(k.kind) + " model parameter");
    }
  }
  switch (k.kind) {
    case ModelKind::Nlz: {
      NlzModel m;
      m.sweep_velocity = k.nlz.sweep_velocity;
      m.tunneling = k.nlz.tunneling;
      m.non_hermiticity = k.nlz.g;
      if (k.nlz.bath == "single") {
        m.bath = single_mode_bath(k.nlz.mode_frequency, k.nlz.mode_coupling);
      } else if (k.nlz.bath == "ohmic") {
        m.bath = discretize_ohmic_bath(k.nlz.alpha, k.nlz.cutoff, k.nlz.n_modes, k.nlz.omega_max);
      } else {
        throw ConfigError("model.bath: expected single or ohmic, got '" + k.nlz.bath + "'");
      }
      return m;
    }
    case ModelKind::Jc: {
      const auto nb = static_cast<Index>(k.jc.mode_frequencies.size());
      if (static_cast<Index>(k.jc.couplings.size()) != nb) {
        throw ConfigError("model.couplings: length must match model.mode_frequencies");
      }
      JcModel m;
      m.qubit_frequency = k.jc.qubit_frequency;
      m.qubit_decay = k.jc.qubit_decay;
      m.mode_frequencies = Eigen::Map<const Eigen::VectorXd>(k.jc.mode_frequencies.data(), nb);
      m.couplings = Eigen::Map<const Eigen::VectorXd>(k.jc.couplings.data(), nb);
      m.mode_decays = Eigen::VectorXd::Constant(nb, k.jc.kappa_ratio * k.jc.qubit_decay);
      return m;
    }
    case ModelKind::Htc: {
      HtcModel m;
      m.cavity_frequency = k.htc.cavity_frequency;
      m.qubit_frequency = k.htc.qubit_frequency;
      m.rabi_coupling = k.htc.rabi_coupling;
      m.n_qubits = k.htc.n_qubits;
      m.phonon_coupling = k.htc.phonon_coupling;
      m.phonon_center = k.htc.phonon_center;
      m.bandwidth = k.htc.bandwidth;
      m.cavity_loss = k.htc.cavity_loss;
      return m;
    }
  }
  throw ConfigError("model.kind: unsupported");
}

/// Checks everything that can be checked before running.
inline void validate(const ExperimentConfig& c) {
  const IntegratorParams& ip = c.integrator;
  if (ip.multiplicity < 1) throw ConfigError("integrator.multiplicity must be >= 1");
  if (!(ip.noise_radius >= 0.0)) throw ConfigError("integrator.noise_radius must be >= 0");
  if (ip.n_max < 1) throw ConfigError("integrator.n_max must be >= 1");
  ip.to_config().validate();

  if (c.sweep.parameter.empty()) throw ConfigError("sweep.parameter must be set");
  if (c.sweep.values.empty()) throw ConfigError("sweep.values must not be empty");
  std::vector<double> sorted = c.sweep.values;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    throw ConfigError("sweep.values must not repeat");
  }
  for (double v : c.sweep.values) {
    ModelSpec m;
    try {
      m = build_model(c, v);
      davydov_nh::validate(m);
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(std::string("model: ") + e.what());
    }
  }
  if (c.preset == Preset::NlzSpectrum) {
    if (c.kind != ModelKind::Nlz || c.nlz.bath != "single") {
      throw ConfigError("model.bath: the spectrum scan needs a single-mode NLZ model");
    }
    if (c.spectrum.t_points < 1) throw ConfigError("spectrum.t_points must be >= 1");
    if (!(c.spectrum.t_end >= c.spectrum.t_start)) throw ConfigError("spectrum.t_end must be >= spectrum.t_start");
  }
  if (c.output.directory.empty()) throw ConfigError("output.directory must not be empty");
  if (!(c.output.tolerance > 0.0)) throw ConfigError("output.tolerance must be positive");
}

inline ExperimentConfig parse_config(const YAML::Node& root) {
  if (!root.IsMap()) throw ConfigError("config: expected a mapping at the top level");
  for (const auto& kv : root) {
    const auto key = kv.first.as<std::string>();
    if (key != "preset" && key != "model" && key != "integrator" && key != "sweep" && key != "spectrum" &&
        key != "output") {
      throw ConfigError("unknown key " + key);
    }
  }
  if (!root["preset"]) throw ConfigError("preset: missing (use 'custom' with model.kind for a free model)");
  const Preset preset = parse_preset(detail::read_as<std::string>(root["preset"], "preset"));
  ExperimentConfig c = preset_config(preset);

  if (const YAML::Node model = root["model"]) {
    if (!model.IsMap()) throw ConfigError("model: expected a mapping");
    if (const YAML::Node kind = model["kind"]) {
      const ModelKind k = parse_kind(detail::read_as<std::string>(kind, "model.kind"));
      if (preset != Preset::Custom && k != c.kind) {
        throw ConfigError("model.kind: preset " + to_string(preset) + " uses a " + to_string(c.kind) + " model");
      }
      c.kind = k;
    } else if (preset == Preset::Custom) {
      throw ConfigError("model.kind: required for the custom preset");
    }
    switch (c.kind) {
      case ModelKind::Nlz: detail::parse_section(model, "model", c.nlz, {"kind"}); break;
      case ModelKind::Jc: detail::parse_section(model, "model", c.jc, {"kind"}); break;
      case ModelKind::Htc: detail::parse_section(model, "model", c.htc, {"kind"}); break;
    }
  } else if (preset == Preset::Custom) {
    throw ConfigError("model: required for the custom preset");
  }
  if (const YAML::Node n = root["integrator"]) detail::parse_section(n, "integrator", c.integrator);
  if (const YAML::Node n = root["sweep"]) detail::parse_section(n, "sweep", c.sweep);
  if (const YAML::Node n = root["spectrum"]) {
    if (preset != Preset::NlzSpectrum) throw ConfigError("spectrum: only used by the nlz-spectrum preset");
    detail::parse_section(n, "spectrum", c.spectrum);
  }
  if (const YAML::Node n = root["output"]) detail::parse_section(n, "output", c.output);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  try {
    return parse_config(YAML::Load(text));
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw ConfigError("config: cannot read " + path.string());
  } catch (const YAML::Exception& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  return parse_config(root);
}

/// Fully resolved config; parsing it back gives the same experiment.
inline std::string emit_config(const ExperimentConfig& c) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  out << YAML::Key << "preset" << YAML::Value << to_string(c.preset);
  switch (c.kind) {
    case ModelKind::Nlz: detail::emit_section(out, "model", c.nlz, to_string(c.kind)); break;
    case ModelKind::Jc: detail::emit_section(out, "model", c.jc, to_string(c.kind)); break;
    case ModelKind::Htc: detail::emit_section(out, "model", c.htc, to_string(c.kind)); break;
  }
  detail::emit_section(out, "integrator", c.integrator);
  detail::emit_section(out, "sweep", c.sweep);
  if (c.preset == Preset::NlzSpectrum) detail::emit_section(out, "spectrum", c.spectrum);
  detail::emit_section(out, "output", c.output);
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace davydov_nh::cli
