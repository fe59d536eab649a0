#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kdgp/geometry.hpp"
#include "kdgp/kernel.hpp"
#include "kdgp/network.hpp"

namespace kdgp {

enum class ExperimentKind { kConsensusBench, kStationary, kDynamic, kKernelApprox };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kConsensusBench: return "consensus-bench";
    case ExperimentKind::kStationary: return "stationary";
    case ExperimentKind::kDynamic: return "dynamic";
    case ExperimentKind::kKernelApprox: return "kernel-approx";
  }
  throw std::invalid_argument("unknown experiment kind");
}

inline ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "consensus-bench") return ExperimentKind::kConsensusBench;
  if (s == "stationary") return ExperimentKind::kStationary;
  if (s == "dynamic") return ExperimentKind::kDynamic;
  if (s == "kernel-approx") return ExperimentKind::kKernelApprox;
  throw std::invalid_argument("unknown experiment kind: " + s);
}

/// Everything an experiment run depends on. Flat and JSON-addressable; the
/// CLI can override any key. Zero-valued d_comm/gamma mean "derive":
/// d_comm from the target mean degree, gamma as 1/(deg_max + 1).
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kStationary;

  int R = 50;
  int E = 100;
  int K_max = 10;
  int T_max = 30;
  double theta_th = 0.01;
  bool flag_dynamic = false;
  double gamma = 0.0;

  LinkModel link;

  double d_comm = 0.0;
  double target_degree = 6.0;
  Rect domain{0.0, 1.0, 0.0, 1.0};
  int grid_nx = 50;
  int grid_ny = 50;

  KernelHyperparams hp{4.0, 0.2, 0.1, 3600.0};
  double delta_k = 0.0;
  double margin = 1.2;
  SpectralForm spectral_form = SpectralForm::kStandard2d;

  int trials = 20;
  std::uint64_t seed = 1;
  std::string out_dir = "out";

  // ground-truth generation
  std::string field_sampler = "basis";  ///< "basis" | "dense"
  int field_E = 400;
  double field_scale = 1.0;
  double pde_time_per_step = 0.25;
  Vec2 source_location{6.0, 6.0};

  // kernel-approximation study
  std::vector<int> kernel_E_list{80, 400};
  int kernel_grid_n = 50;

  // "iterations to consensus" rule: window consecutive changes below tol
  int consensus_window = 3;
  double consensus_tol = 0.01;
  int bench_iters = 0;  ///< 0: use T_max

  bool save_grids = false;
  bool export_topology = true;

  double derived_d_comm() const {
    if (d_comm > 0.0) return d_comm;
    const double area = domain.width() * domain.height();
    return std::sqrt(target_degree * area / (std::numbers::pi * std::max(1, R - 1)));
  }

  void validate() const {
    if (R < 1 || E < 1 || K_max < 1 || T_max < 0 || trials < 1 || grid_nx < 2 || grid_ny < 2)
      throw std::invalid_argument("ExperimentConfig: counts must be positive");
    if (!(theta_th > 0.0)) throw std::invalid_argument("ExperimentConfig: theta_th must be > 0");
    if (!(margin >= 1.0)) throw std::invalid_argument("ExperimentConfig: margin must be >= 1");
    if (consensus_window < 1 || !(consensus_tol > 0.0))
      throw std::invalid_argument("ExperimentConfig: bad consensus rule parameters");
    hp.validate();
    link.validate();
  }
};

/// Per-kind defaults matching the desk-scale experiments.
inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  switch (kind) {
    case ExperimentKind::kConsensusBench:
      cfg.R = 30;
      cfg.E = 50;
      cfg.T_max = 100;
      cfg.trials = 100;
      cfg.link.p = 0.3;
      break;
    case ExperimentKind::kStationary:
      break;  // struct defaults are the stationary desk scale
    case ExperimentKind::kDynamic:
      cfg.K_max = 40;
      cfg.trials = 10;
      cfg.flag_dynamic = true;
      cfg.domain = {0.0, 10.0, 0.0, 10.0};
      cfg.hp = {4.0, 1.0, 0.05, 3600.0};
      cfg.delta_k = 25.0;
      cfg.field_scale = 2900.0;
      break;
    case ExperimentKind::kKernelApprox:
      cfg.trials = 1;
      cfg.hp = {4.0, 0.07, 0.1, 3600.0};
      break;
  }
  return cfg;
}

inline std::string to_string(SpectralForm f) {
  return f == SpectralForm::kPaper ? "paper" : "standard_2d";
}

inline SpectralForm spectral_form_from_string(const std::string& s) {
  if (s == "paper") return SpectralForm::kPaper;
  if (s == "standard_2d") return SpectralForm::kStandard2d;
  throw std::invalid_argument("unknown spectral_form: " + s);
}

inline std::string to_string(LinkModel::Variant v) {
  switch (v) {
    case LinkModel::Variant::kSync: return "sync";
    case LinkModel::Variant::kAsync: return "async";
    case LinkModel::Variant::kPacketLoss: return "packet_loss";
  }
  throw std::invalid_argument("unknown link model");
}

inline LinkModel::Variant link_variant_from_string(const std::string& s) {
  if (s == "sync") return LinkModel::Variant::kSync;
  if (s == "async") return LinkModel::Variant::kAsync;
  if (s == "packet_loss") return LinkModel::Variant::kPacketLoss;
  throw std::invalid_argument("unknown link model: " + s);
}

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(c.kind);
  j["R"] = c.R;
  j["E"] = c.E;
  j["K_max"] = c.K_max;
  j["T_max"] = c.T_max;
  j["theta_th"] = c.theta_th;
  j["flag_dynamic"] = c.flag_dynamic;
  j["gamma"] = c.gamma;
  j["link_model"] = to_string(c.link.variant);
  j["link_p"] = c.link.p;
  j["lossy_fraction"] = c.link.lossy_fraction;
  j["d_comm"] = c.d_comm;
  j["target_degree"] = c.target_degree;
  j["domain"] = {c.domain.xmin, c.domain.xmax, c.domain.ymin, c.domain.ymax};
  j["grid_nx"] = c.grid_nx;
  j["grid_ny"] = c.grid_ny;
  j["sigma_s"] = c.hp.sigma_s;
  j["l"] = c.hp.l;
  j["sigma_n"] = c.hp.sigma_n;
  j["l_k"] = c.hp.l_k;
  j["delta_k"] = c.delta_k;
  j["margin"] = c.margin;
  j["spectral_form"] = to_string(c.spectral_form);
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["field_sampler"] = c.field_sampler;
  j["field_E"] = c.field_E;
  j["field_scale"] = c.field_scale;
  j["pde_time_per_step"] = c.pde_time_per_step;
  j["source_location"] = {c.source_location.x(), c.source_location.y()};
  j["kernel_E_list"] = c.kernel_E_list;
  j["kernel_grid_n"] = c.kernel_grid_n;
  j["consensus_window"] = c.consensus_window;
  j["consensus_tol"] = c.consensus_tol;
  j["bench_iters"] = c.bench_iters;
  j["save_grids"] = c.save_grids;
  j["export_topology"] = c.export_topology;
  return j;
}

/// Applies one "key = json value" override onto a config; unknown keys raise.
inline void apply_config_key(ExperimentConfig& c, const std::string& key,
                             const nlohmann::json& v) {
  if (key == "kind") c.kind = experiment_kind_from_string(v.get<std::string>());
  else if (key == "R") c.R = v.get<int>();
  else if (key == "E") c.E = v.get<int>();
  else if (key == "K_max") c.K_max = v.get<int>();
  else if (key == "T_max") c.T_max = v.get<int>();
  else if (key == "theta_th") c.theta_th = v.get<double>();
  else if (key == "flag_dynamic") c.flag_dynamic = v.get<bool>();
  else if (key == "gamma") c.gamma = v.get<double>();
  else if (key == "link_model") c.link.variant = link_variant_from_string(v.get<std::string>());
  else if (key == "link_p") c.link.p = v.get<double>();
  else if (key == "lossy_fraction") c.link.lossy_fraction = v.get<double>();
  else if (key == "d_comm") c.d_comm = v.get<double>();
  else if (key == "target_degree") c.target_degree = v.get<double>();
  else if (key == "domain") {
    const auto a = v.get<std::vector<double>>();
    if (a.size() != 4) throw std::invalid_argument("domain: expected [xmin, xmax, ymin, ymax]");
    c.domain = {a[0], a[1], a[2], a[3]};
  } else if (key == "grid_nx") c.grid_nx = v.get<int>();
  else if (key == "grid_ny") c.grid_ny = v.get<int>();
  else if (key == "sigma_s") c.hp.sigma_s = v.get<double>();
  else if (key == "l") c.hp.l = v.get<double>();
  else if (key == "sigma_n") c.hp.sigma_n = v.get<double>();
  else if (key == "l_k") c.hp.l_k = v.get<double>();
  else if (key == "delta_k") c.delta_k = v.get<double>();
  else if (key == "margin") c.margin = v.get<double>();
  else if (key == "spectral_form") c.spectral_form = spectral_form_from_string(v.get<std::string>());
  else if (key == "trials") c.trials = v.get<int>();
  else if (key == "seed") c.seed = v.get<std::uint64_t>();
  else if (key == "out_dir") c.out_dir = v.get<std::string>();
  else if (key == "field_sampler") c.field_sampler = v.get<std::string>();
  else if (key == "field_E") c.field_E = v.get<int>();
  else if (key == "field_scale") c.field_scale = v.get<double>();
  else if (key == "pde_time_per_step") c.pde_time_per_step = v.get<double>();
  else if (key == "source_location") {
    const auto a = v.get<std::vector<double>>();
    if (a.size() != 2) throw std::invalid_argument("source_location: expected [x, y]");
    c.source_location = {a[0], a[1]};
  } else if (key == "kernel_E_list") c.kernel_E_list = v.get<std::vector<int>>();
  else if (key == "kernel_grid_n") c.kernel_grid_n = v.get<int>();
  else if (key == "consensus_window") c.consensus_window = v.get<int>();
  else if (key == "consensus_tol") c.consensus_tol = v.get<double>();
  else if (key == "bench_iters") c.bench_iters = v.get<int>();
  else if (key == "save_grids") c.save_grids = v.get<bool>();
  else if (key == "export_topology") c.export_topology = v.get<bool>();
  else throw std::invalid_argument("unknown config key: " + key);
}

/// Loads a flat JSON object on top of per-kind defaults. The file's own
/// "kind" (if present) selects the defaults first.
inline ExperimentConfig config_from_json(const nlohmann::json& j,
                                         ExperimentKind fallback_kind) {
  ExperimentKind kind = fallback_kind;
  if (j.contains("kind")) kind = experiment_kind_from_string(j["kind"].get<std::string>());
  ExperimentConfig c = default_config(kind);
  for (const auto& [key, value] : j.items()) apply_config_key(c, key, value);
  return c;
}

}  // namespace kdgp
