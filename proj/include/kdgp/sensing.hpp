#pragma once

#include <random>
#include <vector>

#include "kdgp/field.hpp"
#include "kdgp/filter.hpp"
#include "kdgp/madgp.hpp"
#include "kdgp/maxplus.hpp"
#include "kdgp/network.hpp"

namespace kdgp {

/// Loop controls of one sensing step.
struct SensingParams {
  int t_max = 30;
  double theta_th = 0.01;
  bool flag_dynamic = false;
  double delta_k = 0.0;
};

struct SensingStepResult {
  std::vector<PosteriorState> states;
  std::vector<SharedMessage> messages;  ///< final per-sensor consensus matrices
  std::vector<double> measurements;
  std::vector<int> iterations;  ///< consensus iterations each sensor ran
};

/// One K-DGP sensing step with the measurements already taken. Sensors build
/// their intrinsic-column messages, then run dual-extrema consensus rounds in
/// lock step, each following its own while (t <= T_max and Theta >= theta_th)
/// loop; a sensor that exits stops transmitting and updating for the rest of
/// the step. Afterwards each sensor applies prediction+update (dynamic) or
/// update only.
inline SensingStepResult run_sensing_step_with_measurements(
    const std::vector<PosteriorState>& states, const std::vector<Vec2>& positions,
    const NetworkGraph& net, const LinkModel& link,
    const std::vector<std::uint8_t>& lossy_mask, const SensingParams& params,
    const KernelHyperparams& hp, const BasisSet& basis, const DomainMap& map,
    const std::vector<double>& measurements, std::mt19937_64& rng) {
  const int R = net.R;
  SensingStepResult result;
  result.measurements = measurements;
  result.messages.reserve(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r)
    result.messages.push_back(build_local_message(
        r + 1, R, map.to_centered(positions[static_cast<std::size_t>(r)]),
        measurements[static_cast<std::size_t>(r)], basis));

  std::vector<char> active(static_cast<std::size_t>(R), 1);
  result.iterations.assign(static_cast<std::size_t>(R), 0);
  int t = 0;
  bool any_active = true;
  while (any_active && t <= params.t_max) {
    DeliveryPlan plan = effective_links(net, link, basis.E + 1, rng, lossy_mask);
    // quiet senders drop out of the plan; stopped receivers ignore their inbox
    std::erase_if(plan, [&](const Delivery& d) {
      return !active[static_cast<std::size_t>(d.src)] || !active[static_cast<std::size_t>(d.dst)];
    });
    const auto inboxes = exchange_messages(result.messages, plan);

    any_active = false;
    std::vector<SharedMessage> next = result.messages;
    for (int r = 0; r < R; ++r) {
      if (!active[static_cast<std::size_t>(r)]) continue;
      next[static_cast<std::size_t>(r)] = maxplus::dual_extrema_step(
          result.messages[static_cast<std::size_t>(r)], inboxes[static_cast<std::size_t>(r)]);
      const bool settled = maxplus::consensus_converged(
          result.messages[static_cast<std::size_t>(r)].matrix,
          next[static_cast<std::size_t>(r)].matrix, params.theta_th);
      result.iterations[static_cast<std::size_t>(r)] = t + 1;
      if (settled)
        active[static_cast<std::size_t>(r)] = 0;
      else
        any_active = true;
    }
    result.messages = std::move(next);
    ++t;
  }

  result.states.reserve(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) {
    const AssembledMeasurement meas = split_message(result.messages[static_cast<std::size_t>(r)]);
    PosteriorState s = states[static_cast<std::size_t>(r)];
    if (params.flag_dynamic) s = kdgp_predict(s, params.delta_k, hp);
    result.states.push_back(kdgp_update(s, meas, hp));
  }
  return result;
}

/// Full sensing step: sensors measure the truth field, then proceed as
/// above.
inline SensingStepResult run_sensing_step(
    const std::vector<PosteriorState>& states, const std::vector<Vec2>& positions,
    const NetworkGraph& net, const LinkModel& link,
    const std::vector<std::uint8_t>& lossy_mask, const SensingParams& params,
    const KernelHyperparams& hp, const BasisSet& basis, const DomainMap& map,
    const FieldGrid& truth, std::mt19937_64& rng) {
  std::vector<double> measurements;
  measurements.reserve(static_cast<std::size_t>(net.R));
  for (int r = 0; r < net.R; ++r)
    measurements.push_back(measure(truth, positions[static_cast<std::size_t>(r)], hp.sigma_n, rng));
  return run_sensing_step_with_measurements(states, positions, net, link, lossy_mask, params,
                                            hp, basis, map, measurements, rng);
}

struct MadgpStepResult {
  std::vector<MadgpState> states;
  std::vector<int> iterations;
};

/// The MADGP counterpart of a sensing step: local (alpha, beta) update from
/// the sensor's own measurement, then average-consensus rounds under the same
/// per-sensor loop controls. alpha and beta travel as one stacked E x (E+1)
/// message so link degradation hits both together.
inline MadgpStepResult run_madgp_step(const std::vector<MadgpState>& states,
                                      const std::vector<Vec2>& positions,
                                      const std::vector<double>& measurements,
                                      const NetworkGraph& net, const LinkModel& link,
                                      const std::vector<std::uint8_t>& lossy_mask,
                                      const SensingParams& params, double gamma,
                                      const BasisSet& basis, const DomainMap& map,
                                      std::mt19937_64& rng) {
  const int R = net.R;
  const int E = basis.E;

  std::vector<Eigen::MatrixXd> payload;
  payload.reserve(static_cast<std::size_t>(R));
  MadgpStepResult result;
  result.states.reserve(static_cast<std::size_t>(R));
  for (int r = 0; r < R; ++r) {
    MadgpState s = madgp_local_update(states[static_cast<std::size_t>(r)],
                                      map.to_centered(positions[static_cast<std::size_t>(r)]),
                                      measurements[static_cast<std::size_t>(r)], basis);
    Eigen::MatrixXd m(E, E + 1);
    m.leftCols(E) = s.alpha;
    m.col(E) = s.beta;
    payload.push_back(std::move(m));
    result.states.push_back(std::move(s));
  }

  std::vector<char> active(static_cast<std::size_t>(R), 1);
  result.iterations.assign(static_cast<std::size_t>(R), 0);
  int t = 0;
  bool any_active = true;
  while (any_active && t <= params.t_max) {
    DeliveryPlan plan = effective_links(net, link, E, rng, lossy_mask);
    std::erase_if(plan, [&](const Delivery& d) {
      return !active[static_cast<std::size_t>(d.src)] || !active[static_cast<std::size_t>(d.dst)];
    });
    const auto inboxes = exchange_matrices(payload, plan);

    any_active = false;
    std::vector<Eigen::MatrixXd> next = payload;
    for (int r = 0; r < R; ++r) {
      if (!active[static_cast<std::size_t>(r)]) continue;
      if (!inboxes[static_cast<std::size_t>(r)].empty())
        next[static_cast<std::size_t>(r)] = avg_consensus_step(
            payload[static_cast<std::size_t>(r)], inboxes[static_cast<std::size_t>(r)], gamma);
      const bool settled = rmse(payload[static_cast<std::size_t>(r)],
                                next[static_cast<std::size_t>(r)]) < params.theta_th;
      result.iterations[static_cast<std::size_t>(r)] = t + 1;
      if (settled)
        active[static_cast<std::size_t>(r)] = 0;
      else
        any_active = true;
    }
    payload = std::move(next);
    ++t;
  }

  for (int r = 0; r < R; ++r) {
    result.states[static_cast<std::size_t>(r)].alpha = payload[static_cast<std::size_t>(r)].leftCols(E);
    symmetrize(result.states[static_cast<std::size_t>(r)].alpha);
    result.states[static_cast<std::size_t>(r)].beta = payload[static_cast<std::size_t>(r)].col(E);
  }
  return result;
}

}  // namespace kdgp
