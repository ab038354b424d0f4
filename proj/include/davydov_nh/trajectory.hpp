#pragma once

#include <optional>
#include <string>
#include <vector>

#include "davydov_nh/ansatz.hpp"
#include "davydov_nh/errors.hpp"

namespace davydov_nh {

/// Observables sampled at a fixed stride. A failed propagation keeps the
/// records gathered before the failure and carries the error tag.
struct Trajectory {
  std::vector<ObservableRecord> records;
  std::optional<ErrorKind> error;
  std::string error_message;

  bool complete() const noexcept { return !error.has_value(); }
  bool empty() const noexcept { return records.empty(); }
  std::size_t size() const noexcept { return records.size(); }

  std::vector<double> times() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.time);
    return out;
  }

  std::vector<double> norms() const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.norm);
    return out;
  }

  /// Unnormalized population of system state s at every sample.
  std::vector<double> population(Index s) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.populations(s));
    return out;
  }

  /// Population of system state s divided by the norm at every sample.
  std::vector<double> normalized_population(Index s) const {
    std::vector<double> out;
    out.reserve(records.size());
    for (const auto& r : records) {
      if (!(r.norm > kNormFloor)) throw NormUnderflow("normalized_population: norm underflow");
      out.push_back(r.populations(s) / r.norm);
    }
    return out;
  }
};

}  // namespace davydov_nh
