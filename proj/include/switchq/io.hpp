#pragma once

#include "switchq/harness.hpp"
#include "switchq/mdp.hpp"

#include <filesystem>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

namespace switchq {

/// Malformed or unreadable input. The CLI maps it to exit status 2.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/**
 * MDP JSON: n_states, n_actions, gamma, P[s][a][s'], R[s][a][s'],
 * p[s], beta[s][a]. Probability rows must sum to 1 within 1e-9 and rewards
 * must satisfy |r| <= 1. Errors name the offending field and index.
 */
RandomInstance parse_mdp_json(std::string_view text);
RandomInstance load_mdp(const std::filesystem::path& path);

/// Pretty-printed JSON with round-trip exact doubles.
std::string mdp_to_json(const Mdp& mdp, const SamplingModel& sampling);
void save_mdp(const std::filesystem::path& path, const Mdp& mdp, const SamplingModel& sampling);

/// Header trial,k,err_inf,err_lower_l2,err_lower_inf,gap_upper_lower_inf,sandwich_ok
void write_trajectory_csv(std::ostream& os, std::span<const TrajectoryRow> rows);

/// Report JSON with top-level keys config, problem, metrics, bounds, suites,
/// violations and pass. Wall-clock time is left out so the bytes only depend
/// on the configuration.
std::string report_to_json(const VerificationReport& report);

/// Writes `text` to `path`, throwing InputError with the path on failure.
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace switchq
