#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"

namespace bsdelab {

/// Structured pass/fail record for one verification check.
/// worst_margin is the minimum of (bound - value) over everything sampled,
/// so nonnegative means the inequality held everywhere.
struct VerificationReport {
    std::string check_name;
    std::string scenario_hash;
    std::uint64_t seed = 0;
    bool pass = false;
    double worst_margin = 0.0;
    double violation_rate = 0.0;
    double noise_band = 0.0;
    nlohmann::json details = nlohmann::json::array();

    nlohmann::json to_json() const;
    static VerificationReport from_json(const nlohmann::json& j);

    /// Serialized with stable key order and 2-space indentation.
    std::string to_string() const;
};

} // namespace bsdelab
