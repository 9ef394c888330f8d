#include "bsdelab/report.hpp"

namespace bsdelab {

nlohmann::json VerificationReport::to_json() const {
    return nlohmann::json{{"check_name", check_name},
                          {"scenario_hash", scenario_hash},
                          {"seed", seed},
                          {"pass", pass},
                          {"worst_margin", worst_margin},
                          {"violation_rate", violation_rate},
                          {"noise_band", noise_band},
                          {"details", details}};
}

VerificationReport VerificationReport::from_json(const nlohmann::json& j) {
    VerificationReport r;
    r.check_name = j.at("check_name").get<std::string>();
    r.scenario_hash = j.at("scenario_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.pass = j.at("pass").get<bool>();
    r.worst_margin = j.at("worst_margin").get<double>();
    r.violation_rate = j.at("violation_rate").get<double>();
    r.noise_band = j.at("noise_band").get<double>();
    r.details = j.value("details", nlohmann::json::array());
    return r;
}

std::string VerificationReport::to_string() const { return to_json().dump(2) + "\n"; }

} // namespace bsdelab
