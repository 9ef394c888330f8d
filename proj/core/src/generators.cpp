#include "bsdelab/generators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bsdelab/errors.hpp"
#include "bsdelab/hashing.hpp"
#include "bsdelab/rng.hpp"

namespace bsdelab {

namespace {

double norm2(std::span<const double> z) {
    double s = 0.0;
    for (double c : z) s += c * c;
    return std::sqrt(s);
}

double sgn(double y) { return y > 0.0 ? 1.0 : (y < 0.0 ? -1.0 : 0.0); }

} // namespace

std::string to_string(GeneratorTag tag) {
    switch (tag) {
        case GeneratorTag::H1: return "H1";
        case GeneratorTag::H2: return "H2";
        case GeneratorTag::OneSided: return "one_sided";
        case GeneratorTag::Monotone: return "monotone";
    }
    return "?";
}

std::vector<GeneratorSpec> builtin_generators(double beta, double gamma) {
    if (!(gamma > 0.0)) throw ConfigError("builtin_generators: gamma must be > 0");
    if (!(beta >= 0.0)) throw ConfigError("builtin_generators: beta must be >= 0");

    std::vector<GeneratorSpec> out;

    out.push_back({.name = "zero",
                   .class_tags = {GeneratorTag::H1, GeneratorTag::H2},
                   .beta = beta,
                   .gamma = gamma,
                   .evaluate = [](double, double, std::span<const double>) { return 0.0; }});

    out.push_back({.name = "linear_y",
                   .class_tags = {GeneratorTag::H1, GeneratorTag::H2},
                   .beta = beta,
                   .gamma = gamma,
                   .evaluate = [beta](double, double y, std::span<const double>) {
                       return -beta * y;
                   }});

    out.push_back({.name = "abs_z",
                   .class_tags = {GeneratorTag::H1, GeneratorTag::H2},
                   .beta = beta,
                   .gamma = gamma,
                   .evaluate = [gamma](double, double, std::span<const double> z) {
                       return gamma * norm2(z);
                   }});

    out.push_back({.name = "lipschitz_mixed",
                   .class_tags = {GeneratorTag::H1, GeneratorTag::H2},
                   .beta = beta,
                   .gamma = gamma,
                   .evaluate = [beta, gamma](double, double y, std::span<const double> z) {
                       return beta * std::sin(y) + gamma * norm2(z);
                   }});

    GeneratorSpec cubic{.name = "one_sided_cubic",
                        .class_tags = {GeneratorTag::OneSided},
                        .beta = beta,
                        .gamma = gamma,
                        .evaluate = [gamma](double, double y, std::span<const double> z) {
                            return -y * y * y + gamma * norm2(z);
                        }};
    cubic.f_bound = [](double) { return 0.0; };
    cubic.h_growth = [](double r) { return r * r * r; };
    out.push_back(std::move(cubic));

    out.push_back({.name = "monotone_nonlip",
                   .class_tags = {GeneratorTag::Monotone},
                   .beta = beta,
                   .gamma = gamma,
                   .evaluate = [beta, gamma](double, double y, std::span<const double> z) {
                       return -beta * sgn(y) * std::fabs(y) + gamma * norm2(z);
                   }});

    return out;
}

GeneratorSpec builtin_generator(const std::string& name, double beta, double gamma) {
    auto all = builtin_generators(beta, gamma);
    for (auto& g : all) {
        if (g.name == name) return g;
    }
    throw ConfigError("unknown generator: " + name);
}

VerificationReport verify_assumptions(const GeneratorSpec& spec, int n_samples,
                                      std::uint64_t seed) {
    if (n_samples < 1) throw ConfigError("verify_assumptions: n_samples must be >= 1");

    VerificationReport report;
    report.check_name = "assumptions/" + spec.name;
    report.scenario_hash = to_hex(fnv1a64(spec.name));
    report.seed = seed;
    report.pass = true;
    report.worst_margin = std::numeric_limits<double>::infinity();

    constexpr int kDim = 2;
    constexpr double kScale = 3.0; // Cauchy scale of the heavy-tailed proposal
    CounterRng rng(seed, fnv1a64(spec.name));

    auto sample_z = [&](double* z) {
        for (int c = 0; c < kDim; ++c) z[c] = rng.cauchy(kScale);
    };

    struct TagState {
        double worst = std::numeric_limits<double>::infinity();
        double viol_t = 0, viol_y = 0, viol_z = 0;
        long violations = 0;
    };
    std::map<std::string, TagState> per_tag;

    auto record = [&](const std::string& tag, double margin, double t, double y, double z0) {
        auto& st = per_tag[tag];
        if (margin < st.worst) {
            st.worst = margin;
            st.viol_t = t;
            st.viol_y = y;
            st.viol_z = z0;
        }
        if (margin < 0.0) ++st.violations;
    };

    for (int i = 0; i < n_samples; ++i) {
        const double t = rng.uniform(0.0, 1.0);
        const double y1 = rng.cauchy(kScale);
        const double y2 = rng.cauchy(kScale);
        double z1[kDim], z2[kDim];
        sample_z(z1);
        sample_z(z2);
        const std::span<const double> zs1(z1, kDim);
        const std::span<const double> zs2(z2, kDim);

        if (spec.has_tag(GeneratorTag::H1)) {
            const double lhs = std::fabs(spec(t, y1, zs1));
            const double rhs = std::fabs(spec.at_zero(t)) + spec.beta * std::fabs(y1) +
                               spec.gamma * norm2(zs1);
            record("H1", rhs - lhs, t, y1, z1[0]);
        }
        if (spec.has_tag(GeneratorTag::H2)) {
            const double lhs = std::fabs(spec(t, y1, zs1) - spec(t, y2, zs2));
            double dz = 0.0;
            for (int c = 0; c < kDim; ++c) dz += (z1[c] - z2[c]) * (z1[c] - z2[c]);
            const double rhs = spec.beta * std::fabs(y1 - y2) + spec.gamma * std::sqrt(dz);
            record("H2", rhs - lhs, t, y1, z1[0]);
        }
        if (spec.has_tag(GeneratorTag::OneSided)) {
            const double f = spec.f_bound ? (*spec.f_bound)(t) : 0.0;
            const double lhs = sgn(y1) * spec(t, y1, zs1);
            const double rhs = f + spec.beta * std::fabs(y1) + spec.gamma * norm2(zs1);
            record("one_sided", rhs - lhs, t, y1, z1[0]);
            if (spec.h_growth) {
                const double babs = f + (*spec.h_growth)(std::fabs(y1)) + spec.gamma * norm2(zs1);
                record("one_sided_abs", babs - std::fabs(spec(t, y1, zs1)), t, y1, z1[0]);
            }
        }
        if (spec.has_tag(GeneratorTag::Monotone)) {
            const double lhs = sgn(y1 - y2) * (spec(t, y1, zs1) - spec(t, y2, zs1));
            record("monotone_y", spec.beta * std::fabs(y1 - y2) - lhs, t, y1, z1[0]);
            const double lz = std::fabs(spec(t, y1, zs1) - spec(t, y1, zs2));
            double dz = 0.0;
            for (int c = 0; c < kDim; ++c) dz += (z1[c] - z2[c]) * (z1[c] - z2[c]);
            record("monotone_z", spec.gamma * std::sqrt(dz) - lz, t, y1, z1[0]);
        }
    }

    long total_violations = 0;
    for (const auto& [tag, st] : per_tag) {
        total_violations += st.violations;
        report.worst_margin = std::min(report.worst_margin, st.worst);
        report.details.push_back({{"tag", tag},
                                  {"worst_margin", st.worst},
                                  {"violations", st.violations},
                                  {"worst_at", {{"t", st.viol_t}, {"y", st.viol_y}, {"z0", st.viol_z}}}});
    }
    if (per_tag.empty()) {
        report.details.push_back({{"note", "no tags declared; nothing audited"}});
        report.worst_margin = 0.0;
    }
    report.violation_rate = per_tag.empty()
                                ? 0.0
                                : static_cast<double>(total_violations) /
                                      (static_cast<double>(n_samples) *
                                       static_cast<double>(per_tag.size()));
    report.pass = total_violations == 0;
    return report;
}

} // namespace bsdelab
