#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bsdelab/report.hpp"

namespace bsdelab {

/// Structural classes a generator can claim. Monotone covers both Remark-style
/// inequalities: one-sided monotonicity in y plus Lipschitz continuity in z.
enum class GeneratorTag { H1, H2, OneSided, Monotone };

std::string to_string(GeneratorTag tag);

/// A named driver g(t, y, z) with declared structural class and constants.
/// evaluate must be pure and reentrant; z is passed as a d-dimensional span.
struct GeneratorSpec {
    std::string name;
    std::set<GeneratorTag> class_tags;
    double beta = 0.0;
    double gamma = 1.0;
    std::function<double(double t, double y, std::span<const double> z)> evaluate;

    /// Remark-2.7 style process bound f_t (defaults to 0 when absent).
    std::optional<std::function<double(double t)>> f_bound;
    /// Remark-2.7 growth function h with h(0) = 0 (enables the |g| audit).
    std::optional<std::function<double(double r)>> h_growth;

    double operator()(double t, double y, std::span<const double> z) const {
        return evaluate(t, y, z);
    }
    double at_zero(double t) const { return evaluate(t, 0.0, std::span<const double>{}); }

    bool has_tag(GeneratorTag tag) const { return class_tags.count(tag) > 0; }
};

/// The builtin library: one representative per assumption class.
///   zero            g = 0                         {H1, H2}
///   linear_y        g = -beta y                   {H1, H2}
///   abs_z           g = gamma |z|                 {H1, H2}
///   lipschitz_mixed g = beta sin(y) + gamma |z|   {H1, H2}
///   one_sided_cubic g = -y^3 + gamma |z|          {one_sided}
///   monotone_nonlip g = -beta sgn(y)|y| + gamma|z| {monotone}
std::vector<GeneratorSpec> builtin_generators(double beta = 0.5, double gamma = 0.5);

/// Lookup by name from the builtin library; throws ConfigError when unknown.
GeneratorSpec builtin_generator(const std::string& name, double beta, double gamma);

/// Sampled audit of every declared tag inequality under a heavy-tailed
/// (t, y, z) proposal. A violated inequality marks the report FAIL; it is
/// not an exception. worst_margin is the smallest slack seen across tags.
VerificationReport verify_assumptions(const GeneratorSpec& spec, int n_samples,
                                      std::uint64_t seed);

} // namespace bsdelab
