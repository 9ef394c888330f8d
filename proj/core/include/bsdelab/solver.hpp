#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bsdelab/generators.hpp"
#include "bsdelab/path_ensemble.hpp"
#include "bsdelab/regression.hpp"

namespace bsdelab {

struct SolutionMeta {
    std::string generator;
    std::string terminal;
    int basis_degree = 2;
    double ridge = 0.0;
    std::optional<std::pair<int, int>> truncation; // (n, p) caps when truncated
    std::uint64_t seed = 0;
};

/// Discrete (Y, Z) over grid x paths. y(.,N) equals the supplied terminal
/// samples exactly; every entry is finite.
struct SolutionField {
    TimeGrid grid;
    EnsemblePtr ensemble;
    int dim = 1;
    std::vector<double> y; // M x (N+1)
    std::vector<double> z; // M x N x d
    SolutionMeta meta;
    std::vector<double> step_residual_std; // per-step regression residual scale
    std::vector<double> step_se_fit;       // per-step fitted-value standard error

    int n_paths() const { return ensemble ? ensemble->n_paths() : 0; }

    double y_at(int i, int k) const {
        return y[static_cast<std::size_t>(i) * (static_cast<std::size_t>(grid.n_steps()) + 1) +
                 static_cast<std::size_t>(k)];
    }
    double& y_at(int i, int k) {
        return y[static_cast<std::size_t>(i) * (static_cast<std::size_t>(grid.n_steps()) + 1) +
                 static_cast<std::size_t>(k)];
    }
    double z_at(int i, int k, int c = 0) const {
        return z[(static_cast<std::size_t>(i) * static_cast<std::size_t>(grid.n_steps()) +
                  static_cast<std::size_t>(k)) *
                     static_cast<std::size_t>(dim) +
                 static_cast<std::size_t>(c)];
    }
    double& z_at(int i, int k, int c = 0) {
        return z[(static_cast<std::size_t>(i) * static_cast<std::size_t>(grid.n_steps()) +
                  static_cast<std::size_t>(k)) *
                     static_cast<std::size_t>(dim) +
                 static_cast<std::size_t>(c)];
    }
    std::span<const double> z_vector(int i, int k) const {
        return {z.data() + (static_cast<std::size_t>(i) * static_cast<std::size_t>(grid.n_steps()) +
                            static_cast<std::size_t>(k)) *
                               static_cast<std::size_t>(dim),
                static_cast<std::size_t>(dim)};
    }

    /// Mean of Y over paths at grid index k.
    double mean_y(int k) const;
    /// Conservative fitted-value noise scale: max over steps of se_fit.
    double noise_scale() const;
};

struct SolveOptions {
    /// 0 keeps the y-argument of g explicit (the projected next value);
    /// more iterations run an inner fixed point for the implicit variant.
    int implicit_fixed_point_iters = 0;
    /// Shared regression plan; built from (ensemble, reg) when absent.
    RegressionPlanPtr plan;
};

/// Elementwise xi+ ^ n - xi- ^ p; output lies in [-p, n].
std::vector<double> truncate_terminal(std::span<const double> xi, int n, int p);

/// Same (y, z)-increments as spec, with the level g(t,0,0) replaced by
/// g+(t,0,0) ^ n - g-(t,0,0) ^ p. Tags and constants are inherited.
GeneratorSpec truncate_generator(const GeneratorSpec& spec, int n, int p);

/// Backward recursion Y_N = xi; Z_k from the regression of Y_{k+1} dB_k;
/// Y_k = E_k[Y_{k+1}] + g(t_k, ., Z_k) dt. Deterministic given inputs.
SolutionField solve_backward_euler(const GeneratorSpec& gen, std::span<const double> xi,
                                   EnsemblePtr ensemble, const RegressionConfig& reg,
                                   const SolveOptions& options = {});

struct PicardResult {
    SolutionField field;
    int iterations = 0;
    double last_change = 0.0;
};

/// Fixed-point iteration freezing (Y, Z) inside g, initialized from the
/// zero-generator conditional-expectation field. Throws SolverError when the
/// sup-change still exceeds tol after max_iter iterations.
PicardResult picard_solve(const GeneratorSpec& gen, std::span<const double> xi,
                          EnsemblePtr ensemble, const RegressionConfig& reg, int max_iter,
                          double tol, const SolveOptions& options = {});

struct MonotoneMemberSummary {
    int n = 0;
    int p = 0;
    double y0 = 0.0;
    bool solved = false;
};

struct MonotoneSweep {
    std::vector<MonotoneMemberSummary> members; // p-major, n-minor ladder order
    std::vector<int> n_levels;
    std::vector<int> p_levels;
    std::vector<double> limit; // M x (N+1): min over p of max over n of Y^{n,p}
    double ordering_violation_rate = 0.0;
    double noise_band = 0.0;
    int sampled_paths = 0; // paths used for the cross-p ordering statistic
    std::string ordering_note;
    std::vector<std::string> member_errors;
};

/// Visitor invoked with each solved truncation member (streaming; fields are
/// not retained by the sweep).
using MonotoneMemberVisitor =
    std::function<void(int n, int p, const SolutionField& field)>;

/// Solve BSDE(xi^{n,p}, g^{n,p}) over the geometric ladders
/// {1, 2, 4, ...} up to n_max / p_max, report the monotone-limit field and
/// the rate of ordering violations beyond the regression noise band.
/// Member solve failures are recorded and skipped, not propagated.
MonotoneSweep monotone_approximation(const GeneratorSpec& gen, std::span<const double> xi,
                                     EnsemblePtr ensemble, const RegressionConfig& reg,
                                     int n_max, int p_max,
                                     const MonotoneMemberVisitor& visitor = {});

/// CSV export: step_index,time,path_id,y,z_1..z_d (RFC 4180, CRLF).
void export_solution_csv(const SolutionField& field, const std::filesystem::path& path);

/// JSON sidecar with the field's meta, dimensions and the caller's config hash.
void export_solution_meta(const SolutionField& field, const std::filesystem::path& path,
                          const std::string& config_hash);

} // namespace bsdelab
