#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperfit/assembly.hpp"
#include "hyperfit/errors.hpp"
#include "hyperfit/features.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/parallel.hpp"
#include "hyperfit/rng.hpp"

namespace hyperfit {

struct SolverConfig {
    double p = 0.25;              // lp exponent
    double lambda_p0 = 0.01;      // initial penalty coefficient
    double kappa = 5.0;           // penalty escalation factor
    int n_starts = 200;           // parallel fixed-point runs
    int max_fp_iters = 200;       // per-start iteration cap
    double eps_tol = 1e-6;        // feature-removal tolerance
    double eps_conv = 1e-3;       // fixed-point convergence tolerance
    double theta_threshold = 0.01;
    int n_gamma = 75;             // admissibility samples per path
    double gamma_max = 1e9;
    double gamma_min = 1e-3;
    double lambda_r = 100.0;      // reaction-balance weight
    std::uint64_t seed = 0;
    int max_escalations = 20;
    int n_threads = 0; // 0 = HYPERFIT_THREADS env or hardware

    void validate() const
    {
        if (!(p > 0.0 && p <= 1.0)) throw UsageError("p must lie in (0, 1]");
        if (!(kappa > 1.0)) throw UsageError("kappa must exceed 1");
        if (!(lambda_p0 > 0.0 && eps_tol > 0.0 && eps_conv > 0.0 && theta_threshold > 0.0))
            throw UsageError("penalties and tolerances must be positive");
        if (n_starts < 1 || max_fp_iters < 1 || n_gamma < 2)
            throw UsageError("counts must be positive (n_gamma >= 2)");
        if (!(gamma_max > gamma_min && gamma_min > 0.0))
            throw UsageError("gamma range must satisfy 0 < gamma_min < gamma_max");
    }
};

/// Symmetric-factorization solve with diagonal jitter retry; empty on
/// breakdown or non-finite solution.
inline std::optional<Eigen::VectorXd> solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b)
{
    auto attempt = [&](const Eigen::MatrixXd& M) -> std::optional<Eigen::VectorXd> {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(M);
        if (ldlt.info() != Eigen::Success) return std::nullopt;
        Eigen::VectorXd x = ldlt.solve(b);
        if (!x.allFinite()) return std::nullopt;
        return x;
    };
    if (auto x = attempt(A)) return x;
    const double jitter = 1e-12 * A.trace() / static_cast<double>(A.rows());
    Eigen::MatrixXd Aj = A;
    Aj.diagonal().array() += jitter;
    return attempt(Aj);
}

/// Least-squares objective in reduced form:
///   theta^T A theta - 2 b^T theta + lambda_p * sum |theta_i|^p.
/// Equals the full loss up to the data constant |b_free|^2 + lambda_r |b_fix|^2.
inline double objective_value(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, double lambda_p,
                              double p, const Eigen::VectorXd& theta)
{
    double penalty = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k)
        if (theta[k] != 0.0) penalty += std::pow(std::abs(theta[k]), p);
    return theta.dot(A * theta) - 2.0 * b.dot(theta) + lambda_p * penalty;
}

/// Infinity norm of the stationarity residual 2 A theta + p lambda_p
/// sgn(theta)|theta|^{p-1} - 2 b over the active (nonzero) entries.
inline double stationarity_residual(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                    double lambda_p, double p, const Eigen::VectorXd& theta)
{
    const Eigen::VectorXd r = 2.0 * (A * theta - b);
    double worst = 0.0;
    for (Eigen::Index k = 0; k < theta.size(); ++k) {
        if (theta[k] == 0.0) continue;
        const double grad = r[k] + p * lambda_p * (theta[k] > 0 ? 1.0 : -1.0) *
                                       std::pow(std::abs(theta[k]), p - 1.0);
        worst = std::max(worst, std::abs(grad));
    }
    return worst;
}

enum class FixedPointStatus { Converged, MaxIterations, SolveFailed };

struct FixedPointResult {
    FixedPointStatus status = FixedPointStatus::MaxIterations;
    Eigen::VectorXd theta; // full length; removed features exactly 0
    int iterations = 0;
    bool ok() const { return status == FixedPointStatus::Converged; }
};

// Fixed-point iteration for the lp-regularized normal equations: each pass
// solves [A + (p lambda_p / 2) diag(|theta_i|^{p-2})] theta_new = b on the
// surviving features. Features falling below eps_tol are removed permanently
// so the diagonal weights stay finite.
inline FixedPointResult fixed_point_solve(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                          double lambda_p, double p,
                                          const Eigen::VectorXd& theta0,
                                          const SolverConfig& cfg = {})
{
    const Eigen::Index n = A.rows();
    if (A.cols() != n || b.size() != n || theta0.size() != n)
        throw UsageError("fixed_point_solve: dimension mismatch");

    FixedPointResult res;
    std::vector<Eigen::Index> active;
    Eigen::VectorXd theta = theta0;
    for (Eigen::Index k = 0; k < n; ++k) {
        if (std::abs(theta[k]) < cfg.eps_tol) theta[k] = 0.0;
        else active.push_back(k);
    }

    Eigen::VectorXd theta_new = Eigen::VectorXd::Zero(n);
    for (int it = 1; it <= cfg.max_fp_iters; ++it) {
        res.iterations = it;
        if (active.empty()) {
            res.status = FixedPointStatus::Converged;
            res.theta = Eigen::VectorXd::Zero(n);
            return res;
        }
        const auto m = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd As(m, m);
        Eigen::VectorXd bs(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            bs[r] = b[active[r]];
            for (Eigen::Index c = 0; c < m; ++c) As(r, c) = A(active[r], active[c]);
            As(r, r) += 0.5 * p * lambda_p * std::pow(std::abs(theta[active[r]]), p - 2.0);
        }
        const auto sol = solve_spd(As, bs);
        if (!sol) {
            res.status = FixedPointStatus::SolveFailed;
            res.theta = theta;
            return res;
        }
        theta_new.setZero();
        for (Eigen::Index r = 0; r < m; ++r) theta_new[active[r]] = (*sol)[r];

        // permanent removal of vanishing features
        std::vector<Eigen::Index> still;
        still.reserve(active.size());
        for (Eigen::Index k : active) {
            if (std::abs(theta_new[k]) < cfg.eps_tol) theta_new[k] = 0.0;
            else still.push_back(k);
        }
        active.swap(still);

        const double step = (theta_new - theta).lpNorm<Eigen::Infinity>();
        theta = theta_new;
        if (step < cfg.eps_conv) {
            res.status = FixedPointStatus::Converged;
            res.theta = theta;
            return res;
        }
    }
    res.status = FixedPointStatus::MaxIterations;
    res.theta = theta;
    return res;
}

struct MultiStartResult {
    std::optional<Eigen::VectorXd> best; // empty if every start failed
    double best_objective = 0.0;
    int best_start = -1;
    int n_converged = 0;
    std::vector<std::uint8_t> converged; // per-start flags
};

/// Runs n_starts independent fixed-point iterations from random positive
/// initial guesses and keeps the converged solution with the smallest
/// objective (ties broken by lowest start index). Starts run in parallel;
/// each owns an RNG stream derived from (seed, salt, start index).
inline MultiStartResult multi_start(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                    double lambda_p, const SolverConfig& cfg,
                                    std::uint64_t salt = 0)
{
    const Eigen::Index n = A.rows();
    MultiStartResult out;
    out.converged.assign(static_cast<std::size_t>(cfg.n_starts), 0);
    std::vector<Eigen::VectorXd> thetas(static_cast<std::size_t>(cfg.n_starts));
    std::vector<double> objectives(static_cast<std::size_t>(cfg.n_starts), 0.0);

    parallel_for(cfg.n_starts, thread_count(cfg.n_threads), [&](int s) {
        std::mt19937_64 rng(stream_seed(cfg.seed, salt, static_cast<std::uint64_t>(s)));
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        Eigen::VectorXd theta0(n);
        for (Eigen::Index k = 0; k < n; ++k) theta0[k] = 1.0 - unif(rng); // (0, 1]
        const FixedPointResult r = fixed_point_solve(A, b, lambda_p, cfg.p, theta0, cfg);
        if (r.ok()) {
            out.converged[static_cast<std::size_t>(s)] = 1;
            thetas[static_cast<std::size_t>(s)] = r.theta;
            objectives[static_cast<std::size_t>(s)] =
                objective_value(A, b, lambda_p, cfg.p, r.theta);
        }
    });

    for (int s = 0; s < cfg.n_starts; ++s) {
        if (!out.converged[static_cast<std::size_t>(s)]) continue;
        ++out.n_converged;
        if (!out.best || objectives[static_cast<std::size_t>(s)] < out.best_objective) {
            out.best = thetas[static_cast<std::size_t>(s)];
            out.best_objective = objectives[static_cast<std::size_t>(s)];
            out.best_start = s;
        }
    }
    return out;
}

struct AdmissibilityVerdict {
    bool pass = false;
    std::string reason; // empty when admissible
};

/// Empirical physical-admissibility checks: W >= 0 at every observed
/// quadrature state, and W finite, positive and strictly increasing along
/// the six canonical deformation paths on a log-spaced gamma grid.
inline AdmissibilityVerdict admissibility_check(const MaterialModel& model,
                                                const std::vector<InvariantSet>& quad_invariants,
                                                const SolverConfig& cfg = {})
{
    // data states
    double max_abs_w = 0.0;
    double min_w = 0.0;
    for (const auto& inv : quad_invariants) {
        const double w = model.energy(inv);
        if (!std::isfinite(w)) return {false, "non-finite W at a quadrature point"};
        max_abs_w = std::max(max_abs_w, std::abs(w));
        min_w = std::min(min_w, w);
    }
    if (min_w < -1e-12 * std::max(1.0, max_abs_w))
        return {false, "W < 0 at a quadrature point (min " + std::to_string(min_w) + ")"};

    // canonical paths
    const double log_lo = std::log(cfg.gamma_min);
    const double log_hi = std::log(cfg.gamma_max);
    for (const auto kind : all_deformation_paths) {
        double prev = 0.0;
        for (int s = 0; s < cfg.n_gamma; ++s) {
            const double t = static_cast<double>(s) / static_cast<double>(cfg.n_gamma - 1);
            const double gamma = std::exp(log_lo + t * (log_hi - log_lo));
            double w = 0.0;
            try {
                w = model.energy(invariants(deformation_path(kind, gamma)));
            } catch (const Error&) {
                return {false, std::string("W undefined along ") + to_string(kind)};
            }
            if (!std::isfinite(w))
                return {false, std::string("W non-finite along ") + to_string(kind)};
            if (!(w > 0.0))
                return {false, std::string("W not positive along ") + to_string(kind)};
            if (s > 0 && !(w > prev))
                return {false, std::string("W not strictly increasing along ") + to_string(kind)};
            prev = w;
        }
    }
    return {true, ""};
}

enum class ThresholdStatus { Ok, EmptyModel, SolveFailed };

struct ThresholdResult {
    ThresholdStatus status = ThresholdStatus::Ok;
    Eigen::VectorXd theta;
    int passes = 0;
};

// Iterated thresholding: zero every |theta_i| < threshold, re-solve the
// unregularized normal equations on the survivors, repeat until stable.
// The active set shrinks strictly in each pass, so this terminates.
inline ThresholdResult threshold_loop(const Eigen::MatrixXd& A, const Eigen::VectorXd& b,
                                      const Eigen::VectorXd& theta_in, double threshold)
{
    const Eigen::Index n = A.rows();
    if (theta_in.size() != n) throw UsageError("threshold_loop: dimension mismatch");
    ThresholdResult res;
    res.theta = theta_in;
    for (;;) {
        ++res.passes;
        std::vector<Eigen::Index> keep;
        for (Eigen::Index k = 0; k < n; ++k)
            if (std::abs(res.theta[k]) >= threshold) keep.push_back(k);
        if (keep.empty()) {
            res.status = ThresholdStatus::EmptyModel;
            res.theta = Eigen::VectorXd::Zero(n);
            return res;
        }

        const auto m = static_cast<Eigen::Index>(keep.size());
        Eigen::MatrixXd As(m, m);
        Eigen::VectorXd bs(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            bs[r] = b[keep[r]];
            for (Eigen::Index c = 0; c < m; ++c) As(r, c) = A(keep[r], keep[c]);
        }
        const auto sol = solve_spd(As, bs);
        if (!sol) {
            res.status = ThresholdStatus::SolveFailed;
            return res;
        }
        res.theta.setZero();
        for (Eigen::Index r = 0; r < m; ++r) res.theta[keep[r]] = (*sol)[r];

        bool stable = true;
        for (Eigen::Index r = 0; r < m; ++r)
            if (std::abs((*sol)[r]) < threshold) stable = false;
        if (stable) return res;
    }
}

struct EscalationRecord {
    double lambda_p = 0.0;
    int active_before = 0;
    int active_after = 0;
    int n_converged_starts = 0;
    double objective = 0.0;
    bool admissible = false;
    std::string note;
};

struct SolveReport {
    bool success = false;
    MaterialModel model;
    double lambda_p_final = 0.0;
    int escalations = 0;
    double objective = 0.0; // recomputable from (A_eqb, b_eqb, theta, lambda_p)
    std::vector<EscalationRecord> trail;
    std::vector<std::uint8_t> start_statuses; // converged flags of the final round

    json to_json() const;
};

// Full discovery: multi-start fixed-point solve, thresholding, admissibility
// gate; on failure the penalty escalates multiplicatively and the search
// continues on the thresholded feature subset.
inline SolveReport discover(const EquilibriumSystem& system, const FeatureLibrary& lib,
                            const std::vector<InvariantSet>& quad_invariants,
                            const SolverConfig& cfg = {})
{
    cfg.validate();
    const auto n_f = static_cast<Eigen::Index>(lib.size());
    if (system.A.rows() != n_f)
        throw UsageError("system size does not match feature library");

    SolveReport report;
    std::vector<Eigen::Index> active(static_cast<std::size_t>(n_f));
    for (Eigen::Index k = 0; k < n_f; ++k) active[static_cast<std::size_t>(k)] = k;

    double lambda_p = cfg.lambda_p0;
    for (int round = 0; round <= cfg.max_escalations; ++round) {
        EscalationRecord rec;
        rec.lambda_p = lambda_p;
        rec.active_before = static_cast<int>(active.size());

        const auto m = static_cast<Eigen::Index>(active.size());
        Eigen::MatrixXd As(m, m);
        Eigen::VectorXd bs(m);
        for (Eigen::Index r = 0; r < m; ++r) {
            bs[r] = system.b[active[static_cast<std::size_t>(r)]];
            for (Eigen::Index c = 0; c < m; ++c)
                As(r, c) = system.A(active[static_cast<std::size_t>(r)],
                                    active[static_cast<std::size_t>(c)]);
        }

        const MultiStartResult ms =
            multi_start(As, bs, lambda_p, cfg, static_cast<std::uint64_t>(round));
        if (!ms.best) {
            rec.note = "all starts failed to converge";
            report.trail.push_back(rec);
            lambda_p *= cfg.kappa;
            ++report.escalations;
            continue;
        }

        const ThresholdResult th = threshold_loop(As, bs, *ms.best, cfg.theta_threshold);
        if (th.status != ThresholdStatus::Ok) {
            rec.note = th.status == ThresholdStatus::EmptyModel ? "all features thresholded away"
                                                                : "threshold re-solve failed";
            report.trail.push_back(rec);
            lambda_p *= cfg.kappa;
            ++report.escalations;
            continue;
        }

        Eigen::VectorXd theta_full = Eigen::VectorXd::Zero(n_f);
        for (Eigen::Index r = 0; r < m; ++r)
            theta_full[active[static_cast<std::size_t>(r)]] = th.theta[r];
        MaterialModel candidate(lib, theta_full);

        rec.n_converged_starts = ms.n_converged;
        rec.active_after = static_cast<int>(candidate.n_active());
        rec.objective = objective_value(system.A, system.b, lambda_p, cfg.p, theta_full);
        const AdmissibilityVerdict verdict = admissibility_check(candidate, quad_invariants, cfg);
        rec.admissible = verdict.pass;
        rec.note = verdict.reason;
        report.trail.push_back(rec);

        if (verdict.pass) {
            report.success = true;
            report.model = std::move(candidate);
            report.lambda_p_final = lambda_p;
            report.objective = rec.objective;
            report.start_statuses = ms.converged;
            return report;
        }

        // carry the thresholded support into the next penalty round
        std::vector<Eigen::Index> next;
        for (Eigen::Index k = 0; k < n_f; ++k)
            if (theta_full[k] != 0.0) next.push_back(k);
        if (!next.empty()) active.swap(next);
        lambda_p *= cfg.kappa;
        ++report.escalations;
    }
    report.success = false;
    report.lambda_p_final = lambda_p;
    return report;
}

inline json SolveReport::to_json() const
{
    json j;
    j["success"] = success;
    j["lambda_p_final"] = lambda_p_final;
    j["escalations"] = escalations;
    j["objective"] = objective;
    j["trail"] = json::array();
    for (const auto& r : trail) {
        j["trail"].push_back({{"lambda_p", r.lambda_p},
                              {"active_before", r.active_before},
                              {"active_after", r.active_after},
                              {"converged_starts", r.n_converged_starts},
                              {"objective", r.objective},
                              {"admissible", r.admissible},
                              {"note", r.note}});
    }
    j["start_statuses"] = json::array();
    for (auto f : start_statuses) j["start_statuses"].push_back(static_cast<bool>(f));
    if (success) {
        j["model"] = json::array();
        for (std::size_t k = 0; k < model.library.size(); ++k)
            if (model.theta[static_cast<Eigen::Index>(k)] != 0.0)
                j["model"].push_back({{"feature", model.library[k].name()},
                                      {"coefficient", model.theta[static_cast<Eigen::Index>(k)]}});
    }
    return j;
}

} // namespace hyperfit
