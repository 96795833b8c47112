#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "hyperfit/errors.hpp"
#include "hyperfit/features.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/mesh.hpp"

namespace hyperfit {

enum class BenchmarkModel { NH2, NH4, IH, HW, GT };

inline const char* to_string(BenchmarkModel m)
{
    switch (m) {
    case BenchmarkModel::NH2: return "NH2";
    case BenchmarkModel::NH4: return "NH4";
    case BenchmarkModel::IH: return "IH";
    case BenchmarkModel::HW: return "HW";
    case BenchmarkModel::GT: return "GT";
    }
    throw UsageError("invalid benchmark model");
}

inline BenchmarkModel benchmark_from_string(const std::string& s)
{
    if (s == "NH2") return BenchmarkModel::NH2;
    if (s == "NH4") return BenchmarkModel::NH4;
    if (s == "IH") return BenchmarkModel::IH;
    if (s == "HW") return BenchmarkModel::HW;
    if (s == "GT") return BenchmarkModel::GT;
    throw UsageError("unknown benchmark model '" + s + "' (expected NH2, NH4, IH, HW or GT)");
}

/// Load steps used per benchmark: the higher-order models are driven through
/// more steps to reach comparable strain levels.
inline int default_loadsteps(BenchmarkModel m)
{
    return (m == BenchmarkModel::NH2 || m == BenchmarkModel::NH4) ? 4 : 8;
}

constexpr std::array<BenchmarkModel, 5> all_benchmark_models = {
    BenchmarkModel::NH2, BenchmarkModel::NH4, BenchmarkModel::IH, BenchmarkModel::HW,
    BenchmarkModel::GT,
};

/// Hidden ground-truth coefficient tables over a feature library. Throws if
/// the library lacks a required feature (e.g. GT without the log term).
inline MaterialModel truth_model(BenchmarkModel m, const FeatureLibrary& lib)
{
    using FD = FeatureDescriptor;
    std::vector<std::pair<FD, double>> terms;
    switch (m) {
    case BenchmarkModel::NH2:
        terms = {{FD::mooney_rivlin(1, 0), 0.5}, {FD::volumetric(1), 1.5}};
        break;
    case BenchmarkModel::NH4:
        terms = {{FD::mooney_rivlin(1, 0), 0.5}, {FD::volumetric(2), 1.5}};
        break;
    case BenchmarkModel::IH:
        terms = {{FD::mooney_rivlin(1, 0), 0.5},
                 {FD::mooney_rivlin(0, 1), 1.0},
                 {FD::mooney_rivlin(2, 0), 1.0},
                 {FD::volumetric(1), 1.5}};
        break;
    case BenchmarkModel::HW:
        terms = {{FD::mooney_rivlin(1, 0), 0.5},
                 {FD::mooney_rivlin(0, 1), 1.0},
                 {FD::mooney_rivlin(1, 1), 0.7},
                 {FD::mooney_rivlin(3, 0), 0.2},
                 {FD::volumetric(1), 1.5}};
        break;
    case BenchmarkModel::GT:
        terms = {{FD::mooney_rivlin(1, 0), 0.5},
                 {FD::volumetric(1), 1.5},
                 {FD::log_feature(), 1.0}};
        break;
    }
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lib.size()));
    for (const auto& [fd, value] : terms) {
        const int k = lib.index_of(fd);
        if (k < 0)
            throw UsageError(std::string(to_string(m)) + " requires feature " + fd.name() +
                             " which is missing from the library");
        theta[k] = value;
    }
    return MaterialModel(lib, theta);
}

struct GenerationConfig {
    int resolution = 2000;        // target node count
    double hole_radius = 0.25;    // fraction of the quadrant side
    int n_steps = 0;              // 0 = model default (4 or 8)
    double delta_increment = 0.1; // delta_l = increment * l
    double asymmetry = 0.5;       // top displacement = asymmetry * delta
    double sigma = 0.0;           // displacement noise floor
    std::uint64_t seed = 0;
    double newton_tol = 1e-11;    // infinity norm of the free residual
    int newton_max_iter = 25;
    int max_bisections = 4;       // load sub-stepping depth on divergence
    bool fd_tangent = false;      // finite-difference element tangent
};

struct GeneratedMesh {
    Mesh mesh;
    DofPartition partition;
};

// Structured triangulation of the unit plate quadrant with a quarter-circular
// hole at the origin: rays blend the hole arc into the outer right/top edges
// and each quad of the (angular x radial) grid splits into two triangles.
// hole_radius = 0 degenerates to a structured square grid. Subsets:
//   left   (x = 0, direction x)   symmetry
//   bottom (y = 0, direction y)   symmetry
//   right  (x = 1, direction x)   loaded
//   top    (y = 1, direction y)   loaded
inline GeneratedMesh generate_mesh(int resolution, double hole_radius)
{
    if (hole_radius < 0.0 || hole_radius >= 1.0)
        throw GeometryError("hole radius must lie in [0, 1)");
    if (resolution < 4) throw GeometryError("resolution too small");

    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::array<int, 3>> elements;
    std::vector<int> left, bottom, right, top;

    if (hole_radius == 0.0) {
        const int n = std::max(2, static_cast<int>(std::lround(std::ceil(std::sqrt(
                                      static_cast<double>(resolution))))) - 1);
        auto id = [n](int i, int j) { return i * (n + 1) + j; };
        for (int i = 0; i <= n; ++i)
            for (int j = 0; j <= n; ++j)
                nodes.emplace_back(static_cast<double>(i) / n, static_cast<double>(j) / n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                elements.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
                elements.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
            }
        for (int k = 0; k <= n; ++k) {
            left.push_back(id(0, k));
            right.push_back(id(n, k));
            bottom.push_back(id(k, 0));
            top.push_back(id(k, n));
        }
    } else {
        int n = std::max(2, static_cast<int>(std::lround(std::ceil(std::sqrt(
                                static_cast<double>(resolution))))) - 1);
        if (n % 2 != 0) ++n; // outer corner (1,1) must be a grid node
        const int n_ang = n, n_rad = n;
        if (n_ang < 8)
            throw GeometryError("resolution resolves the hole arc with fewer than 8 segments");

        auto id = [n_rad](int q, int m) { return q * (n_rad + 1) + m; };
        for (int q = 0; q <= n_ang; ++q) {
            const double t = static_cast<double>(q) / n_ang;
            const double phi = 0.5 * M_PI * t;
            Eigen::Vector2d inner(hole_radius * std::cos(phi), hole_radius * std::sin(phi));
            if (q == 0) inner = {hole_radius, 0.0};
            if (q == n_ang) inner = {0.0, hole_radius};
            // outer boundary by arclength: (1,0) -> (1,1) -> (0,1)
            const double s = 2.0 * t;
            const Eigen::Vector2d outer =
                s <= 1.0 ? Eigen::Vector2d(1.0, s) : Eigen::Vector2d(2.0 - s, 1.0);
            for (int m = 0; m <= n_rad; ++m) {
                const double rho = static_cast<double>(m) / n_rad;
                nodes.emplace_back((1.0 - rho) * inner + rho * outer);
            }
        }
        for (int q = 0; q < n_ang; ++q)
            for (int m = 0; m < n_rad; ++m) {
                elements.push_back({id(q, m), id(q + 1, m), id(q + 1, m + 1)});
                elements.push_back({id(q, m), id(q + 1, m + 1), id(q, m + 1)});
            }
        for (int m = 0; m <= n_rad; ++m) {
            bottom.push_back(id(0, m));
            left.push_back(id(n_ang, m));
        }
        for (int q = 0; q <= n_ang; ++q) {
            if (q <= n_ang / 2) right.push_back(id(q, n_rad));
            if (q >= n_ang / 2) top.push_back(id(q, n_rad));
        }
    }

    GeneratedMesh out;
    out.mesh = Mesh::build(std::move(nodes), std::move(elements));
    out.partition = partition_dofs(
        static_cast<int>(out.mesh.n_nodes()),
        {{"left", 0, left}, {"bottom", 1, bottom}, {"right", 0, right}, {"top", 1, top}});
    return out;
}

namespace detail {

/// Internal nodal force vector and (optionally) the tangent triplets over
/// free DOFs. Throws InvertedElementError if any element has J <= 0.
inline Eigen::VectorXd internal_forces(const Mesh& mesh, const MaterialModel& model,
                                       const Eigen::VectorXd& u, const DofPartition* part,
                                       std::vector<Eigen::Triplet<double>>* tangent,
                                       bool fd_tangent)
{
    Eigen::VectorXd f = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.n_dofs()));
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const auto& g = mesh.grads[e];
        const auto ue = mesh.gather(e, u);
        const DeformationGradient F = deformation_gradient(g, ue);
        const double area = mesh.areas[e];

        Eigen::Matrix2d P;
        Eigen::Matrix4d H;
        if (tangent && !fd_tangent) {
            const EnergyDerivatives d = energy_derivatives(model, F);
            P = d.P;
            H = d.H;
        } else {
            P = stress(model, F);
        }
        if (tangent && fd_tangent) {
            // central differences of the stress w.r.t. F components
            const double h = 1e-7;
            DeformationGradient Fp = F;
            double* slots[4] = {&Fp.F11, &Fp.F12, &Fp.F21, &Fp.F22};
            for (int c = 0; c < 4; ++c) {
                const double orig = *slots[c];
                *slots[c] = orig + h;
                const Eigen::Matrix2d Pp = stress(model, Fp);
                *slots[c] = orig - h;
                const Eigen::Matrix2d Pm = stress(model, Fp);
                *slots[c] = orig;
                const Eigen::Matrix2d dP = (Pp - Pm) / (2.0 * h);
                H(0, c) = dP(0, 0);
                H(1, c) = dP(0, 1);
                H(2, c) = dP(1, 0);
                H(3, c) = dP(1, 1);
            }
        }

        int dof[6];
        for (int a = 0; a < 3; ++a)
            for (int i = 0; i < 2; ++i) dof[2 * a + i] = 2 * mesh.elements[e][a] + i;

        for (int a = 0; a < 3; ++a)
            for (int i = 0; i < 2; ++i)
                f[dof[2 * a + i]] += area * (P(i, 0) * g(a, 0) + P(i, 1) * g(a, 1));

        if (tangent) {
            // k_{(a,i),(b,m)} = area * H_{(i j),(m n)} g_a_j g_b_n
            for (int a = 0; a < 3; ++a)
                for (int i = 0; i < 2; ++i) {
                    const int row = dof[2 * a + i];
                    if (part && !part->is_free(row)) continue;
                    for (int b = 0; b < 3; ++b)
                        for (int m = 0; m < 2; ++m) {
                            const int col = dof[2 * b + m];
                            if (part && !part->is_free(col)) continue;
                            double k = 0.0;
                            for (int jj = 0; jj < 2; ++jj)
                                for (int nn = 0; nn < 2; ++nn)
                                    k += H(2 * i + jj, 2 * m + nn) * g(a, jj) * g(b, nn);
                            tangent->emplace_back(part->free_index[row], part->free_index[col],
                                                  area * k);
                        }
                }
        }
    }
    return f;
}

} // namespace detail

/// Displacement-controlled nonlinear forward solve: Newton iteration on the
/// free-DOF residual at each load step, with automatic bisection of the load
/// increment on divergence. Records nodal displacements and per-subset
/// reaction sums at every requested step.
inline LoadstepData forward_solve(const Mesh& mesh, const DofPartition& part,
                                  const MaterialModel& model, const GenerationConfig& cfg,
                                  BenchmarkModel benchmark = BenchmarkModel::NH2)
{
    if (!(cfg.delta_increment > 0.0))
        throw UsageError("loading schedule requires a positive delta increment");
    const int n_steps = cfg.n_steps > 0 ? cfg.n_steps : default_loadsteps(benchmark);
    const int i_left = part.subset_index("left");
    const int i_bottom = part.subset_index("bottom");
    const int i_right = part.subset_index("right");
    const int i_top = part.subset_index("top");
    if (i_left < 0 || i_bottom < 0 || i_right < 0 || i_top < 0)
        throw UsageError("forward_solve expects subsets left/bottom/right/top");

    auto apply_bcs = [&](Eigen::VectorXd& u, double delta) {
        for (std::size_t s = 0; s < part.n_subsets(); ++s) {
            double value = 0.0;
            if (static_cast<int>(s) == i_right) value = delta;
            else if (static_cast<int>(s) == i_top) value = cfg.asymmetry * delta;
            const auto& sub = part.subsets[s];
            for (int node : sub.nodes) u[2 * node + sub.direction] = value;
        }
    };

    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(mesh.n_dofs()));

    auto newton = [&](double delta) -> bool {
        apply_bcs(u, delta);
        const Eigen::VectorXd u_entry = u;
        for (int it = 0; it < cfg.newton_max_iter; ++it) {
            Eigen::VectorXd f;
            std::vector<Eigen::Triplet<double>> trip;
            try {
                f = detail::internal_forces(mesh, model, u, &part, &trip, cfg.fd_tangent);
            } catch (const InvertedElementError&) {
                u = u_entry;
                return false;
            }
            double res = 0.0;
            for (std::size_t d = 0; d < mesh.n_dofs(); ++d)
                if (part.is_free(static_cast<int>(d)))
                    res = std::max(res, std::abs(f[static_cast<Eigen::Index>(d)]));
            if (res <= cfg.newton_tol) return true;

            Eigen::SparseMatrix<double> K(part.n_free, part.n_free);
            K.setFromTriplets(trip.begin(), trip.end());
            Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(K);
            if (ldlt.info() != Eigen::Success) {
                u = u_entry;
                return false;
            }
            Eigen::VectorXd r(part.n_free);
            for (std::size_t d = 0; d < mesh.n_dofs(); ++d) {
                const int fr = part.free_index[d];
                if (fr >= 0) r[fr] = f[static_cast<Eigen::Index>(d)];
            }
            const Eigen::VectorXd du = ldlt.solve(-r);
            if (!du.allFinite()) {
                u = u_entry;
                return false;
            }
            for (std::size_t d = 0; d < mesh.n_dofs(); ++d) {
                const int fr = part.free_index[d];
                if (fr >= 0) u[static_cast<Eigen::Index>(d)] += du[fr];
            }
        }
        u = u_entry;
        return false;
    };

    // continuation with recursive bisection of the increment
    std::function<void(double, double, int)> advance = [&](double from, double to, int depth) {
        if (newton(to)) return;
        if (depth >= cfg.max_bisections)
            throw NumericsError("Newton solver diverged at delta = " + std::to_string(to) +
                                " despite " + std::to_string(cfg.max_bisections) +
                                " bisection levels");
        const double mid = 0.5 * (from + to);
        advance(from, mid, depth + 1);
        advance(mid, to, depth + 1);
    };

    LoadstepData data;
    double delta_prev = 0.0;
    for (int l = 1; l <= n_steps; ++l) {
        const double delta = cfg.delta_increment * l;
        advance(delta_prev, delta, 0);
        delta_prev = delta;

        const Eigen::VectorXd f = detail::internal_forces(mesh, model, u, nullptr, nullptr, false);
        Loadstep step;
        step.u = u;
        step.reactions.assign(part.n_subsets(), 0.0);
        for (std::size_t d = 0; d < mesh.n_dofs(); ++d) {
            const int s = part.dof_subset[d];
            if (s >= 0) step.reactions[static_cast<std::size_t>(s)] += f[static_cast<Eigen::Index>(d)];
        }
        data.steps.push_back(std::move(step));
    }
    return data;
}

/// Adds i.i.d. Gaussian noise with absolute floor sigma to every displacement
/// DOF of every load step; reactions are untouched. sigma = 0 is an exact
/// pass-through.
inline LoadstepData add_noise(const LoadstepData& data, double sigma, std::uint64_t seed)
{
    if (sigma < 0.0) throw UsageError("noise level must be nonnegative");
    if (sigma == 0.0) return data;
    LoadstepData out = data;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (auto& step : out.steps)
        for (Eigen::Index d = 0; d < step.u.size(); ++d) step.u[d] += gauss(rng);
    return out;
}

} // namespace hyperfit
