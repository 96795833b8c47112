#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <vector>

#include "hyperfit/errors.hpp"
#include "hyperfit/features.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/mesh.hpp"

namespace hyperfit {

// Fraction of rejected (J <= 0) elements above which a load step is
// considered unusable rather than merely noisy.
inline constexpr double kMaxSkippedElementFraction = 0.05;

struct FreeSystem {
    Eigen::MatrixXd A; // |D^free| x n_f
    Eigen::VectorXd b; // traction integral; zero under homogeneous Neumann
    int skipped_elements = 0;
};

struct FixedSystem {
    Eigen::MatrixXd A; // n_alpha x n_f
    Eigen::VectorXd b; // measured reaction sums
    int skipped_elements = 0;
};

namespace detail {

// Per-element feature-force rows: contribution of element e to DOF (a, i)
// and feature k is area * sum_j dQ_k/dF_ij * gradN_a_j. The visitor
// receives (global dof, feature-row view) per element node/direction.
template <typename Visitor>
int for_each_element_row(const Mesh& mesh, const FeatureLibrary& lib, const Eigen::VectorXd& u,
                         Visitor&& visit)
{
    const auto n_f = static_cast<Eigen::Index>(lib.size());
    Eigen::VectorXd row(n_f);
    int skipped = 0;
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const auto ue = mesh.gather(e, u);
        const DeformationGradient F = deformation_gradient(mesh.grads[e], ue);
        Eigen::MatrixXd dq; // n_f x 4, columns (F11, F12, F21, F22)
        try {
            dq = lib.derivatives(F);
        } catch (const InvertedElementError&) {
            ++skipped;
            continue;
        }
        const double area = mesh.areas[e];
        for (int a = 0; a < 3; ++a) {
            const double gx = mesh.grads[e](a, 0);
            const double gy = mesh.grads[e](a, 1);
            for (int i = 0; i < 2; ++i) {
                row = area * (gx * dq.col(2 * i) + gy * dq.col(2 * i + 1));
                visit(2 * mesh.elements[e][a] + i, row);
            }
        }
    }
    if (skipped > 0)
        std::fprintf(stderr, "warning: %d of %zu elements rejected (J <= 0)\n", skipped,
                     mesh.n_elements());
    if (skipped > kMaxSkippedElementFraction * static_cast<double>(mesh.n_elements()))
        throw DataQualityError(std::to_string(skipped) + " of " +
                               std::to_string(mesh.n_elements()) +
                               " elements rejected (J <= 0); displacement data unusable");
    return skipped;
}

} // namespace detail

/// Bulk linear-momentum rows at the free DOFs for one load step,
/// integrated by one-point quadrature.
inline FreeSystem assemble_free(const Mesh& mesh, const DofPartition& part,
                                const Eigen::VectorXd& u, const FeatureLibrary& lib)
{
    if (u.size() != static_cast<Eigen::Index>(mesh.n_dofs()))
        throw UsageError("displacement vector length does not match mesh");
    FreeSystem sys;
    sys.A = Eigen::MatrixXd::Zero(part.n_free, static_cast<Eigen::Index>(lib.size()));
    sys.b = Eigen::VectorXd::Zero(part.n_free);
    sys.skipped_elements =
        detail::for_each_element_row(mesh, lib, u, [&](int dof, const Eigen::VectorXd& row) {
            const int r = part.free_index[dof];
            if (r >= 0) sys.A.row(r) += row;
        });
    return sys;
}

/// Reaction-balance rows: one row per Dirichlet subset, the sum of the
/// internal-force rows of its DOFs, equated to the measured reaction sum.
inline FixedSystem assemble_fixed(const Mesh& mesh, const DofPartition& part,
                                  const Eigen::VectorXd& u, const std::vector<double>& reactions,
                                  const FeatureLibrary& lib)
{
    if (u.size() != static_cast<Eigen::Index>(mesh.n_dofs()))
        throw UsageError("displacement vector length does not match mesh");
    if (reactions.size() != part.n_subsets())
        throw SchemaError("expected " + std::to_string(part.n_subsets()) +
                          " reaction sums, got " + std::to_string(reactions.size()));
    FixedSystem sys;
    sys.A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(part.n_subsets()),
                                  static_cast<Eigen::Index>(lib.size()));
    sys.b = Eigen::Map<const Eigen::VectorXd>(reactions.data(),
                                              static_cast<Eigen::Index>(reactions.size()));
    sys.skipped_elements =
        detail::for_each_element_row(mesh, lib, u, [&](int dof, const Eigen::VectorXd& row) {
            const int s = part.dof_subset[dof];
            if (s >= 0) sys.A.row(s) += row;
        });
    return sys;
}

// Reduced normal equations accumulated over load steps:
//   A = sum_l (A_free^T A_free + lambda_r A_fix^T A_fix)
//   b = sum_l (A_free^T b_free + lambda_r A_fix^T b_fix)
// The const_term carries sum_l (|b_free|^2 + lambda_r |b_fix|^2) so the full
// least-squares loss is recoverable.
struct EquilibriumSystem {
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
    double const_term = 0.0;
    double lambda_r = 100.0;
    int n_steps = 0;
};

/// Streams per-step tall systems into the normal equations; the tall blocks
/// can be discarded after each call.
class EquilibriumAccumulator {
public:
    explicit EquilibriumAccumulator(double lambda_r = 100.0) { sys_.lambda_r = lambda_r; }

    void add_step(const FreeSystem& free_sys, const FixedSystem& fixed_sys)
    {
        const Eigen::Index n_f = free_sys.A.cols();
        if (fixed_sys.A.cols() != n_f)
            throw UsageError("free/fixed systems disagree on feature count");
        if (sys_.n_steps == 0) {
            sys_.A = Eigen::MatrixXd::Zero(n_f, n_f);
            sys_.b = Eigen::VectorXd::Zero(n_f);
        } else if (sys_.A.rows() != n_f) {
            throw UsageError("feature count changed between load steps");
        }
        sys_.A += free_sys.A.transpose() * free_sys.A +
                  sys_.lambda_r * fixed_sys.A.transpose() * fixed_sys.A;
        sys_.b += free_sys.A.transpose() * free_sys.b +
                  sys_.lambda_r * fixed_sys.A.transpose() * fixed_sys.b;
        sys_.const_term += free_sys.b.squaredNorm() + sys_.lambda_r * fixed_sys.b.squaredNorm();
        sys_.n_steps += 1;
    }

    const EquilibriumSystem& system() const
    {
        if (sys_.n_steps < 1) throw UsageError("no load steps accumulated");
        return sys_;
    }

private:
    EquilibriumSystem sys_;
};

struct StepSystems {
    FreeSystem free_sys;
    FixedSystem fixed_sys;
};

inline EquilibriumSystem reduce(const std::vector<StepSystems>& steps, double lambda_r = 100.0)
{
    EquilibriumAccumulator acc(lambda_r);
    for (const auto& s : steps) acc.add_step(s.free_sys, s.fixed_sys);
    return acc.system();
}

/// Invariants at every usable quadrature point of one load step; points with
/// J <= 0 are dropped (same policy as assembly).
inline std::vector<InvariantSet> collect_invariants(const Mesh& mesh, const Eigen::VectorXd& u)
{
    std::vector<InvariantSet> out;
    out.reserve(mesh.n_elements());
    for (std::size_t e = 0; e < mesh.n_elements(); ++e) {
        const DeformationGradient F = deformation_gradient(mesh.grads[e], mesh.gather(e, u));
        try {
            out.push_back(invariants(F));
        } catch (const InvertedElementError&) {
        }
    }
    return out;
}

struct AssembledProblem {
    EquilibriumSystem system;
    std::vector<InvariantSet> quad_invariants; // all load steps concatenated
};

/// Full assembly of a dataset: per-step tall systems are built, folded into
/// the normal equations and discarded.
inline AssembledProblem assemble_dataset(const Dataset& ds, const FeatureLibrary& lib,
                                         double lambda_r = 100.0)
{
    if (ds.loads.n_steps() < 1) throw UsageError("dataset has no load steps");
    AssembledProblem out;
    EquilibriumAccumulator acc(lambda_r);
    for (const auto& step : ds.loads.steps) {
        const FreeSystem fs = assemble_free(ds.mesh, ds.partition, step.u, lib);
        const FixedSystem xs = assemble_fixed(ds.mesh, ds.partition, step.u, step.reactions, lib);
        acc.add_step(fs, xs);
        const auto inv = collect_invariants(ds.mesh, step.u);
        out.quad_invariants.insert(out.quad_invariants.end(), inv.begin(), inv.end());
    }
    out.system = acc.system();
    return out;
}

/// Debug dump of the reduced system as a plain-text matrix file.
inline void write_debug_system(const std::string& path, const EquilibriumSystem& sys)
{
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open '" + path + "' for writing");
    out.precision(17);
    out << "# A_eqb " << sys.A.rows() << " x " << sys.A.cols() << ", lambda_r " << sys.lambda_r
        << ", steps " << sys.n_steps << "\n";
    out << sys.A << "\n";
    out << "# b_eqb\n" << sys.b.transpose() << "\n";
}

} // namespace hyperfit
