#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "hyperfit/dual.hpp"
#include "hyperfit/errors.hpp"

namespace hyperfit {

/// Raised when a deformation state has non-positive Jacobian.
class InvertedElementError : public NumericsError {
public:
    explicit InvertedElementError(double J)
        : NumericsError("inverted deformation state, J = " + std::to_string(J))
    {
    }
};

// In-plane deformation gradient under plane strain; the out-of-plane
// component is fixed at 1 and never stored.
template <typename T>
struct Deformation2 {
    T F11{1.0}, F12{0.0}, F21{0.0}, F22{1.0};
};

using DeformationGradient = Deformation2<double>;

/// 3D invariants of C = F^T F with C33 = 1, plus the deviatoric pair and J.
template <typename T>
struct InvariantsT {
    T I1, I2, I3;
    T I1bar, I2bar;
    T J;
};

using InvariantSet = InvariantsT<double>;

/// F = I + sum_a u^a (x) grad N^a for one linear triangle.
/// `grad_N` rows are the three shape-function gradients, `u_nodes` rows the
/// three nodal displacement vectors.
inline DeformationGradient deformation_gradient(const Eigen::Matrix<double, 3, 2>& grad_N,
                                                const Eigen::Matrix<double, 3, 2>& u_nodes)
{
    DeformationGradient F;
    for (int a = 0; a < 3; ++a) {
        F.F11 += u_nodes(a, 0) * grad_N(a, 0);
        F.F12 += u_nodes(a, 0) * grad_N(a, 1);
        F.F21 += u_nodes(a, 1) * grad_N(a, 0);
        F.F22 += u_nodes(a, 1) * grad_N(a, 1);
    }
    return F;
}

template <typename T>
InvariantsT<T> invariants(const Deformation2<T>& F)
{
    const T J = F.F11 * F.F22 - F.F12 * F.F21; // det F, F33 = 1
    if (!(scalar_value(J) > 0.0)) throw InvertedElementError(scalar_value(J));

    const T C11 = F.F11 * F.F11 + F.F21 * F.F21;
    const T C22 = F.F12 * F.F12 + F.F22 * F.F22;

    const T I1 = C11 + C22 + 1.0;
    // principal-minor sum of the augmented C; det(C_2x2) = J^2. Avoids the
    // catastrophic cancellation of 0.5 (I1^2 - tr C^2) at extreme stretches,
    // where the admissibility paths sample up to gamma ~ 1e9.
    const T I2 = J * J + C11 + C22;
    const T I3 = J * J;

    using std::pow; // duals resolve to hyperfit::pow via ADL
    const T Jm23 = pow(J, -2.0 / 3.0);
    const T I1bar = I1 * Jm23;
    const T I2bar = I2 * (Jm23 * Jm23);
    return {I1, I2, I3, I1bar, I2bar, J};
}

enum class DeformationPathKind { UT, UC, SS, BT, BC, PS };

inline const char* to_string(DeformationPathKind k)
{
    switch (k) {
    case DeformationPathKind::UT: return "UT";
    case DeformationPathKind::UC: return "UC";
    case DeformationPathKind::SS: return "SS";
    case DeformationPathKind::BT: return "BT";
    case DeformationPathKind::BC: return "BC";
    case DeformationPathKind::PS: return "PS";
    }
    throw UsageError("invalid deformation path kind");
}

inline DeformationPathKind path_from_string(const std::string& s)
{
    if (s == "UT") return DeformationPathKind::UT;
    if (s == "UC") return DeformationPathKind::UC;
    if (s == "SS") return DeformationPathKind::SS;
    if (s == "BT") return DeformationPathKind::BT;
    if (s == "BC") return DeformationPathKind::BC;
    if (s == "PS") return DeformationPathKind::PS;
    throw UsageError("unknown deformation path '" + s + "' (expected UT, UC, SS, BT, BC or PS)");
}

constexpr std::array<DeformationPathKind, 6> all_deformation_paths = {
    DeformationPathKind::UT, DeformationPathKind::UC, DeformationPathKind::SS,
    DeformationPathKind::BT, DeformationPathKind::BC, DeformationPathKind::PS,
};

/// Canonical deformation paths used for admissibility checks and model
/// evaluation: uniaxial/biaxial tension and compression, simple shear, pure
/// shear. gamma = 0 gives the identity on every path.
inline DeformationGradient deformation_path(DeformationPathKind kind, double gamma)
{
    if (!(gamma >= 0.0)) throw UsageError("deformation path requires gamma >= 0");
    DeformationGradient F;
    const double s = 1.0 + gamma;
    switch (kind) {
    case DeformationPathKind::UT: F.F11 = s; break;
    case DeformationPathKind::UC: F.F11 = 1.0 / s; break;
    case DeformationPathKind::SS: F.F12 = gamma; break;
    case DeformationPathKind::BT: F.F11 = s; F.F22 = s; break;
    case DeformationPathKind::BC: F.F11 = 1.0 / s; F.F22 = 1.0 / s; break;
    case DeformationPathKind::PS: F.F11 = s; F.F22 = 1.0 / s; break;
    }
    return F;
}

} // namespace hyperfit
