#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "hyperfit/dual.hpp"
#include "hyperfit/errors.hpp"
#include "hyperfit/kinematics.hpp"

namespace hyperfit {

enum class FeatureKind : std::uint8_t { MooneyRivlin, Volumetric, Log };

// One scalar feature of (I1bar, I2bar, J):
//   MooneyRivlin: (I1bar - 3)^i (I2bar - 3)^j
//   Volumetric:   (J - 1)^{2k}
//   Log:          log(I2bar / 3)
struct FeatureDescriptor {
    FeatureKind kind = FeatureKind::MooneyRivlin;
    int i = 0; // exponent of (I1bar - 3)
    int j = 0; // exponent of (I2bar - 3)
    int k = 0; // volumetric half-exponent

    static FeatureDescriptor mooney_rivlin(int i, int j)
    {
        return {FeatureKind::MooneyRivlin, i, j, 0};
    }
    static FeatureDescriptor volumetric(int k) { return {FeatureKind::Volumetric, 0, 0, k}; }
    static FeatureDescriptor log_feature() { return {FeatureKind::Log, 0, 0, 0}; }

    bool operator==(const FeatureDescriptor&) const = default;

    /// Canonical name used in model files: MR(i=..,j=..), VOL(k=..), LOG.
    std::string name() const
    {
        switch (kind) {
        case FeatureKind::MooneyRivlin:
            return "MR(i=" + std::to_string(i) + ",j=" + std::to_string(j) + ")";
        case FeatureKind::Volumetric: return "VOL(k=" + std::to_string(k) + ")";
        case FeatureKind::Log: return "LOG";
        }
        throw UsageError("invalid feature kind");
    }

    /// Human-readable factor string, e.g. (I1b-3)^2(I2b-3) or (J-1)^4.
    std::string display() const
    {
        auto power = [](const std::string& base, int e) -> std::string {
            if (e == 0) return "";
            if (e == 1) return base;
            return base + "^" + std::to_string(e);
        };
        switch (kind) {
        case FeatureKind::MooneyRivlin: return power("(I1b-3)", i) + power("(I2b-3)", j);
        case FeatureKind::Volumetric: return power("(J-1)", 2 * k);
        case FeatureKind::Log: return "log(I2b/3)";
        }
        throw UsageError("invalid feature kind");
    }

    static FeatureDescriptor parse(const std::string& s)
    {
        if (s == "LOG") return log_feature();
        int a = 0, b = 0;
        if (std::sscanf(s.c_str(), "MR(i=%d,j=%d)", &a, &b) == 2) return mooney_rivlin(a, b);
        if (std::sscanf(s.c_str(), "VOL(k=%d)", &a) == 1) return volumetric(a);
        throw SchemaError("unrecognized feature name '" + s + "'");
    }
};

// Ordered catalogue of candidate strain-energy features. The canonical
// generalized Mooney-Rivlin library enumerates, for total degree
// d = 1..N, all splits (I1bar-3)^i (I2bar-3)^{d-i} with i ascending, then
// the volumetric features k = 1..M, then optionally the logarithmic term.
// N = M = 7 with the log term gives 43 features.
class FeatureLibrary {
public:
    FeatureLibrary() = default;

    explicit FeatureLibrary(std::vector<FeatureDescriptor> features)
        : features_(std::move(features))
    {
        for (const auto& f : features_) {
            if (f.i < 0 || f.j < 0 || f.k < 0) throw UsageError("negative feature exponent");
            if (f.kind == FeatureKind::Volumetric && f.k < 1)
                throw UsageError("volumetric feature requires k >= 1");
            max_i_ = std::max(max_i_, f.i);
            max_j_ = std::max(max_j_, f.j);
            has_log_ = has_log_ || f.kind == FeatureKind::Log;
        }
        if (max_i_ >= kMaxPower || max_j_ >= kMaxPower)
            throw UsageError("feature exponents above " + std::to_string(kMaxPower - 1) +
                             " are not supported");
    }

    static FeatureLibrary generalized_mooney_rivlin(int N = 7, int M = 7, bool include_log = true)
    {
        if (N < 1 || M < 1) throw UsageError("library orders N, M must be >= 1");
        std::vector<FeatureDescriptor> f;
        for (int d = 1; d <= N; ++d)
            for (int i = 0; i <= d; ++i) f.push_back(FeatureDescriptor::mooney_rivlin(i, d - i));
        for (int k = 1; k <= M; ++k) f.push_back(FeatureDescriptor::volumetric(k));
        if (include_log) f.push_back(FeatureDescriptor::log_feature());
        return FeatureLibrary(std::move(f));
    }

    std::size_t size() const { return features_.size(); }
    const FeatureDescriptor& operator[](std::size_t k) const { return features_[k]; }
    const std::vector<FeatureDescriptor>& descriptors() const { return features_; }
    bool has_log() const { return has_log_; }

    /// Index of a descriptor, or -1 if absent.
    int index_of(const FeatureDescriptor& d) const
    {
        for (std::size_t k = 0; k < features_.size(); ++k)
            if (features_[k] == d) return static_cast<int>(k);
        return -1;
    }

    /// Library with feature k dropped; remaining columns keep their order.
    FeatureLibrary without(std::size_t k) const
    {
        std::vector<FeatureDescriptor> f = features_;
        f.erase(f.begin() + static_cast<std::ptrdiff_t>(k));
        return FeatureLibrary(std::move(f));
    }

    // Evaluates all features into out[0..size). Generic over the scalar so
    // dual numbers propagate exact derivatives through the same code path.
    template <typename T>
    void evaluate(const InvariantsT<T>& inv, T* out) const
    {
        using std::log; // duals resolve to hyperfit::log via ADL
        const T a = inv.I1bar - 3.0;
        const T b = inv.I2bar - 3.0;
        std::array<T, kMaxPower> ap, bp;
        ap[0] = T(1.0);
        bp[0] = T(1.0);
        for (int m = 1; m <= max_i_; ++m) ap[m] = ap[m - 1] * a;
        for (int m = 1; m <= max_j_; ++m) bp[m] = bp[m - 1] * b;
        const T v = inv.J - 1.0;
        const T v2 = v * v;

        for (std::size_t n = 0; n < features_.size(); ++n) {
            const FeatureDescriptor& f = features_[n];
            switch (f.kind) {
            case FeatureKind::MooneyRivlin: out[n] = ap[f.i] * bp[f.j]; break;
            case FeatureKind::Volumetric: {
                T w = v2;
                for (int m = 1; m < f.k; ++m) w = w * v2;
                out[n] = w;
                break;
            }
            case FeatureKind::Log:
                if (!(inv.I2bar > 0.0))
                    throw NumericsError("log feature undefined: I2bar <= 0");
                out[n] = log(inv.I2bar / 3.0);
                break;
            }
        }
    }

    Eigen::VectorXd evaluate(const InvariantSet& inv) const
    {
        Eigen::VectorXd q(size());
        evaluate(inv, q.data());
        return q;
    }

    /// Exact derivatives dQ_k/dF_{ij} by one forward-mode pass; columns are
    /// ordered (F11, F12, F21, F22).
    Eigen::MatrixXd derivatives(const DeformationGradient& F) const
    {
        using D = Dual<double, 4>;
        Deformation2<D> Fd;
        Fd.F11 = D::seeded(F.F11, 0);
        Fd.F12 = D::seeded(F.F12, 1);
        Fd.F21 = D::seeded(F.F21, 2);
        Fd.F22 = D::seeded(F.F22, 3);
        const auto inv = invariants(Fd);
        std::vector<D> q(size());
        evaluate(inv, q.data());
        Eigen::MatrixXd dq(size(), 4);
        for (std::size_t n = 0; n < size(); ++n)
            for (int c = 0; c < 4; ++c) dq(static_cast<Eigen::Index>(n), c) = q[n].dot[c];
        return dq;
    }

private:
    static constexpr int kMaxPower = 16;
    std::vector<FeatureDescriptor> features_;
    int max_i_ = 0;
    int max_j_ = 0;
    bool has_log_ = false;
};

inline std::size_t count_nonzero(const Eigen::VectorXd& v)
{
    std::size_t n = 0;
    for (Eigen::Index k = 0; k < v.size(); ++k)
        if (v[k] != 0.0) ++n;
    return n;
}

// A sparse linear combination over a feature library. Inactive coefficients
// are stored as exact zeros.
struct MaterialModel {
    FeatureLibrary library;
    Eigen::VectorXd theta;

    MaterialModel() = default;
    MaterialModel(FeatureLibrary lib, Eigen::VectorXd coeffs)
        : library(std::move(lib)), theta(std::move(coeffs))
    {
        if (static_cast<std::size_t>(theta.size()) != library.size())
            throw UsageError("coefficient vector length does not match library size");
    }

    std::size_t n_active() const { return count_nonzero(theta); }

    std::vector<std::size_t> active_indices() const
    {
        std::vector<std::size_t> idx;
        for (Eigen::Index k = 0; k < theta.size(); ++k)
            if (theta[k] != 0.0) idx.push_back(static_cast<std::size_t>(k));
        return idx;
    }

    /// theta restricted to one named coefficient, 0 if the feature is absent.
    double coefficient(const FeatureDescriptor& d) const
    {
        const int k = library.index_of(d);
        return k < 0 ? 0.0 : theta[k];
    }

    // W evaluated from invariants; inactive features are skipped so sparse
    // models stay cheap along dense sampling paths.
    template <typename T>
    T energy(const InvariantsT<T>& inv) const
    {
        using std::log;
        const T a = inv.I1bar - 3.0;
        const T b = inv.I2bar - 3.0;
        const T v = inv.J - 1.0;
        const T v2 = v * v;
        T w = T(0.0);
        for (std::size_t n = 0; n < library.size(); ++n) {
            const double c = theta[static_cast<Eigen::Index>(n)];
            if (c == 0.0) continue;
            const FeatureDescriptor& f = library[n];
            T q = T(1.0);
            switch (f.kind) {
            case FeatureKind::MooneyRivlin:
                for (int m = 0; m < f.i; ++m) q = q * a;
                for (int m = 0; m < f.j; ++m) q = q * b;
                break;
            case FeatureKind::Volumetric:
                for (int m = 0; m < f.k; ++m) q = q * v2;
                break;
            case FeatureKind::Log:
                if (!(inv.I2bar > 0.0))
                    throw NumericsError("log feature undefined: I2bar <= 0");
                q = log(inv.I2bar / 3.0);
                break;
            }
            w += c * q;
        }
        return w;
    }

    template <typename T>
    T energy(const Deformation2<T>& F) const
    {
        return energy(invariants(F));
    }
};

/// W = Q^T theta at a deformation state.
inline double strain_energy(const MaterialModel& model, const DeformationGradient& F)
{
    return model.energy(F);
}

/// First Piola-Kirchhoff stress P = (dQ^T/dF) theta, in-plane 2x2 block.
inline Eigen::Matrix2d stress(const MaterialModel& model, const DeformationGradient& F)
{
    using D = Dual<double, 4>;
    Deformation2<D> Fd;
    Fd.F11 = D::seeded(F.F11, 0);
    Fd.F12 = D::seeded(F.F12, 1);
    Fd.F21 = D::seeded(F.F21, 2);
    Fd.F22 = D::seeded(F.F22, 3);
    const D w = model.energy(Fd);
    Eigen::Matrix2d P;
    P << w.dot[0], w.dot[1], w.dot[2], w.dot[3];
    return P;
}

struct EnergyDerivatives {
    double W;
    Eigen::Matrix2d P;  // dW/dF
    Eigen::Matrix4d H;  // d2W/dF dF, rows/cols ordered (F11, F12, F21, F22)
};

/// Value, stress and tangent in one nested forward-mode pass.
inline EnergyDerivatives energy_derivatives(const MaterialModel& model,
                                            const DeformationGradient& F)
{
    using D1 = Dual<double, 4>;
    using D2 = Dual<D1, 4>;
    Deformation2<D2> Fd;
    const double comps[4] = {F.F11, F.F12, F.F21, F.F22};
    D2* slots[4] = {&Fd.F11, &Fd.F12, &Fd.F21, &Fd.F22};
    for (int c = 0; c < 4; ++c) {
        D2 x(D1::seeded(comps[c], static_cast<std::size_t>(c)));
        x.dot[static_cast<std::size_t>(c)] = D1(1.0);
        *slots[c] = x;
    }
    const D2 w = model.energy(Fd);
    EnergyDerivatives out;
    out.W = w.val.val;
    out.P << w.val.dot[0], w.val.dot[1], w.val.dot[2], w.val.dot[3];
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) out.H(r, c) = w.dot[static_cast<std::size_t>(r)].dot[static_cast<std::size_t>(c)];
    return out;
}

} // namespace hyperfit
