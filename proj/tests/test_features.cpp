#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "hyperfit/datagen.hpp"
#include "hyperfit/features.hpp"
#include "hyperfit/kinematics.hpp"

using namespace hyperfit;

namespace {

DeformationGradient random_state(std::mt19937_64& rng)
{
    // rejection-sample J into [0.5, 2]
    std::uniform_real_distribution<double> unif(-0.5, 0.5);
    for (;;) {
        DeformationGradient F;
        F.F11 = 1.0 + unif(rng);
        F.F12 = unif(rng);
        F.F21 = unif(rng);
        F.F22 = 1.0 + unif(rng);
        const double J = F.F11 * F.F22 - F.F12 * F.F21;
        if (J >= 0.5 && J <= 2.0) return F;
    }
}

TEST(Features, LibrarySizeAndOrdering)
{
    const auto lib = FeatureLibrary::generalized_mooney_rivlin(7, 7, true);
    EXPECT_EQ(lib.size(), 43u);
    EXPECT_EQ(FeatureLibrary::generalized_mooney_rivlin(7, 7, false).size(), 42u);

    // degree-ascending Mooney-Rivlin block, i ascending within a degree
    EXPECT_EQ(lib[0], FeatureDescriptor::mooney_rivlin(0, 1)); // (I2b-3)
    EXPECT_EQ(lib[1], FeatureDescriptor::mooney_rivlin(1, 0)); // (I1b-3)
    EXPECT_EQ(lib[2], FeatureDescriptor::mooney_rivlin(0, 2));
    EXPECT_EQ(lib[3], FeatureDescriptor::mooney_rivlin(1, 1));
    EXPECT_EQ(lib[4], FeatureDescriptor::mooney_rivlin(2, 0));
    EXPECT_EQ(lib[34], FeatureDescriptor::mooney_rivlin(7, 0));
    EXPECT_EQ(lib[35], FeatureDescriptor::volumetric(1));
    EXPECT_EQ(lib[41], FeatureDescriptor::volumetric(7));
    EXPECT_EQ(lib[42], FeatureDescriptor::log_feature());
}

TEST(Features, ZeroAtReference)
{
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    const auto q = lib.evaluate(invariants(DeformationGradient{}));
    for (Eigen::Index k = 0; k < q.size(); ++k) EXPECT_EQ(q[k], 0.0) << "feature " << k;

    // all derivatives stationary at the reference state
    const auto dq = lib.derivatives(DeformationGradient{});
    EXPECT_LE(dq.cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Features, VolumetricValueUnderUniaxialStretch)
{
    // F = diag(2, 1): J = 2, so (J-1)^2 = 1
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    const auto q = lib.evaluate(invariants(deformation_path(DeformationPathKind::UT, 1.0)));
    EXPECT_DOUBLE_EQ(q[lib.index_of(FeatureDescriptor::volumetric(1))], 1.0);
}

TEST(Features, DerivativeOracle)
{
    // central finite differences of every feature w.r.t. every in-plane
    // component, 100 random states with J in [0.5, 2]
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    std::mt19937_64 rng(23);
    const double h = 1e-6;
    for (int trial = 0; trial < 100; ++trial) {
        DeformationGradient F = random_state(rng);
        const Eigen::MatrixXd dq = lib.derivatives(F);
        double* slots[4] = {&F.F11, &F.F12, &F.F21, &F.F22};
        for (int c = 0; c < 4; ++c) {
            const double orig = *slots[c];
            *slots[c] = orig + h;
            const Eigen::VectorXd qp = lib.evaluate(invariants(F));
            *slots[c] = orig - h;
            const Eigen::VectorXd qm = lib.evaluate(invariants(F));
            *slots[c] = orig;
            for (Eigen::Index k = 0; k < qp.size(); ++k) {
                const double fd = (qp[k] - qm[k]) / (2.0 * h);
                const double exact = dq(k, c);
                // 1e-6 relative with a 1e-8 absolute floor (FD truncation
                // dominates near stationary points of the high powers)
                EXPECT_NEAR(exact, fd, std::max(1e-6 * std::abs(fd), 1e-8));
            }
        }
    }
}

TEST(Features, VolumetricDerivativeClosedForm)
{
    // d(J-1)^2/dF11 = 2 (J-1) dJ/dF11 = 2 (J-1) F22 = 2 at F = diag(2,1)
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    const auto F = deformation_path(DeformationPathKind::UT, 1.0);
    const auto dq = lib.derivatives(F);
    const int k = lib.index_of(FeatureDescriptor::volumetric(1));
    EXPECT_NEAR(dq(k, 0), 2.0, 1e-14);
}

TEST(Features, StrainEnergyClosedFormSimpleShear)
{
    // NH2 along simple shear: J = 1 kills the volumetric term and
    // I1bar = 3 + gamma^2, so W = 0.5 gamma^2 exactly.
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    const auto model = truth_model(BenchmarkModel::NH2, lib);
    for (double gamma : {0.1, 0.5, 1.0, 2.0}) {
        const double W = strain_energy(model, deformation_path(DeformationPathKind::SS, gamma));
        EXPECT_NEAR(W, 0.5 * gamma * gamma, 1e-13 * (1.0 + gamma * gamma));
    }
    EXPECT_DOUBLE_EQ(strain_energy(model, DeformationGradient{}), 0.0);
}

TEST(Features, StressZeroAtReferenceAndFdConsistent)
{
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    const auto model = truth_model(BenchmarkModel::NH2, lib);
    EXPECT_LE(stress(model, DeformationGradient{}).cwiseAbs().maxCoeff(), 1e-14);

    // P11 along UT vs central difference of W in F11
    const double h = 1e-6;
    for (double gamma : {0.2, 0.6, 1.0}) {
        auto F = deformation_path(DeformationPathKind::UT, gamma);
        const double p11 = stress(model, F)(0, 0);
        F.F11 += h;
        const double wp = strain_energy(model, F);
        F.F11 -= 2 * h;
        const double wm = strain_energy(model, F);
        const double fd = (wp - wm) / (2 * h);
        EXPECT_NEAR(p11, fd, 1e-6 * std::abs(fd));
    }
}

TEST(Features, VolumetricModelsDoNoWorkOnPureShear)
{
    // PS is isochoric, so any purely volumetric model has W = 0 and zero
    // stress power along the path
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lib.size()));
    theta[lib.index_of(FeatureDescriptor::volumetric(1))] = 1.5;
    theta[lib.index_of(FeatureDescriptor::volumetric(3))] = 0.7;
    const MaterialModel model(lib, theta);
    for (double gamma : {0.3, 1.0, 4.0}) {
        const auto F = deformation_path(DeformationPathKind::PS, gamma);
        EXPECT_NEAR(strain_energy(model, F), 0.0, 1e-12);
        const Eigen::Matrix2d P = stress(model, F);
        // stress power along the path: P : dF/dgamma
        const double s = 1.0 + gamma;
        const double power = P(0, 0) * 1.0 + P(1, 1) * (-1.0 / (s * s));
        EXPECT_NEAR(power, 0.0, 1e-12);
    }
}

TEST(Features, LinearityInCoefficients)
{
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    Eigen::VectorXd t1(static_cast<Eigen::Index>(lib.size())),
        t2(static_cast<Eigen::Index>(lib.size()));
    for (Eigen::Index k = 0; k < t1.size(); ++k) {
        t1[k] = unif(rng);
        t2[k] = unif(rng);
    }
    const MaterialModel m1(lib, t1), m2(lib, t2), m12(lib, t1 + t2);
    const auto F = random_state(rng);
    const double w1 = strain_energy(m1, F), w2 = strain_energy(m2, F);
    const double w12 = strain_energy(m12, F);
    EXPECT_NEAR(w12, w1 + w2, 1e-14 * (std::abs(w1) + std::abs(w2) + 1.0));
    const Eigen::Matrix2d p = stress(m1, F) + stress(m2, F) - stress(m12, F);
    EXPECT_LE(p.cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Features, LogDomainError)
{
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    InvariantSet inv{3.0, -1.0, 1.0, 3.0, -1.0, 1.0}; // synthetic I2bar <= 0
    Eigen::VectorXd q(static_cast<Eigen::Index>(lib.size()));
    EXPECT_THROW(lib.evaluate(inv, q.data()), NumericsError);
    // without the log feature the same state evaluates fine
    const auto lib42 = FeatureLibrary::generalized_mooney_rivlin(7, 7, false);
    Eigen::VectorXd q42(static_cast<Eigen::Index>(lib42.size()));
    EXPECT_NO_THROW(lib42.evaluate(inv, q42.data()));
}

TEST(Features, NamesAndParsing)
{
    EXPECT_EQ(FeatureDescriptor::mooney_rivlin(1, 2).name(), "MR(i=1,j=2)");
    EXPECT_EQ(FeatureDescriptor::volumetric(3).name(), "VOL(k=3)");
    EXPECT_EQ(FeatureDescriptor::log_feature().name(), "LOG");
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    for (const auto& d : lib.descriptors()) EXPECT_EQ(FeatureDescriptor::parse(d.name()), d);
    EXPECT_THROW(FeatureDescriptor::parse("QUUX(3)"), SchemaError);
}

TEST(Features, TruthModelTables)
{
    const auto lib = FeatureLibrary::generalized_mooney_rivlin();
    const auto nh2 = truth_model(BenchmarkModel::NH2, lib);
    EXPECT_EQ(nh2.n_active(), 2u);
    EXPECT_DOUBLE_EQ(nh2.coefficient(FeatureDescriptor::mooney_rivlin(1, 0)), 0.5);
    EXPECT_DOUBLE_EQ(nh2.coefficient(FeatureDescriptor::volumetric(1)), 1.5);

    const auto hw = truth_model(BenchmarkModel::HW, lib);
    EXPECT_EQ(hw.n_active(), 5u);
    EXPECT_DOUBLE_EQ(hw.coefficient(FeatureDescriptor::mooney_rivlin(1, 1)), 0.7);
    EXPECT_DOUBLE_EQ(hw.coefficient(FeatureDescriptor::mooney_rivlin(3, 0)), 0.2);

    const auto gt = truth_model(BenchmarkModel::GT, lib);
    EXPECT_DOUBLE_EQ(gt.coefficient(FeatureDescriptor::log_feature()), 1.0);

    // GT needs the log feature
    const auto lib42 = FeatureLibrary::generalized_mooney_rivlin(7, 7, false);
    EXPECT_THROW(truth_model(BenchmarkModel::GT, lib42), UsageError);
    EXPECT_NO_THROW(truth_model(BenchmarkModel::HW, lib42));
}

} // namespace
