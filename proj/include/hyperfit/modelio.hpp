#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperfit/errors.hpp"
#include "hyperfit/features.hpp"
#include "hyperfit/kinematics.hpp"
#include "hyperfit/mesh.hpp"

namespace hyperfit {

/// Table-style display string: terms in library order with fixed-decimal
/// signed coefficients, e.g. "0.5000*(I1b-3) + 1.5000*(J-1)^2".
inline std::string format_model(const MaterialModel& model, int decimals = 4)
{
    std::string out;
    char buf[64];
    for (std::size_t k = 0; k < model.library.size(); ++k) {
        const double c = model.theta[static_cast<Eigen::Index>(k)];
        if (c == 0.0) continue;
        if (out.empty()) {
            std::snprintf(buf, sizeof(buf), "%.*f", decimals, c);
            out += buf;
        } else {
            std::snprintf(buf, sizeof(buf), " %c %.*f", c < 0 ? '-' : '+', decimals,
                          std::abs(c));
            out += buf;
        }
        out += "*" + model.library[k].display();
    }
    return out.empty() ? "W = 0" : out;
}

struct ModelProvenance {
    std::string dataset;     // source dataset path or id
    std::string config_hash; // hash of the effective run configuration
    std::uint64_t seed = 0;
    std::string created; // optional; deterministic runs leave it empty
};

/// A discovered (or hand-specified) model plus provenance, serialized to a
/// JSON model file with full double precision.
struct ModelRecord {
    MaterialModel model;
    ModelProvenance provenance;
};

inline json model_to_json(const ModelRecord& rec)
{
    json j;
    json lib = json::array();
    for (const auto& d : rec.model.library.descriptors()) lib.push_back(d.name());
    j["library"] = lib;
    j["features"] = json::array();
    for (std::size_t k = 0; k < rec.model.library.size(); ++k) {
        const double c = rec.model.theta[static_cast<Eigen::Index>(k)];
        if (c == 0.0) continue;
        j["features"].push_back({{"name", rec.model.library[k].name()},
                                 {"index", k},
                                 {"coefficient", c}});
    }
    j["display"] = format_model(rec.model);
    json prov;
    prov["dataset"] = rec.provenance.dataset;
    prov["config_hash"] = rec.provenance.config_hash;
    prov["seed"] = rec.provenance.seed;
    if (!rec.provenance.created.empty()) prov["created"] = rec.provenance.created;
    j["provenance"] = prov;
    return j;
}

inline ModelRecord model_from_json(const json& j)
{
    ModelRecord rec;
    std::vector<FeatureDescriptor> descriptors;
    for (const auto& name : detail::require_field(j, "library", "model file"))
        descriptors.push_back(FeatureDescriptor::parse(name.get<std::string>()));
    FeatureLibrary lib(std::move(descriptors));
    Eigen::VectorXd theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(lib.size()));
    for (const auto& jf : detail::require_field(j, "features", "model file")) {
        const auto idx = detail::require_field(jf, "index", "feature entry").get<std::size_t>();
        if (idx >= lib.size()) throw SchemaError("feature index out of range in model file");
        const auto name = detail::require_field(jf, "name", "feature entry").get<std::string>();
        if (FeatureDescriptor::parse(name) != lib[idx])
            throw SchemaError("feature name '" + name + "' does not match library slot " +
                              std::to_string(idx));
        theta[static_cast<Eigen::Index>(idx)] =
            detail::require_field(jf, "coefficient", "feature entry").get<double>();
    }
    rec.model = MaterialModel(std::move(lib), std::move(theta));
    if (auto it = j.find("provenance"); it != j.end()) {
        rec.provenance.dataset = it->value("dataset", "");
        rec.provenance.config_hash = it->value("config_hash", "");
        rec.provenance.seed = it->value("seed", std::uint64_t{0});
        rec.provenance.created = it->value("created", "");
    }
    return rec;
}

inline void save_model(const std::string& path, const ModelRecord& rec)
{
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open '" + path + "' for writing");
    out << model_to_json(rec).dump(2) << "\n";
}

inline ModelRecord load_model(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open model file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("model file '" + path + "': " + e.what());
    }
    return model_from_json(j);
}

/// One row per grid value: strain energy and the in-plane stress components
/// along a canonical deformation path.
struct CurveTable {
    DeformationPathKind path;
    std::vector<double> gamma, W, P11, P12, P22;
};

inline CurveTable evaluate_curves(const MaterialModel& model, DeformationPathKind path,
                                  const std::vector<double>& gamma_grid)
{
    CurveTable t;
    t.path = path;
    for (double g : gamma_grid) {
        if (!(g > 0.0)) throw UsageError("curve grid values must be positive");
        const DeformationGradient F = deformation_path(path, g);
        const Eigen::Matrix2d P = stress(model, F);
        t.gamma.push_back(g);
        t.W.push_back(strain_energy(model, F));
        t.P11.push_back(P(0, 0));
        t.P12.push_back(P(0, 1));
        t.P22.push_back(P(1, 1));
    }
    return t;
}

inline void write_curve_csv(const std::string& path, const CurveTable& t)
{
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open '" + path + "' for writing");
    out.precision(17);
    out << "gamma,W,P11,P12,P22\n";
    for (std::size_t i = 0; i < t.gamma.size(); ++i)
        out << t.gamma[i] << ',' << t.W[i] << ',' << t.P11[i] << ',' << t.P12[i] << ','
            << t.P22[i] << "\n";
}

/// Relative L2 discrepancies of two models along one path; model A is the
/// reference scale.
struct CurveDiscrepancy {
    DeformationPathKind path;
    double W = 0.0, P11 = 0.0, P12 = 0.0, P22 = 0.0;
};

inline double relative_l2(const std::vector<double>& a, const std::vector<double>& b)
{
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num += (a[i] - b[i]) * (a[i] - b[i]);
        den += a[i] * a[i];
    }
    if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return std::sqrt(num / den);
}

inline std::vector<CurveDiscrepancy> compare_models(const MaterialModel& a,
                                                    const MaterialModel& b,
                                                    const std::vector<DeformationPathKind>& paths,
                                                    const std::vector<double>& gamma_grid)
{
    std::vector<CurveDiscrepancy> out;
    for (const auto path : paths) {
        const CurveTable ta = evaluate_curves(a, path, gamma_grid);
        const CurveTable tb = evaluate_curves(b, path, gamma_grid);
        CurveDiscrepancy d;
        d.path = path;
        d.W = relative_l2(ta.W, tb.W);
        d.P11 = relative_l2(ta.P11, tb.P11);
        d.P12 = relative_l2(ta.P12, tb.P12);
        d.P22 = relative_l2(ta.P22, tb.P22);
        out.push_back(d);
    }
    return out;
}

inline std::vector<double> linspace(double lo, double hi, int count)
{
    if (count < 2) throw UsageError("linspace needs at least 2 points");
    std::vector<double> g(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i)
        g[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    return g;
}

} // namespace hyperfit
