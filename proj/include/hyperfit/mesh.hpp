#pragma once

#include <Eigen/Dense>
#include <array>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hyperfit/errors.hpp"

namespace hyperfit {

using json = nlohmann::json;

/// Shape-function gradients of a linear triangle; rows are grad N^a.
/// Constant over the element; throws on zero signed area.
inline Eigen::Matrix<double, 3, 2> shape_gradients(const Eigen::Vector2d& x0,
                                                   const Eigen::Vector2d& x1,
                                                   const Eigen::Vector2d& x2)
{
    Eigen::Matrix2d D;
    D.col(0) = x1 - x0;
    D.col(1) = x2 - x0;
    const double det = D.determinant();
    if (det == 0.0) throw GeometryError("degenerate (zero-area) triangle");
    Eigen::Matrix2d Dinv = D.inverse();
    Eigen::Matrix<double, 3, 2> g;
    g.row(1) = Dinv.row(0);
    g.row(2) = Dinv.row(1);
    g.row(0) = -g.row(1) - g.row(2);
    return g;
}

// Linear-triangle mesh with per-element shape gradients and areas (the
// one-point quadrature weights). Element orientation is normalized to
// counterclockwise at construction.
struct Mesh {
    std::vector<Eigen::Vector2d> nodes;
    std::vector<std::array<int, 3>> elements;
    std::vector<Eigen::Matrix<double, 3, 2>> grads;
    std::vector<double> areas;

    std::size_t n_nodes() const { return nodes.size(); }
    std::size_t n_elements() const { return elements.size(); }
    std::size_t n_dofs() const { return 2 * nodes.size(); }

    static Mesh build(std::vector<Eigen::Vector2d> nodes_in,
                      std::vector<std::array<int, 3>> elements_in)
    {
        Mesh m;
        m.nodes = std::move(nodes_in);
        m.elements = std::move(elements_in);
        const int n = static_cast<int>(m.nodes.size());
        m.grads.reserve(m.elements.size());
        m.areas.reserve(m.elements.size());
        for (std::size_t e = 0; e < m.elements.size(); ++e) {
            auto& el = m.elements[e];
            for (int v : el)
                if (v < 0 || v >= n)
                    throw SchemaError("element " + std::to_string(e) + " references node " +
                                      std::to_string(v) + " outside [0, " + std::to_string(n) +
                                      ")");
            const Eigen::Vector2d& x0 = m.nodes[el[0]];
            Eigen::Vector2d e1 = m.nodes[el[1]] - x0;
            Eigen::Vector2d e2 = m.nodes[el[2]] - x0;
            double signed_area = 0.5 * (e1.x() * e2.y() - e1.y() * e2.x());
            if (signed_area < 0.0) { // mesh generators vary; reorder silently
                std::swap(el[1], el[2]);
                signed_area = -signed_area;
            }
            if (signed_area <= 0.0)
                throw GeometryError("element " + std::to_string(e) + " has non-positive area");
            m.grads.push_back(shape_gradients(x0, m.nodes[el[1]], m.nodes[el[2]]));
            m.areas.push_back(signed_area);
        }
        return m;
    }

    /// Nodal displacements of one element gathered from the flat DOF vector
    /// ordered (u_x^0, u_y^0, u_x^1, ...).
    Eigen::Matrix<double, 3, 2> gather(std::size_t e, const Eigen::VectorXd& u) const
    {
        Eigen::Matrix<double, 3, 2> ue;
        for (int a = 0; a < 3; ++a) {
            const int node = elements[e][a];
            ue(a, 0) = u[2 * node];
            ue(a, 1) = u[2 * node + 1];
        }
        return ue;
    }
};

/// Group of Dirichlet-constrained DOFs sharing one coordinate direction,
/// whose reaction forces sum to a single measured value.
struct DirichletSubset {
    std::string name;
    int direction = 0; // 0 = x, 1 = y
    std::vector<int> nodes;
};

// Partition of the 2 n_n degrees of freedom into the free set and the
// named fixed subsets. dof id = 2 * node + direction.
struct DofPartition {
    int n_nodes = 0;
    std::vector<DirichletSubset> subsets;
    std::vector<int> dof_subset; // -1 if free, else subset index
    std::vector<int> free_index; // -1 if fixed, else row in the free system
    int n_free = 0;

    std::size_t n_subsets() const { return subsets.size(); }
    bool is_free(int dof) const { return dof_subset[dof] < 0; }

    int subset_index(const std::string& name) const
    {
        for (std::size_t s = 0; s < subsets.size(); ++s)
            if (subsets[s].name == name) return static_cast<int>(s);
        return -1;
    }
};

/// Builds the free/fixed DOF partition from explicit boundary subsets.
/// A DOF claimed by two subsets is a partition error.
inline DofPartition partition_dofs(int n_nodes, std::vector<DirichletSubset> subsets)
{
    DofPartition p;
    p.n_nodes = n_nodes;
    p.subsets = std::move(subsets);
    p.dof_subset.assign(2 * static_cast<std::size_t>(n_nodes), -1);
    for (std::size_t s = 0; s < p.subsets.size(); ++s) {
        const auto& sub = p.subsets[s];
        if (sub.direction != 0 && sub.direction != 1)
            throw SchemaError("subset '" + sub.name + "' has invalid direction");
        for (int node : sub.nodes) {
            if (node < 0 || node >= n_nodes)
                throw SchemaError("subset '" + sub.name + "' references node " +
                                  std::to_string(node) + " out of range");
            const int dof = 2 * node + sub.direction;
            if (p.dof_subset[dof] >= 0)
                throw SchemaError("partition error: DOF (node " + std::to_string(node) +
                                  ", dir " + std::to_string(sub.direction) +
                                  ") assigned to subsets '" +
                                  p.subsets[p.dof_subset[dof]].name + "' and '" + sub.name + "'");
            p.dof_subset[dof] = static_cast<int>(s);
        }
    }
    p.free_index.assign(p.dof_subset.size(), -1);
    for (std::size_t d = 0; d < p.dof_subset.size(); ++d)
        if (p.dof_subset[d] < 0) p.free_index[d] = p.n_free++;
    return p;
}

/// Measured data of one load step: all nodal displacements plus one reaction
/// sum per Dirichlet subset (aligned with DofPartition::subsets).
struct Loadstep {
    Eigen::VectorXd u;
    std::vector<double> reactions;
};

struct LoadstepData {
    std::vector<Loadstep> steps;
    std::size_t n_steps() const { return steps.size(); }
};

struct Dataset {
    Mesh mesh;
    DofPartition partition;
    LoadstepData loads;
};

namespace detail {

inline const json& require_field(const json& j, const char* key, const std::string& ctx)
{
    auto it = j.find(key);
    if (it == j.end()) throw SchemaError("missing field '" + std::string(key) + "' in " + ctx);
    return *it;
}

} // namespace detail

/// Parses a dataset document. See save_dataset for the schema.
inline Dataset parse_dataset(const json& j)
{
    using detail::require_field;
    Dataset ds;

    std::vector<Eigen::Vector2d> nodes;
    for (const auto& jn : require_field(j, "nodes", "dataset")) {
        if (!jn.is_array() || jn.size() != 2)
            throw SchemaError("node entries must be [x, y] pairs");
        nodes.emplace_back(jn[0].get<double>(), jn[1].get<double>());
    }
    std::vector<std::array<int, 3>> elements;
    for (const auto& je : require_field(j, "elements", "dataset")) {
        if (!je.is_array() || je.size() != 3)
            throw SchemaError("element entries must be [i, j, k] triplets");
        elements.push_back({je[0].get<int>(), je[1].get<int>(), je[2].get<int>()});
    }
    ds.mesh = Mesh::build(std::move(nodes), std::move(elements));

    std::vector<DirichletSubset> subsets;
    for (const auto& js : require_field(j, "dirichlet_subsets", "dataset")) {
        DirichletSubset s;
        s.name = require_field(js, "name", "dirichlet subset").get<std::string>();
        const std::string dir = require_field(js, "direction", "subset '" + s.name + "'").get<std::string>();
        if (dir == "x") s.direction = 0;
        else if (dir == "y") s.direction = 1;
        else throw SchemaError("subset '" + s.name + "': direction must be \"x\" or \"y\"");
        for (const auto& jn : require_field(js, "node_ids", "subset '" + s.name + "'"))
            s.nodes.push_back(jn.get<int>());
        subsets.push_back(std::move(s));
    }
    ds.partition = partition_dofs(static_cast<int>(ds.mesh.n_nodes()), std::move(subsets));

    const std::size_t n_dofs = ds.mesh.n_dofs();
    std::size_t step_idx = 0;
    for (const auto& jl : require_field(j, "loadsteps", "dataset")) {
        const std::string ctx = "loadstep " + std::to_string(step_idx);
        Loadstep step;
        const auto& ju = require_field(jl, "displacements", ctx);
        if (ju.size() != n_dofs)
            throw SchemaError(ctx + ": displacement array has length " +
                              std::to_string(ju.size()) + ", expected " + std::to_string(n_dofs));
        step.u.resize(static_cast<Eigen::Index>(n_dofs));
        for (std::size_t d = 0; d < n_dofs; ++d)
            step.u[static_cast<Eigen::Index>(d)] = ju[d].get<double>();
        const auto& jr = require_field(jl, "reactions", ctx);
        step.reactions.resize(ds.partition.n_subsets());
        for (std::size_t s = 0; s < ds.partition.n_subsets(); ++s) {
            const std::string& name = ds.partition.subsets[s].name;
            auto it = jr.find(name);
            if (it == jr.end())
                throw SchemaError(ctx + ": missing reaction for subset '" + name + "'");
            step.reactions[s] = it->get<double>();
        }
        ds.loads.steps.push_back(std::move(step));
        ++step_idx;
    }
    return ds;
}

inline Dataset load_dataset(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw SchemaError("cannot open dataset file '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw SchemaError("dataset '" + path + "': " + e.what());
    }
    return parse_dataset(j);
}

inline json dataset_to_json(const Dataset& ds)
{
    json j;
    j["nodes"] = json::array();
    for (const auto& x : ds.mesh.nodes) j["nodes"].push_back({x.x(), x.y()});
    j["elements"] = json::array();
    for (const auto& el : ds.mesh.elements) j["elements"].push_back({el[0], el[1], el[2]});
    j["dirichlet_subsets"] = json::array();
    for (const auto& s : ds.partition.subsets) {
        j["dirichlet_subsets"].push_back({{"name", s.name},
                                          {"direction", s.direction == 0 ? "x" : "y"},
                                          {"node_ids", s.nodes}});
    }
    j["loadsteps"] = json::array();
    for (const auto& step : ds.loads.steps) {
        json jl;
        jl["displacements"] = std::vector<double>(step.u.data(), step.u.data() + step.u.size());
        json jr = json::object();
        for (std::size_t s = 0; s < ds.partition.n_subsets(); ++s)
            jr[ds.partition.subsets[s].name] = step.reactions[s];
        jl["reactions"] = jr;
        j["loadsteps"].push_back(std::move(jl));
    }
    return j;
}

inline void save_dataset(const std::string& path, const Dataset& ds)
{
    std::ofstream out(path);
    if (!out) throw SchemaError("cannot open '" + path + "' for writing");
    out << dataset_to_json(ds).dump() << "\n";
}

} // namespace hyperfit
