#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tdks/energy.hpp"
#include "tdks/fixedpoint.hpp"
#include "tdks/galerkin.hpp"
#include "tdks/spectral.hpp"

namespace tdks {

using ordered_json = nlohmann::ordered_json;

namespace io {

inline std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// ---------------------------------------------------------------------------
// binary snapshot series
// header: dim (u32), lengths (f64 x dim), N_i (u32 x dim), m (u32),
//         config hash (u64), frame count (u64)
// frame:  time (f64), m coefficient pairs (f64 re, f64 im)
// little-endian throughout
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw std::runtime_error("snapshot: truncated file");
    return v;
}

}  // namespace detail

inline void write_snapshot_series(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("snapshot: cannot open " + path);
    const BoxDomain& dom = traj.basis->domain();
    detail::put<std::uint32_t>(os, std::uint32_t(dom.dim));
    for (int a = 0; a < dom.dim; ++a) detail::put<double>(os, dom.lengths[a]);
    for (int a = 0; a < dom.dim; ++a) detail::put<std::uint32_t>(os, std::uint32_t(dom.grid_points[a]));
    detail::put<std::uint32_t>(os, std::uint32_t(traj.basis->order()));
    detail::put<std::uint64_t>(os, traj.meta.config_hash);
    detail::put<std::uint64_t>(os, std::uint64_t(traj.times.size()));
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        detail::put<double>(os, traj.times[i]);
        for (int q = 0; q < traj.basis->order(); ++q) {
            detail::put<double>(os, traj.states[i][q].real());
            detail::put<double>(os, traj.states[i][q].imag());
        }
    }
}

struct SnapshotSeries {
    Trajectory trajectory;
    std::uint64_t config_hash = 0;
};

inline SnapshotSeries read_snapshot_series(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("snapshot: cannot open " + path);
    const auto dim = detail::get<std::uint32_t>(is);
    if (dim < 1 || dim > 3) throw std::runtime_error("snapshot: bad dimension");
    BoxDomain dom;
    dom.dim = int(dim);
    for (std::uint32_t a = 0; a < dim; ++a) dom.lengths[a] = detail::get<double>(is);
    for (std::uint32_t a = 0; a < dim; ++a)
        dom.grid_points[a] = int(detail::get<std::uint32_t>(is));
    dom.validate();
    const auto m = detail::get<std::uint32_t>(is);
    SnapshotSeries out;
    out.config_hash = detail::get<std::uint64_t>(is);
    const auto count = detail::get<std::uint64_t>(is);
    out.trajectory.basis = Basis::create(dom, int(m));
    out.trajectory.meta.config_hash = out.config_hash;
    out.trajectory.meta.m = int(m);
    out.trajectory.meta.integrator = "snapshot";
    for (std::uint64_t i = 0; i < count; ++i) {
        out.trajectory.times.push_back(detail::get<double>(is));
        Eigen::VectorXcd c(m);
        for (std::uint32_t q = 0; q < m; ++q) {
            const double re = detail::get<double>(is);
            const double im = detail::get<double>(is);
            c[long(q)] = {re, im};
        }
        out.trajectory.states.push_back(std::move(c));
    }
    out.trajectory.validate();
    return out;
}

// ---------------------------------------------------------------------------
// CSV emitters
// ---------------------------------------------------------------------------

inline void write_trajectory_csv(const Trajectory& traj, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open " + path);
    os << "time";
    for (int q = 0; q < traj.basis->order(); ++q) os << ",re_" << q << ",im_" << q;
    os << "\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        os << fmt(traj.times[i]);
        for (int q = 0; q < traj.basis->order(); ++q)
            os << "," << fmt(traj.states[i][q].real()) << "," << fmt(traj.states[i][q].imag());
        os << "\n";
    }
}

inline void write_grid_csv(const BoxDomain& dom, const Eigen::ArrayXcd& values,
                           const std::string& path) {
    if (std::size_t(values.size()) != dom.total_nodes())
        throw std::invalid_argument("write_grid_csv: size mismatch");
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open " + path);
    for (int a = 0; a < dom.dim; ++a) os << "x" << a + 1 << ",";
    os << "re,im\n";
    for (std::size_t i = 0; i < dom.total_nodes(); ++i) {
        const auto x = dom.node_coords(i);
        for (int a = 0; a < dom.dim; ++a) os << fmt(x[a]) << ",";
        os << fmt(values[long(i)].real()) << "," << fmt(values[long(i)].imag()) << "\n";
    }
}

inline void write_estimates_csv(const std::vector<std::pair<std::string, EstimateReport>>& scopes,
                                const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open " + path);
    os << "scope,id,observed,bound,margin,slack,worst_time,pass,fallback\n";
    for (const auto& [scope, rep] : scopes)
        for (const auto& r : rep.rows)
            os << scope << "," << r.id << "," << fmt(r.observed) << "," << fmt(r.bound) << ","
               << fmt(r.margin) << "," << fmt(r.slack) << "," << fmt(r.worst_time) << ","
               << (r.pass ? 1 : 0) << "," << (r.fallback_bound ? 1 : 0) << "\n";
}

inline void write_schedule_csv(const std::vector<ScheduleState>& rows, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open " + path);
    os << "k,t_start,a_prev,b_k,Td_raw,halvings,Td,steps,snapped,floored,B0k,C_ring_k,g_k,"
          "invariance_T_star,a_observed\n";
    for (const auto& r : rows)
        os << r.k << "," << fmt(r.t_start) << "," << fmt(r.a_prev) << "," << fmt(r.b_k) << ","
           << fmt(r.Td_raw) << "," << r.halvings << "," << fmt(r.Td) << "," << r.steps << ","
           << (r.snapped ? 1 : 0) << "," << (r.floored ? 1 : 0) << "," << fmt(r.B0k) << ","
           << fmt(r.C_ring_k) << "," << fmt(r.g_k) << "," << fmt(r.invariance_T_star) << ","
           << fmt(r.a_observed) << "\n";
}

// Per-sample estimate table: one row per inequality per stored time. The
// right sides are constant in time except EN_5_eps.
inline void write_estimate_timeseries_csv(const Trajectory& traj, const Trajectory* G,
                                          const SpectralField& psi0, const EstimateConstants& c,
                                          EstimateVariant variant, const CheckOptions& opts,
                                          const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("csv: cannot open " + path);
    os << "time,id,observed,bound\n";
    const double T = traj.t_end() - traj.t_begin();
    const auto src = tdks::detail::source_norms(G, traj.basis);
    const NormReport n0 = norms(psi0);
    const auto deriv = tdks::detail::time_derivatives(traj);

    struct Row {
        const char* id;
        double bound;
    };
    std::vector<Row> fixed;
    auto assign = [&fixed](std::initializer_list<Row> rows) { fixed.assign(rows); };
    double veps_rate = 0.0;
    if (variant == EstimateVariant::plain) {
        const double b1 = std::exp(T) * (n0.l2 * n0.l2 + T * src.y_inf_0 * src.y_inf_0);
        const double b2 =
            std::exp(c.c_grad() * T) * (n0.grad * n0.grad + T * src.y_inf_1 * src.y_inf_1);
        const double b3 = std::exp(c.c_1d() * T) *
                          (n0.lap * n0.lap + T * (c.c_2d(T) * n0.grad * n0.grad +
                                                  c.c_3d(T) * src.y_hat * src.y_hat));
        assign({{"EN_1", b1},
                {"EN_2", b2},
                {"EN_3", b3},
                {"EN_4_pre", std::sqrt(b2) + c.v_sup * std::sqrt(b1) + src.y_inf_0},
                {"EN_4", std::sqrt(b3) + c.v_sup * std::sqrt(b1) + src.y_hat}});
    } else {
        const RoughInitialNorms r0 = opts.rough_initial.value();
        const double m2 = c.phi1_l1 * c.phi1_l1;
        const double b1 = std::exp(c.c_hat() * T) *
                          (c.moll.C0 * c.moll.C0 * m2 * r0.l2 * r0.l2 +
                           T * src.y_inf_0 * src.y_inf_0);
        const double b2 = std::exp(c.c_hat_grad() * T) *
                          (c.moll.C1 * c.moll.C1 * m2 * r0.grad * r0.grad +
                           T * src.y_inf_1 * src.y_inf_1);
        const double g2 = c.grad_phi_eps_l1 * c.grad_phi_eps_l1;
        const double b3 = std::exp(c.c_eps() * T) *
                          (c.moll.C2 * c.moll.C2 * g2 * r0.h1 * r0.h1 +
                           T * src.y_hat * src.y_hat);
        veps_rate = c.moll.C3 * (c.v_sup + c.phi1_l1 * (c.w_sup + c.K1));
        assign({{"EN_1_eps", b1},
                {"EN_2_eps", b2},
                {"EN_3_eps", b3},
                {"EN_4_eps", std::sqrt(b2) + veps_rate * std::sqrt(b1) + src.y_inf_0}});
    }

    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const double t = traj.times[i];
        const NormReport n = norms(traj.field_at(i));
        const NormReport nd = norms(SpectralField(traj.basis, deriv[i]));
        const double obs[5] = {n.l2 * n.l2, n.grad * n.grad, n.lap * n.lap, nd.h_minus1, nd.l2};
        for (std::size_t r = 0; r < fixed.size(); ++r)
            os << fmt(t) << "," << fixed[r].id << "," << fmt(obs[r]) << ","
               << fmt(fixed[r].bound) << "\n";
        if (variant == EstimateVariant::epsilon) {
            const double veps = opts.v_eps_norm ? opts.v_eps_norm(t, traj.states[i])
                                                : veps_rate * n.l2;
            os << fmt(t) << ",EN_5_eps," << fmt(nd.l2) << "," << fmt(n.lap + veps + src.y_hat)
               << "\n";
        }
    }
}

// ---------------------------------------------------------------------------
// report JSON
// ---------------------------------------------------------------------------

inline ordered_json estimate_report_json(const EstimateReport& rep) {
    ordered_json rows = ordered_json::array();
    for (const auto& r : rep.rows) {
        rows.push_back(ordered_json{{"id", r.id},
                                    {"observed", r.observed},
                                    {"bound", r.bound},
                                    {"margin", r.margin},
                                    {"slack", r.slack},
                                    {"worst_time", r.worst_time},
                                    {"pass", r.pass},
                                    {"fallback_bound", r.fallback_bound}});
    }
    return ordered_json{{"all_pass", rep.all_pass},
                        {"k_minus_1", rep.k_minus_1},
                        {"k_minus_2", rep.k_minus_2},
                        {"rows", rows}};
}

inline ordered_json constants_json(const EstimateConstants& c) {
    ordered_json j{{"T", c.T},
                   {"C_PF", c.C_PF},
                   {"C_Z", c.C_Z},
                   {"C_grad", c.C_grad},
                   {"C_1_delta", c.C_1d},
                   {"C_2_delta", c.C_2d},
                   {"C_3_delta", c.C_3d},
                   {"V_sup", c.v_sup},
                   {"V_grad_sup", c.v_grad_sup},
                   {"V_lap_sup", c.v_lap_sup},
                   {"V_w1", c.v_w1},
                   {"V_w2", c.v_w2},
                   {"W_sup", c.w_sup},
                   {"W_w1", c.w_w1},
                   {"K1", c.K1},
                   {"K2", c.K2}};
    if (c.has_mollifier) {
        j["epsilon"] = c.epsilon;
        j["phi1_l1"] = c.phi1_l1;
        j["grad_phi_eps_l1"] = c.grad_phi_eps_l1;
        j["C_hat"] = c.C_hat;
        j["C_hat_grad"] = c.C_hat_grad;
        j["C_eps"] = c.C_eps;
        j["moll_C"] = ordered_json::array(
            {c.moll.C0, c.moll.C1, c.moll.C2, c.moll.C3, c.moll.C4, c.moll.C5});
    }
    return j;
}

inline ordered_json schedule_json(const std::vector<ScheduleState>& rows) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows)
        arr.push_back(ordered_json{{"k", r.k},
                                   {"t_start", r.t_start},
                                   {"a_prev", r.a_prev},
                                   {"b_k", r.b_k},
                                   {"Td_raw", r.Td_raw},
                                   {"halvings", r.halvings},
                                   {"Td", r.Td},
                                   {"steps", r.steps},
                                   {"snapped", r.snapped},
                                   {"floored", r.floored},
                                   {"B0k", r.B0k},
                                   {"C_ring_k", r.C_ring_k},
                                   {"g_k", r.g_k},
                                   {"invariance_T_star", r.invariance_T_star},
                                   {"a_observed", r.a_observed}});
    return arr;
}

inline ordered_json solve_report_json(const SolveReport& rep, std::uint64_t config_hash,
                                      const std::vector<std::string>& artifact_paths) {
    ordered_json subs = ordered_json::array();
    for (const auto& s : rep.subintervals) {
        ordered_json iters = ordered_json::array();
        for (std::size_t i = 0; i < s.picard.diffs.size(); ++i) {
            ordered_json it{{"diff", s.picard.diffs[i]}};
            if (i >= 1 && i - 1 < s.picard.ratios.size()) it["ratio"] = s.picard.ratios[i - 1];
            iters.push_back(std::move(it));
        }
        subs.push_back(ordered_json{{"k", s.schedule.k},
                                    {"t_start", s.schedule.t_start},
                                    {"Td", s.schedule.Td},
                                    {"g_k", s.schedule.g_k},
                                    {"iterations", s.picard.iterations},
                                    {"converged", s.picard.converged},
                                    {"certified", s.picard.certified},
                                    {"iteration_log", iters},
                                    {"estimates", estimate_report_json(s.estimates)}});
    }
    ordered_json j{{"config_hash", config_hash},
                   {"mode", rep.certified ? "certified" : "practical"},
                   {"regularized", rep.regularized},
                   {"estimates_pass", rep.estimates_pass},
                   {"norm_drift", rep.norm_drift},
                   {"constants", constants_json(rep.consts)},
                   {"nonlinearity_constants",
                    ordered_json{{"C_b", rep.nl.C_b},
                                 {"C_c", rep.nl.C_c},
                                 {"K_tilde", rep.nl.K_tilde},
                                 {"provenance", rep.nl.provenance}}},
                   {"subintervals", subs},
                   {"certified_schedule", schedule_json(rep.certified_schedule)},
                   {"artifacts", artifact_paths}};
    if (rep.regularized) {
        j["epsilon"] = rep.eps;
        j["rough_initial"] = ordered_json{{"l2", rep.rough_initial.l2},
                                          {"grad", rep.rough_initial.grad},
                                          {"h1", rep.rough_initial.h1}};
        j["observed_triple"] = ordered_json{{"sup_l2", rep.observed.sup_l2},
                                            {"sup_grad", rep.observed.sup_grad},
                                            {"sup_dt_hm1", rep.observed.sup_dt_hm1}};
    }
    return j;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path);
    os << text;
}

}  // namespace io
}  // namespace tdks
