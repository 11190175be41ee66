#pragma once

#include <optional>
#include <string>

#include "fedsplit/algorithms.hpp"
#include "fedsplit/serialization.hpp"

namespace fedsplit
{

inline constexpr const char* kTraceHeader = "t,cost,gap,grad_norm,dist_to_ref,prox_residual";

/// One row per round; gap is cost - F* when F* is known, otherwise empty, as are
/// absent distances and residuals.
inline std::string trace_csv(const Trace& trace, std::optional<double> F_star = std::nullopt)
{
    std::string out = kTraceHeader;
    out += '\n';
    const auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
    for (const auto& r : trace.records) {
        out += std::to_string(r.t);
        out += ',';
        out += format_double(r.cost);
        out += ',';
        out += F_star ? format_double(r.cost - *F_star) : std::string();
        out += ',';
        out += format_double(r.grad_norm);
        out += ',';
        out += opt(r.dist_to_ref);
        out += ',';
        out += opt(r.prox_residual);
        out += '\n';
    }
    return out;
}

/// Metadata sidecar. Wall-clock time is only written on request so that repeated
/// runs produce identical files.
inline json trace_metadata(const Trace& trace, std::optional<double> F_star = std::nullopt,
                           bool include_timing = false)
{
    json out = {{"label", trace.label},
                {"spec", algorithm_spec_to_json(trace.spec)},
                {"stepsize", trace.stepsize},
                {"rounds_recorded", trace.records.size()}};
    if (trace.seed) out["seed"] = *trace.seed;
    if (trace.lambda) out["lambda"] = *trace.lambda;
    if (F_star) out["F_star"] = *F_star;
    if (!trace.records.empty()) {
        const auto& last = trace.records.back();
        json final_row = {{"t", last.t}, {"cost", last.cost}, {"grad_norm", last.grad_norm},
                          {"x", vector_to_json(last.x)}};
        if (F_star) final_row["gap"] = last.cost - *F_star;
        if (last.dist_to_ref) final_row["dist_to_ref"] = *last.dist_to_ref;
        out["final"] = std::move(final_row);
    }
    if (include_timing) out["wall_ms"] = trace.wall_ms;
    return out;
}

inline void write_trace(const std::filesystem::path& dir, const std::string& stem, const Trace& trace,
                        std::optional<double> F_star = std::nullopt, bool include_timing = false)
{
    write_text_file(dir / (stem + ".csv"), trace_csv(trace, F_star));
    write_text_file(dir / (stem + ".json"), dump_json(trace_metadata(trace, F_star, include_timing)));
}

} // namespace fedsplit
