#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace splitkit {

/// One recorded iteration t. `objective` and `constraint_norm` are taken at
/// the ergodic averages, `raw_objective` at the current iterate.
struct TraceRecord {
    std::uint64_t iteration = 0;
    double objective = 0.0;
    double constraint_norm = 0.0;
    double raw_objective = 0.0;
    std::optional<std::int64_t> wall_ns;
    std::optional<double> lyapunov;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct Trace {
    std::string solver;
    std::vector<TraceRecord> records;
};

} // namespace splitkit
