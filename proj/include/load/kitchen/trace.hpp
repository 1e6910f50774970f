#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "load/kitchen/env.hpp"

namespace load::kitchen {

// One JSON line per step.
struct TraceRecord {
    int step = 0;
    ActionSpec action;
    double reward = 0.0;
    bool done = false;
    Pose agent_pose;
    std::vector<int> changed_object_ids;
    std::uint64_t obs_digest = 0;

    friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

struct EpisodeHeader {
    std::string task;
    std::uint64_t seed = 0;
    std::uint64_t reset_digest = 0;
};

TraceRecord make_record(const StepResult& r, const ActionSpec& action);

std::string to_json_line(const TraceRecord& rec);
std::string to_json_line(const EpisodeHeader& header);
TraceRecord parse_record(const std::string& line);
EpisodeHeader parse_header(const std::string& line);

void write_trace(std::ostream& out, const EpisodeHeader& header, const std::vector<TraceRecord>& records);
std::pair<EpisodeHeader, std::vector<TraceRecord>> read_trace(std::istream& in);

// Re-runs the logged actions from reset and returns the index of the first record whose
// regenerated form differs, or -1 if every step (and the reset observation) matches.
int replay_mismatch(const EpisodeHeader& header, const std::vector<TraceRecord>& records);

}  // namespace load::kitchen
