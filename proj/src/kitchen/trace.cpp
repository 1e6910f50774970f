#include "load/kitchen/trace.hpp"

#include <istream>
#include <ostream>
#include <stdexcept>

#include "json.hpp"

namespace load::kitchen {

using nlohmann::json;

namespace {

constexpr const char* kYawNames[] = {"N", "E", "S", "W"};

Yaw parse_yaw(const std::string& s) {
    for (int i = 0; i < 4; ++i) {
        if (s == kYawNames[i]) return static_cast<Yaw>(i);
    }
    throw std::runtime_error("bad yaw '" + s + "' in trace");
}

}  // namespace

TraceRecord make_record(const StepResult& r, const ActionSpec& action) {
    return TraceRecord{r.world.step_count, action, r.reward, r.done, r.world.agent, r.changed, observation_digest(r.obs)};
}

std::string to_json_line(const TraceRecord& rec) {
    json j;
    j["step"] = rec.step;
    j["action"] = {{"kind", rec.action.interact ? "interact" : "navigate"},
                   {"base", rec.action.base},
                   {"patch", rec.action.patch_index},
                   {"name", rec.action.str()}};
    j["reward"] = rec.reward;
    j["done"] = rec.done;
    j["agent_pose"] = {{"col", rec.agent_pose.cell.col},
                       {"row", rec.agent_pose.cell.row},
                       {"yaw", kYawNames[static_cast<int>(rec.agent_pose.yaw)]},
                       {"pitch", rec.agent_pose.pitch == Pitch::Level ? "level" : "down"}};
    j["changed_object_ids"] = rec.changed_object_ids;
    j["obs_digest"] = rec.obs_digest;
    return j.dump();
}

std::string to_json_line(const EpisodeHeader& header) {
    json j;
    j["task"] = header.task;
    j["seed"] = header.seed;
    j["reset_digest"] = header.reset_digest;
    return j.dump();
}

TraceRecord parse_record(const std::string& line) {
    const json j = json::parse(line);
    TraceRecord rec;
    rec.step = j.at("step").get<int>();
    const json& a = j.at("action");
    rec.action.interact = a.at("kind").get<std::string>() == "interact";
    rec.action.base = a.at("base").get<int>();
    rec.action.patch_index = a.at("patch").get<int>();
    rec.reward = j.at("reward").get<double>();
    rec.done = j.at("done").get<bool>();
    const json& p = j.at("agent_pose");
    rec.agent_pose.cell = {p.at("col").get<int>(), p.at("row").get<int>()};
    rec.agent_pose.yaw = parse_yaw(p.at("yaw").get<std::string>());
    rec.agent_pose.pitch = p.at("pitch").get<std::string>() == "level" ? Pitch::Level : Pitch::Down;
    rec.changed_object_ids = j.at("changed_object_ids").get<std::vector<int>>();
    rec.obs_digest = j.at("obs_digest").get<std::uint64_t>();
    return rec;
}

EpisodeHeader parse_header(const std::string& line) {
    const json j = json::parse(line);
    return EpisodeHeader{j.at("task").get<std::string>(), j.at("seed").get<std::uint64_t>(),
                         j.at("reset_digest").get<std::uint64_t>()};
}

void write_trace(std::ostream& out, const EpisodeHeader& header, const std::vector<TraceRecord>& records) {
    out << to_json_line(header) << '\n';
    for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::pair<EpisodeHeader, std::vector<TraceRecord>> read_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty trace");
    EpisodeHeader header = parse_header(line);
    std::vector<TraceRecord> records;
    while (std::getline(in, line)) {
        if (!line.empty()) records.push_back(parse_record(line));
    }
    return {header, records};
}

int replay_mismatch(const EpisodeHeader& header, const std::vector<TraceRecord>& records) {
    auto [world, obs] = reset(header.task, header.seed);
    if (observation_digest(obs) != header.reset_digest) return 0;
    for (std::size_t i = 0; i < records.size(); ++i) {
        StepResult r = step(world, records[i].action);
        if (!(make_record(r, records[i].action) == records[i])) return static_cast<int>(i);
        world = std::move(r.world);
    }
    return -1;
}

}  // namespace load::kitchen
