#include "load/probe/dataset.hpp"

#include <sodium.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "json.hpp"

#include "load/core/rng.hpp"
#include "load/kitchen/script.hpp"

namespace load::probe {

using json = nlohmann::json;
using namespace kitchen;

std::string_view property_name(int i) {
    static constexpr std::array<std::string_view, kNumProperties> names = {"is_on",     "is_open",   "is_cooked",
                                                                           "is_filled", "is_sliced", "is_picked_up"};
    return names.at(static_cast<std::size_t>(i));
}

std::string_view containment_name(int i) {
    static constexpr std::array<std::string_view, kNumContainment> names = {"is_inside", "has_inside"};
    return names.at(static_cast<std::size_t>(i));
}

Labels labels_of(const WorldState& w, int id) {
    const ObjectState& o = w.object(id);
    Labels l;
    l.category = index_of(o.category);
    l.properties = {o.is_on, o.is_open, o.is_cooked, o.is_filled, o.is_sliced, o.is_picked_up};
    // Being held is not containment.
    l.containment = {o.parent >= 0, w.has_children(id)};
    return l;
}

LabeledSample make_sample(const WorldState& before, const ActionSpec& action) {
    if (!action.interact) throw std::invalid_argument("make_sample: navigation actions carry no target");
    const auto vis = visible_objects(before);
    if (action.patch_index < 0 || action.patch_index >= static_cast<int>(vis.size()))
        throw std::out_of_range("make_sample: patch index not in the observation");
    StepResult r = step(before, action);
    LabeledSample s;
    s.target = vis[static_cast<std::size_t>(action.patch_index)];
    s.before = before;
    s.action = action;
    s.applied = r.interaction_applied;
    s.patch.assign(kPatchSize, Real(0));
    render_patch_into(r.world, s.target, r.world.agent.yaw, s.patch);
    s.labels = labels_of(r.world, s.target);
    s.after = std::move(r.world);
    return s;
}

namespace {

// Plays one manifestation, teleporting in front of each target. Layouts are free-play scenes:
// solving the layout's task does not end the sequence.
class Script {
public:
    Script(const WorldState& start, Dataset& out, ProgrammaticStats& stats) : w_(start), out_(out), stats_(stats) {}

    bool interact(Interaction kind, int target) {
        const auto pose = interaction_pose(w_, target);
        if (!pose) {
            ++stats_.skipped_unreachable;
            return false;
        }
        w_.agent = *pose;
        propagate_positions(w_);
        const int idx = patch_index_of(w_, target);
        if (idx < 0) {
            ++stats_.skipped_unreachable;
            return false;
        }
        LabeledSample s = make_sample(w_, ActionSpec::interaction(kind, idx));
        const bool applied = s.applied;
        w_ = s.after;
        w_.done = false;
        out_.push_back(std::move(s));
        return applied;
    }

    // An unrecorded idle step; lets timers run.
    void wait() {
        w_ = step(w_, ActionSpec::navigate(NavAction::LookUp)).world;
        w_.done = false;
    }

    const WorldState& world() const { return w_; }

private:
    WorldState w_;
    Dataset& out_;
    ProgrammaticStats& stats_;
};

std::vector<int> ids_where(const WorldState& w, auto pred) {
    std::vector<int> ids;
    for (const auto& o : w.objects)
        if (pred(o)) ids.push_back(o.id);
    return ids;
}

// Single-interaction and placement manifestations from one start state.
void manifest_basic(const WorldState& start, Dataset& out, ProgrammaticStats& st) {
    const auto all = ids_where(start, [](const ObjectState&) { return true; });
    const auto pickupable = ids_where(start, [](const ObjectState& o) { return info(o.category).pickupable; });
    const auto receptacles = ids_where(start, [](const ObjectState& o) { return info(o.category).receptacle; });
    auto run = [&](auto body) {
        Script s(start, out, st);
        ++st.sequences;
        body(s);
    };

    for (int x : all) run([&](Script& s) { s.interact(Interaction::Pickup, x); });
    for (int x : all)
        run([&](Script& s) {
            if (s.interact(Interaction::Open, x)) s.interact(Interaction::Close, x);
        });
    for (int x : all)
        run([&](Script& s) {
            if (s.interact(Interaction::TurnOn, x)) s.interact(Interaction::TurnOff, x);
        });
    for (int x : pickupable) {
        for (int y : receptacles) {
            if (y == x) continue;
            run([&](Script& s) {
                s.interact(Interaction::Pickup, x);
                if (info(s.world().object(y).category).openable) s.interact(Interaction::Open, y);
                s.interact(Interaction::Put, y);
            });
        }
    }
}

void manifest_layout(const WorldState& start, Dataset& out, ProgrammaticStats& st) {
    const auto all = ids_where(start, [](const ObjectState&) { return true; });
    const auto sinks = ids_where(start, [](const ObjectState& o) { return o.category == Category::SinkBasin; });
    const auto knives = ids_where(start, [](const ObjectState& o) { return o.category == Category::Knife; });
    const auto cookable = ids_where(start, [](const ObjectState& o) { return info(o.category).cookable; });
    const auto cookware = ids_where(
        start, [](const ObjectState& o) { return o.category == Category::Pot || o.category == Category::Pan; });
    const auto burners = ids_where(start, [](const ObjectState& o) { return o.category == Category::StoveBurner; });
    // End states of fill and cook sequences; the basic manifestations are replayed from each.
    std::vector<WorldState> prepared;
    auto run = [&](auto body) {
        Script s(start, out, st);
        ++st.sequences;
        body(s);
        return s.world();
    };

    manifest_basic(start, out, st);

    st.sink_instances += static_cast<int>(sinks.size());
    for (int sink : sinks) {
        for (int c = 0; c < kNumCategories; ++c) {
            const Category cat = category_from_index(c);
            if (!info(cat).fillable) continue;
            const auto items = ids_where(start, [cat](const ObjectState& o) { return o.category == cat; });
            if (items.empty()) continue;
            ++st.fill_sequences;
            prepared.push_back(run([&](Script& s) {
                s.interact(Interaction::Pickup, items.front());
                s.interact(Interaction::Put, sink);
                s.interact(Interaction::Fill, items.front());
            }));
        }
    }

    for (int knife : knives) {
        for (int x : all) {
            if (x == knife) continue;
            run([&](Script& s) {
                s.interact(Interaction::Pickup, knife);
                s.interact(Interaction::Slice, x);
            });
        }
    }

    for (int x : cookable) {
        for (int pan : cookware) {
            for (int burner : burners) {
                prepared.push_back(run([&](Script& s) {
                    s.interact(Interaction::Pickup, x);
                    s.interact(Interaction::Put, pan);
                    if (s.world().object(pan).parent != burner) {
                        s.interact(Interaction::Pickup, pan);
                        s.interact(Interaction::Put, burner);
                    }
                    const int knob = s.world().object(burner).linked;
                    if (knob >= 0) s.interact(Interaction::TurnOn, knob);
                    for (int i = 0; i < kCookDelay; ++i) s.wait();
                }));
            }
        }
    }

    for (const auto& p : prepared) manifest_basic(p, out, st);
}

}  // namespace

Dataset gen_programmatic(std::uint64_t seed, ProgrammaticStats* stats) {
    ProgrammaticStats st;
    Dataset out;
    const auto names = task_names();
    for (std::size_t t = 0; t < names.size(); ++t) {
        const WorldState start = reset(names[t], core::mix_seed(seed, t)).first;
        manifest_layout(start, out, st);
    }
    if (stats) *stats = st;
    return out;
}

Dataset gen_random(std::uint64_t seed, int n) {
    if (n < 0) throw std::invalid_argument("gen_random: negative sample count");
    Dataset out;
    out.reserve(static_cast<std::size_t>(n));
    const auto names = task_names();
    core::Rng rng(core::mix_seed(seed, 0));
    for (std::uint64_t episode = 0; static_cast<int>(out.size()) < n; ++episode) {
        const auto& task = names[episode % names.size()];
        WorldState w = reset(task, core::mix_seed(seed, episode + 1)).first;
        while (!w.done && static_cast<int>(out.size()) < n) {
            const int n_vis = static_cast<int>(visible_objects(w).size());
            const ActionSpec a = ActionSpec::from_flat(rng.below(kNumNav + kNumInteractions * n_vis));
            if (a.interact) {
                LabeledSample s = make_sample(w, a);
                w = s.after;
                out.push_back(std::move(s));
            } else {
                w = step(w, a).world;
            }
        }
    }
    return out;
}

int first_replay_mismatch(std::span<const LabeledSample> data) {
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (make_sample(data[i].before, data[i].action) != data[i]) return static_cast<int>(i);
    }
    return -1;
}

std::string encode_reals(std::span<const Real> values) {
    static_assert(std::endian::native == std::endian::little, "payloads are written in host byte order");
    std::vector<unsigned char> bytes(values.size() * sizeof(double));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double v = static_cast<double>(values[i]);
        std::memcpy(bytes.data() + i * sizeof(double), &v, sizeof(double));
    }
    std::string text(sodium_base64_ENCODED_LEN(bytes.size(), sodium_base64_VARIANT_ORIGINAL), '\0');
    sodium_bin2base64(text.data(), text.size(), bytes.data(), bytes.size(), sodium_base64_VARIANT_ORIGINAL);
    text.resize(std::strlen(text.c_str()));
    return text;
}

std::vector<Real> decode_reals(const std::string& text) {
    std::vector<unsigned char> bytes(text.size());
    std::size_t len = 0;
    if (sodium_base642bin(bytes.data(), bytes.size(), text.data(), text.size(), nullptr, &len, nullptr,
                          sodium_base64_VARIANT_ORIGINAL) != 0 ||
        len % sizeof(double) != 0) {
        throw std::invalid_argument("decode_reals: malformed base64 payload");
    }
    std::vector<Real> values(len / sizeof(double));
    for (std::size_t i = 0; i < values.size(); ++i) {
        double v;
        std::memcpy(&v, bytes.data() + i * sizeof(double), sizeof(double));
        values[i] = static_cast<Real>(v);
    }
    return values;
}

namespace {

json world_to_json(const WorldState& w) {
    json objects = json::array();
    for (const auto& o : w.objects) {
        objects.push_back({o.id, index_of(o.category), o.cell.col, o.cell.row, o.height, o.is_on, o.is_open,
                           o.is_cooked, o.is_filled, o.is_sliced, o.is_picked_up, static_cast<int>(o.temperature),
                           o.parent, o.cook_timer, o.linked});
    }
    return {{"objects", std::move(objects)},
            {"agent",
             {w.agent.cell.col, w.agent.cell.row, static_cast<int>(w.agent.yaw), static_cast<int>(w.agent.pitch)}},
            {"held", w.held},
            {"step", w.step_count},
            {"rng_seed", w.rng_seed},
            {"task", w.task},
            {"done", w.done},
            {"solved", w.solved}};
}

WorldState world_from_json(const json& j) {
    WorldState w;
    for (const auto& r : j.at("objects")) {
        if (r.size() != 15) throw std::invalid_argument("dataset: object record must have 15 fields");
        ObjectState o;
        o.id = r[0].get<int>();
        o.category = category_from_index(r[1].get<int>());
        o.cell = {r[2].get<int>(), r[3].get<int>()};
        o.height = r[4].get<int>();
        o.is_on = r[5].get<bool>();
        o.is_open = r[6].get<bool>();
        o.is_cooked = r[7].get<bool>();
        o.is_filled = r[8].get<bool>();
        o.is_sliced = r[9].get<bool>();
        o.is_picked_up = r[10].get<bool>();
        o.temperature = static_cast<Temperature>(r[11].get<int>());
        o.parent = r[12].get<int>();
        o.cook_timer = r[13].get<int>();
        o.linked = r[14].get<int>();
        if (o.id != static_cast<int>(w.objects.size())) throw std::invalid_argument("dataset: object ids not dense");
        w.objects.push_back(o);
    }
    const auto& a = j.at("agent");
    w.agent = Pose{{a.at(0).get<int>(), a.at(1).get<int>()}, static_cast<Yaw>(a.at(2).get<int>()),
                   static_cast<Pitch>(a.at(3).get<int>())};
    w.held = j.at("held").get<int>();
    w.step_count = j.at("step").get<int>();
    w.rng_seed = j.at("rng_seed").get<std::uint64_t>();
    w.task = j.at("task").get<std::string>();
    w.done = j.at("done").get<bool>();
    w.solved = j.at("solved").get<bool>();
    return w;
}

}  // namespace

std::string to_jsonl(const LabeledSample& s) {
    const json j = {{"task", s.before.task},
                    {"action", s.action.flat()},
                    {"target", s.target},
                    {"applied", s.applied},
                    {"patch", encode_reals(s.patch)},
                    {"category", std::string(name_of(category_from_index(s.labels.category)))},
                    {"properties", s.labels.properties},
                    {"containment", s.labels.containment},
                    {"before", world_to_json(s.before)},
                    {"after", world_to_json(s.after)}};
    return j.dump();
}

LabeledSample from_jsonl(const std::string& line) {
    const json j = json::parse(line);
    LabeledSample s;
    s.before = world_from_json(j.at("before"));
    s.after = world_from_json(j.at("after"));
    s.action = ActionSpec::from_flat(j.at("action").get<int>());
    s.target = j.at("target").get<int>();
    s.applied = j.at("applied").get<bool>();
    s.patch = decode_reals(j.at("patch").get<std::string>());
    if (static_cast<int>(s.patch.size()) != kPatchSize) throw std::invalid_argument("dataset: patch must hold 256 values");
    const auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) throw std::invalid_argument("dataset: unknown category " + j.at("category").dump());
    s.labels.category = index_of(*cat);
    s.labels.properties = j.at("properties").get<std::array<bool, kNumProperties>>();
    s.labels.containment = j.at("containment").get<std::array<bool, kNumContainment>>();
    if (s.target < 0 || s.target >= static_cast<int>(s.after.objects.size()))
        throw std::invalid_argument("dataset: target id out of range");
    return s;
}

void write_dataset(std::ostream& out, std::span<const LabeledSample> data) {
    for (const auto& s : data) out << to_jsonl(s) << '\n';
}

void save_dataset(const std::filesystem::path& path, std::span<const LabeledSample> data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write dataset " + path.string());
    write_dataset(out, data);
    if (!out) throw std::runtime_error("failed writing dataset " + path.string());
}

Dataset read_dataset(std::istream& in) {
    Dataset data;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            data.push_back(from_jsonl(line));
        } catch (const std::exception& e) {
            throw std::invalid_argument("dataset line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return data;
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read dataset " + path.string());
    return read_dataset(in);
}

}  // namespace load::probe
