#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <vector>

#include "load/core/rng.hpp"
#include "load/kitchen/world.hpp"

namespace load::train {

// Worlds are shared between consecutive transitions; observations are re-rendered on demand.
struct Transition {
    std::shared_ptr<const kitchen::WorldState> before;
    std::shared_ptr<const kitchen::WorldState> after;
    kitchen::ActionSpec action;
    double reward = 0.0;
    bool done = false;
    std::int64_t episode_id = 0;
};

// Fixed-capacity FIFO ring of transitions.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push(Transition t);
    std::size_t size() const { return items_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return items_.empty(); }
    // Oldest first.
    const Transition& at(std::size_t i) const;

private:
    std::size_t capacity_;
    std::size_t head_ = 0;  // index of the oldest item once full
    std::vector<Transition> items_;
};

// Successful episodes only; eviction drops whole episodes, oldest first.
class EpisodeBuffer {
public:
    explicit EpisodeBuffer(std::size_t capacity) : capacity_(capacity) {}

    void push_episode(std::vector<Transition> episode);
    std::size_t size() const { return size_; }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return size_ == 0; }
    std::size_t num_episodes() const { return episodes_.size(); }
    const Transition& at(std::size_t i) const;
    const std::deque<std::vector<Transition>>& episodes() const { return episodes_; }

private:
    std::size_t capacity_;
    std::size_t size_ = 0;
    std::deque<std::vector<Transition>> episodes_;
    // Prefix sums of episode lengths for O(log n) indexing.
    std::vector<std::size_t> starts_;
    void rebuild_index();
};

struct Buffers {
    ReplayBuffer regular;
    EpisodeBuffer sil;

    Buffers(std::size_t regular_capacity, std::size_t sil_capacity) : regular(regular_capacity), sil(sil_capacity) {}

    // Every transition goes to the regular buffer; successful episodes also go to SIL.
    void push_episode(const std::vector<Transition>& episode, bool succeeded);
};

struct SampledBatch {
    std::vector<const Transition*> items;
    std::vector<bool> from_sil;
    std::vector<std::size_t> indices;  // position within the source buffer
};

// Each slot comes from SIL with probability sil_fraction (when SIL is nonempty), otherwise
// from the regular buffer; indices uniform within the chosen buffer.
SampledBatch sample_mixed(const Buffers& buffers, int batch_size, double sil_fraction, core::Rng& rng);

}  // namespace load::train
