#include "load/train/replay.hpp"

#include <algorithm>
#include <stdexcept>

namespace load::train {

void ReplayBuffer::push(Transition t) {
    if (capacity_ == 0) return;
    if (items_.size() < capacity_) {
        items_.push_back(std::move(t));
        return;
    }
    items_[head_] = std::move(t);
    head_ = (head_ + 1) % capacity_;
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= items_.size()) throw std::out_of_range("replay index " + std::to_string(i));
    return items_[(head_ + i) % items_.size()];
}

void EpisodeBuffer::push_episode(std::vector<Transition> episode) {
    if (episode.empty()) return;
    // An episode longer than the whole buffer can never fit.
    if (episode.size() > capacity_) return;
    size_ += episode.size();
    episodes_.push_back(std::move(episode));
    while (size_ > capacity_) {
        size_ -= episodes_.front().size();
        episodes_.pop_front();
    }
    rebuild_index();
}

void EpisodeBuffer::rebuild_index() {
    starts_.clear();
    std::size_t at = 0;
    for (const auto& e : episodes_) {
        starts_.push_back(at);
        at += e.size();
    }
}

const Transition& EpisodeBuffer::at(std::size_t i) const {
    if (i >= size_) throw std::out_of_range("SIL index " + std::to_string(i));
    const auto it = std::upper_bound(starts_.begin(), starts_.end(), i) - 1;
    const std::size_t e = static_cast<std::size_t>(it - starts_.begin());
    return episodes_[e][i - *it];
}

void Buffers::push_episode(const std::vector<Transition>& episode, bool succeeded) {
    for (const auto& t : episode) regular.push(t);
    if (succeeded) sil.push_episode(episode);
}

SampledBatch sample_mixed(const Buffers& buffers, int batch_size, double sil_fraction, core::Rng& rng) {
    if (buffers.regular.empty()) throw std::logic_error("sample_mixed: regular buffer is empty");
    SampledBatch batch;
    batch.items.reserve(static_cast<std::size_t>(batch_size));
    for (int s = 0; s < batch_size; ++s) {
        // The Bernoulli draw is made even when SIL is empty so the stream does not depend on it.
        const bool sil = rng.bernoulli(sil_fraction) && !buffers.sil.empty();
        const std::size_t n = sil ? buffers.sil.size() : buffers.regular.size();
        const std::size_t i = rng.below(static_cast<std::uint64_t>(n));
        batch.items.push_back(sil ? &buffers.sil.at(i) : &buffers.regular.at(i));
        batch.from_sil.push_back(sil);
        batch.indices.push_back(i);
    }
    return batch;
}

}  // namespace load::train
