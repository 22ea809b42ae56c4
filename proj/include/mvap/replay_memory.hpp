#pragma once

#include <cstddef>
#include <vector>

#include "mvap/environment.hpp"
#include "mvap/error.hpp"
#include "mvap/random.hpp"

namespace mvap {

struct Transition {
    Features state{};
    int action = 0;
    double reward = 0.0;
    Features next_state{};
    bool terminal = false;
};

/// Fixed-capacity FIFO ring; once full, each push overwrites the oldest entry.
class ReplayMemory {
public:
    explicit ReplayMemory(std::size_t capacity) : capacity_(capacity) {
        require(capacity >= 1, Errc::InvalidParameter, "replay capacity must be >= 1");
        buffer_.reserve(capacity);
    }

    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return buffer_.size(); }
    bool empty() const { return buffer_.empty(); }

    void push(const Transition& t) {
        if (buffer_.size() < capacity_) {
            buffer_.push_back(t);
        } else {
            buffer_[head_] = t;
        }
        head_ = (head_ + 1) % capacity_;
    }

    /// Entries in insertion order, oldest first.
    std::vector<Transition> contents() const {
        if (buffer_.size() < capacity_) return buffer_;
        std::vector<Transition> out;
        out.reserve(capacity_);
        for (std::size_t i = 0; i < capacity_; ++i) out.push_back(buffer_[(head_ + i) % capacity_]);
        return out;
    }

    /// `count` indices drawn uniformly with replacement from the stored transitions.
    std::vector<const Transition*> sample(std::size_t count, Rng& rng) const {
        require(!buffer_.empty(), Errc::EmptyBatch, "cannot sample from an empty replay memory");
        std::vector<const Transition*> out;
        out.reserve(count);
        for (std::size_t i = 0; i < count; ++i) out.push_back(&buffer_[uniform_index(rng, buffer_.size())]);
        return out;
    }

private:
    std::size_t capacity_;
    std::vector<Transition> buffer_;
    std::size_t head_ = 0;
};

}  // namespace mvap
