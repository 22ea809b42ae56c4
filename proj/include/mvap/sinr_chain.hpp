#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "mvap/error.hpp"
#include "mvap/random.hpp"

namespace mvap {

/// Finite-state Markov chain over SINR levels (dB) of the MVAP-to-ECS link.
/// Row i of the transition matrix is the distribution of the next state given state i.
class SinrChain {
public:
    static constexpr double kRowTolerance = 1e-9;

    SinrChain(std::vector<double> states_db, std::vector<std::vector<double>> transition,
              std::size_t seed_index = 0)
        : states_db_(std::move(states_db)), transition_(std::move(transition)) {
        require(!states_db_.empty(), Errc::ShapeMismatch, "SINR state set is empty");
        require(transition_.size() == states_db_.size(), Errc::ShapeMismatch,
                "transition matrix must have one row per SINR state");
        for (std::size_t i = 0; i < transition_.size(); ++i) {
            const auto& row = transition_[i];
            require(row.size() == states_db_.size(), Errc::ShapeMismatch,
                    "transition row " + std::to_string(i) + " has wrong length");
            double sum = 0.0;
            for (double p : row) {
                require(std::isfinite(p) && p >= 0.0 && p <= 1.0, Errc::NonStochasticRow,
                        "transition row " + std::to_string(i) + " has an entry outside [0,1]");
                sum += p;
            }
            require(std::abs(sum - 1.0) <= kRowTolerance, Errc::NonStochasticRow,
                    "transition row " + std::to_string(i) + " sums to " + std::to_string(sum));
        }
        require(seed_index < states_db_.size(), Errc::ShapeMismatch, "seed index out of range");
        current_ = seed_index;
    }

    std::size_t size() const { return states_db_.size(); }
    std::size_t current_index() const { return current_; }
    double current_db() const { return states_db_[current_]; }
    const std::vector<double>& states_db() const { return states_db_; }
    const std::vector<std::vector<double>>& transition() const { return transition_; }

    void reset_to(std::size_t index) {
        require(index < states_db_.size(), Errc::ShapeMismatch, "SINR index out of range");
        current_ = index;
    }

    /// Uniform initial state.
    void reset_uniform(Rng& rng) { current_ = static_cast<std::size_t>(uniform_index(rng, size())); }

    /// Resample the current index from its transition row; returns the new SINR in dB.
    double step(Rng& rng) {
        const auto& row = transition_[current_];
        const double u = uniform01(rng);
        double acc = 0.0;
        std::size_t next = row.size() - 1;
        for (std::size_t j = 0; j < row.size(); ++j) {
            acc += row[j];
            if (u < acc) {
                next = j;
                break;
            }
        }
        // Rounding can leave u above the accumulated sum; fall back to the last
        // reachable state rather than one with zero probability.
        if (acc <= u) {
            while (next > 0 && row[next] == 0.0) --next;
        }
        current_ = next;
        return states_db_[current_];
    }

private:
    std::vector<double> states_db_;
    std::vector<std::vector<double>> transition_;
    std::size_t current_ = 0;
};

/// Rescales each row by its sum. Rows that already sum to one are left bit-identical.
inline std::vector<std::vector<double>> normalize_rows(std::vector<std::vector<double>> m) {
    for (std::size_t i = 0; i < m.size(); ++i) {
        double sum = 0.0;
        for (double p : m[i]) sum += p;
        require(sum > 0.0 && std::isfinite(sum), Errc::NonStochasticRow,
                "row " + std::to_string(i) + " cannot be normalised");
        if (std::abs(sum - 1.0) <= SinrChain::kRowTolerance) continue;
        for (double& p : m[i]) p /= sum;
    }
    return m;
}

}  // namespace mvap
