#pragma once

#include <cstddef>
#include <vector>

namespace cpdpo {

using StateId = std::size_t;
using ActionId = std::size_t;
using PairId = std::size_t;

/**
 * Layout of a loop-free episodic state space.
 *
 * States are partitioned into layers X_0..X_L and numbered consecutively layer by
 * layer, so the initial state is 0 and the terminal state is num_states() - 1.
 * Vectors indexed on state-action pairs cover the non-terminal states only:
 * pair(x, a) = x * num_actions() + a.
 *
 * A transition kernel is stored as one dense row per non-terminal pair, the row
 * spanning exactly the states of the next layer. row_offset(x, a) locates the row
 * inside a kernel buffer of kernel_size() entries.
 */
class LayeredShape {
public:
    LayeredShape() = default;
    /// Throws std::invalid_argument when there are fewer than two layers, an empty
    /// layer, a non-singleton first or last layer, or no actions.
    LayeredShape(std::vector<std::size_t> layer_sizes, std::size_t num_actions);

    std::size_t horizon() const { return layer_sizes_.size() - 1; }
    std::size_t num_layers() const { return layer_sizes_.size(); }
    std::size_t num_states() const { return layer_start_.back(); }
    std::size_t num_actions() const { return num_actions_; }
    std::size_t num_pairs() const { return (num_states() - 1) * num_actions_; }
    std::size_t kernel_size() const { return kernel_size_; }

    const std::vector<std::size_t>& layer_sizes() const { return layer_sizes_; }
    std::size_t layer_size(std::size_t k) const { return layer_sizes_[k]; }
    StateId layer_begin(std::size_t k) const { return layer_start_[k]; }
    StateId layer_end(std::size_t k) const { return layer_start_[k + 1]; }
    std::size_t layer_of(StateId x) const { return state_layer_[x]; }
    std::size_t index_in_layer(StateId x) const { return x - layer_start_[state_layer_[x]]; }
    StateId state(std::size_t k, std::size_t j) const { return layer_start_[k] + j; }

    StateId initial_state() const { return 0; }
    StateId terminal_state() const { return num_states() - 1; }
    bool is_terminal(StateId x) const { return x + 1 == num_states(); }

    PairId pair(StateId x, ActionId a) const { return x * num_actions_ + a; }
    StateId pair_state(PairId p) const { return p / num_actions_; }
    ActionId pair_action(PairId p) const { return p % num_actions_; }

    /// Number of successors of a non-terminal state (size of the next layer).
    std::size_t row_width(StateId x) const { return layer_sizes_[state_layer_[x] + 1]; }
    std::size_t row_offset(StateId x, ActionId a) const
    {
        return row_start_[x] + a * row_width(x);
    }
    std::size_t row_offset(PairId p) const { return row_offset(pair_state(p), pair_action(p)); }
    /// First successor state id of a non-terminal state.
    StateId first_successor(StateId x) const { return layer_start_[state_layer_[x] + 1]; }
    std::size_t max_row_width() const { return max_row_width_; }

    bool operator==(const LayeredShape& other) const
    {
        return layer_sizes_ == other.layer_sizes_ && num_actions_ == other.num_actions_;
    }

private:
    std::vector<std::size_t> layer_sizes_;
    std::size_t num_actions_ = 0;
    std::vector<std::size_t> layer_start_;
    std::vector<std::size_t> state_layer_;
    std::vector<std::size_t> row_start_;
    std::size_t kernel_size_ = 0;
    std::size_t max_row_width_ = 0;
};

} // namespace cpdpo
