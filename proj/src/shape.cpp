#include "cpdpo/shape.hpp"

#include <algorithm>
#include <stdexcept>
#include <utility>

namespace cpdpo {

LayeredShape::LayeredShape(std::vector<std::size_t> layer_sizes, std::size_t num_actions)
    : layer_sizes_(std::move(layer_sizes)), num_actions_(num_actions)
{
    if (layer_sizes_.size() < 2)
        throw std::invalid_argument("a layered shape needs at least two layers");
    if (num_actions_ == 0)
        throw std::invalid_argument("a layered shape needs at least one action");
    if (std::any_of(layer_sizes_.begin(), layer_sizes_.end(), [](std::size_t s) { return s == 0; }))
        throw std::invalid_argument("empty layer in layered shape");
    if (layer_sizes_.front() != 1 || layer_sizes_.back() != 1)
        throw std::invalid_argument("first and last layers must be singletons");

    layer_start_.assign(layer_sizes_.size() + 1, 0);
    for (std::size_t k = 0; k < layer_sizes_.size(); ++k)
        layer_start_[k + 1] = layer_start_[k] + layer_sizes_[k];

    state_layer_.resize(layer_start_.back());
    for (std::size_t k = 0; k < layer_sizes_.size(); ++k)
        std::fill(state_layer_.begin() + static_cast<std::ptrdiff_t>(layer_start_[k]),
                  state_layer_.begin() + static_cast<std::ptrdiff_t>(layer_start_[k + 1]), k);

    // Every state outside the last layer owns num_actions rows over the next layer.
    const std::size_t non_terminal = layer_start_[layer_sizes_.size() - 1];
    row_start_.assign(non_terminal + 1, 0);
    for (StateId x = 0; x < non_terminal; ++x) {
        const std::size_t width = layer_sizes_[state_layer_[x] + 1];
        row_start_[x + 1] = row_start_[x] + num_actions_ * width;
        max_row_width_ = std::max(max_row_width_, width);
    }
    kernel_size_ = row_start_.back();
}

} // namespace cpdpo
