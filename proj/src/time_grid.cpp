#include "bsde/time_grid.hpp"

#include <algorithm>
#include <cmath>

#include "bsde/errors.hpp"

namespace bsde {

TimeGrid::TimeGrid(std::vector<double> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.size() < 2)
        throw ConfigurationError("time grid needs at least 2 nodes");
    if (nodes_.front() != 0.0)
        throw ConfigurationError("time grid must start at 0");
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
        if (!(nodes_[i] < nodes_[i + 1]))
            throw ConfigurationError("time grid nodes must be strictly increasing");
    }
    if (!std::isfinite(nodes_.back()))
        throw ConfigurationError("time grid horizon must be finite");
}

TimeGrid TimeGrid::uniform(double horizon, std::size_t n_steps) {
    if (!(horizon > 0.0))
        throw ConfigurationError("time grid horizon must be positive");
    if (n_steps == 0)
        throw ConfigurationError("time grid needs at least 1 step");
    std::vector<double> nodes(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        nodes[i] = horizon * static_cast<double>(i) / static_cast<double>(n_steps);
    nodes.back() = horizon;
    return TimeGrid(std::move(nodes));
}

std::size_t TimeGrid::first_node_at_or_after(double r) const {
    if (r < 0.0 || r > horizon())
        throw DomainError("time outside [0, T]");
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), r);
    return static_cast<std::size_t>(it - nodes_.begin());
}

} // namespace bsde
