#pragma once

#include <cstddef>
#include <vector>

namespace bsde {

// Strictly increasing time nodes with nodes[0] = 0 and nodes[last] = T.
class TimeGrid {
    std::vector<double> nodes_;

public:
    TimeGrid() : nodes_{0.0, 1.0} {} // unit interval, one step
    explicit TimeGrid(std::vector<double> nodes);
    static TimeGrid uniform(double horizon, std::size_t n_steps);

    std::size_t size() const { return nodes_.size(); }
    std::size_t steps() const { return nodes_.size() - 1; }
    double operator[](std::size_t i) const { return nodes_[i]; }
    double dt(std::size_t i) const { return nodes_[i + 1] - nodes_[i]; }
    double horizon() const { return nodes_.back(); }
    const std::vector<double>& nodes() const { return nodes_; }

    // Index of the first node with time >= r. Throws DomainError for r outside [0, T].
    std::size_t first_node_at_or_after(double r) const;

    bool operator==(const TimeGrid& other) const { return nodes_ == other.nodes_; }
};

} // namespace bsde
