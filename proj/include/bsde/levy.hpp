#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "bsde/time_grid.hpp"

namespace bsde {

struct JumpAtom {
    double mark;      // nonzero jump size
    double intensity; // arrivals per unit time, > 0

    bool operator==(const JumpAtom&) const = default;
};

// Drift, diffusion coefficient and an atomic jump measure.  All atoms are
// simulated compensated, so gamma is the drift of the full compensated
// process and E[X_t] = gamma * t regardless of mark sizes.
class LevyTriplet {
    double gamma_;
    double sigma_;
    std::vector<JumpAtom> atoms_;

public:
    LevyTriplet(double gamma, double sigma, std::vector<JumpAtom> atoms = {});

    double gamma() const { return gamma_; }
    double sigma() const { return sigma_; }
    std::span<const JumpAtom> atoms() const { return atoms_; }

    double total_intensity() const;
    double mean_rate() const { return gamma_; }          // E[X_1]
    double variance_rate() const;                        // Var[X_1]
};

// Sampled paths of X on a time grid.  Rows are paths; each path is drawn
// from its own counter-based substream keyed by (seed, path index), so path
// p is identical for every bundle with n_paths > p.
struct PathBundle {
    TimeGrid grid;
    std::size_t n_paths = 0;
    std::uint64_t seed = 0;
    std::size_t n_atoms = 0;
    std::vector<double> brownian_increments;  // (path, interval)
    std::vector<std::uint32_t> jump_counts;   // (path, interval, atom)
    std::vector<double> values;               // (path, node)

    double w(std::size_t path, std::size_t interval) const {
        return brownian_increments[path * grid.steps() + interval];
    }
    std::uint32_t count(std::size_t path, std::size_t interval, std::size_t atom) const {
        return jump_counts[(path * grid.steps() + interval) * n_atoms + atom];
    }
    double value(std::size_t path, std::size_t node) const {
        return values[path * grid.size() + node];
    }
    std::span<const double> path(std::size_t p) const {
        return {values.data() + p * grid.size(), grid.size()};
    }
};

PathBundle sample_paths(const LevyTriplet& model, const TimeGrid& grid,
                        std::size_t n_paths, std::uint64_t seed);

// Values of path `path_index` with +v added to every node at time >= r.
// The bundle itself is untouched.
std::vector<double> shift_path(const PathBundle& bundle, std::size_t path_index,
                               double r, double v);

// Same shift applied to raw node values.
std::vector<double> shift_values(std::span<const double> values, const TimeGrid& grid,
                                 double r, double v);

// Bundle with every path shifted by v from time r on.  Increments and jump
// counts are untouched; only the sampled values move.
PathBundle shifted_bundle(const PathBundle& bundle, double r, double v);

double kappa(double x);                    // 1 ∧ |x|
double kappa_n(double x, unsigned n);      // 1 ∧ |n x|

// L2 norm over the atomic measure: sqrt(sum h(x_j)^2 lambda_j).
double l2_nu_norm(const std::function<double(double)>& h, std::span<const JumpAtom> atoms);
double kappa_l2_norm(std::span<const JumpAtom> atoms);

struct DiscretizedMeasure {
    std::vector<JumpAtom> atoms;
    double truncated_mass = 0.0; // discarded  x^2 density  mass inside the cutoff
};

// Atomic approximation of a jump density on [lo, hi] (an interval excluding 0):
// n_atoms uniform cells, marks at cell midpoints, intensities equal to the
// cell-integrated density.  Mass inside (-cutoff, cutoff) is dropped and
// reported as truncated_mass.
DiscretizedMeasure discretize_density(const std::function<double(double)>& density,
                                      double lo, double hi, std::size_t n_atoms,
                                      double small_jump_cutoff);

} // namespace bsde
