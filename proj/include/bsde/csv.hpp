#pragma once

#include <iosfwd>
#include <span>
#include <string>

#include "bsde/hgen.hpp"
#include "bsde/levy.hpp"
#include "bsde/pdie.hpp"
#include "bsde/solver.hpp"

namespace bsde {

// Shortest representation with 17 significant digits (round-trip exact).
std::string format_value(double v);

// One row per (t, state-or-path, quantity); quantity is Y, Z or U@mark.
void write_solution_csv(std::ostream& os, const DiscreteSolution& sol);

// Rebuilds a solution from the CSV rows.  Path solutions come back in
// lattice layout (column index as the state); grid, values and atom marks
// round-trip exactly.
DiscreteSolution read_solution_csv(std::istream& is);

void write_paths_csv(std::ostream& os, const PathBundle& bundle);
void write_pdie_csv(std::ostream& os, const PdieGrid& grid);
void write_hlimit_csv(std::ostream& os, std::span<const HLimitRow> table);

} // namespace bsde
