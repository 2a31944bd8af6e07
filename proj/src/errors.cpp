#include "factorlasso/errors.hpp"

#include <algorithm>

namespace factorlasso {

namespace {

std::string describe_columns(const std::vector<Index>& columns)
{
    std::string message = "degenerate columns (zero empirical second moment):";
    const std::size_t shown = std::min<std::size_t>(columns.size(), 20);
    for (std::size_t i = 0; i < shown; ++i)
        message += " " + std::to_string(columns[i]);
    if (shown < columns.size())
        message += " ... (" + std::to_string(columns.size()) + " total)";
    return message;
}

std::string describe_nonconvergence(int sweeps, std::optional<std::size_t> grid_index)
{
    std::string message = "coordinate descent did not converge after " + std::to_string(sweeps) + " sweeps";
    if (grid_index)
        message += " at grid index " + std::to_string(*grid_index);
    return message;
}

} // namespace

DegenerateColumnError::DegenerateColumnError(std::vector<Index> columns)
    : NumericalError(describe_columns(columns)), columns_(std::move(columns))
{}

NonConvergenceError::NonConvergenceError(Vector last_iterate, int sweeps, std::optional<std::size_t> grid_index)
    : NumericalError(describe_nonconvergence(sweeps, grid_index)),
      last_iterate_(std::move(last_iterate)), sweeps_(sweeps), grid_index_(grid_index)
{}

} // namespace factorlasso
