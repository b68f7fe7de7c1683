#pragma once

#include "minsurro/core/region.hpp"

#include <random>
#include <vector>

namespace minsurro {

/// Euclidean projection onto the box part of `region` (a clamp).
Vec project_onto_region(const FeasibleRegion& region, const Vec& x);

/// Uniform draws from the box enlarged by `delta` per coordinate, each
/// projected back onto the box.
std::vector<Vec> projected_sample(const FeasibleRegion& region, const Vec& delta, std::size_t count,
                                  std::mt19937_64& rng);

enum class ParamMode { Uniform, Inherited };

/// Uniform: i.i.d. draws from the box [lower, upper]. Inherited: the recorded
/// list, cycled when count exceeds its length.
std::vector<Vec> sample_parameters(ParamMode mode, const Vec& lower, const Vec& upper,
                                   const std::vector<Vec>& inherited, std::size_t count, std::mt19937_64& rng);

} // namespace minsurro
