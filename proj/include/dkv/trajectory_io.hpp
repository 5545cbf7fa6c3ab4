#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include "dkv/vehicle.hpp"

namespace dkv {

inline constexpr const char* kTrajectoryHeader = "t,Vx,Vy,wr,T,delta_f,ax,ay";

/// Comma-separated, one row per snapshot, 17 significant digits (lossless).
void write_trajectory(std::ostream& os, const Trajectory& traj);
void write_trajectory(const std::string& path, const Trajectory& traj);

/// Throws std::runtime_error naming the 1-based line of the first malformed row.
Trajectory read_trajectory(std::istream& is);
Trajectory read_trajectory(const std::string& path);

/// FNV-1a over the raw bytes of every field, in order.
std::uint64_t trajectory_hash(const Trajectory& traj);

}  // namespace dkv
