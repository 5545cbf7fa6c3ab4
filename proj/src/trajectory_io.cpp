#include "dkv/trajectory_io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string_view>

namespace dkv {

void write_trajectory(std::ostream& os, const Trajectory& traj) {
  os << kTrajectoryHeader << '\n';
  char buf[512];
  for (const Snapshot& s : traj) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t,
                  s.state.Vx, s.state.Vy, s.state.wr, s.input.T, s.input.delta_f, s.ax, s.ay);
    os << buf;
  }
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_trajectory(os, traj);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

Trajectory read_trajectory(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("trajectory: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader) {
    throw std::runtime_error("trajectory line 1: expected header '" + std::string(kTrajectoryHeader) +
                             "'");
  }
  Trajectory out;
  std::size_t lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::array<double, 8> v{};
    std::string_view rest(line);
    for (std::size_t i = 0; i < v.size(); ++i) {
      const auto comma = rest.find(',');
      const std::string_view field = rest.substr(0, comma);
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v[i]);
      const bool last = i + 1 == v.size();
      if (ec != std::errc() || ptr != field.data() + field.size() || !std::isfinite(v[i]) ||
          (last != (comma == std::string_view::npos))) {
        throw std::runtime_error("trajectory line " + std::to_string(lineno) +
                                 ": expected 8 finite comma-separated numbers");
      }
      if (!last) rest.remove_prefix(comma + 1);
    }
    out.push_back({v[0], {v[1], v[2], v[3]}, {v[4], v[5]}, v[6], v[7]});
  }
  return out;
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trajectory '" + path + "'");
  try {
    return read_trajectory(is);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

std::uint64_t trajectory_hash(const Trajectory& traj) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double x) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof x);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  };
  for (const Snapshot& s : traj) {
    for (double x : {s.t, s.state.Vx, s.state.Vy, s.state.wr, s.input.T, s.input.delta_f, s.ax, s.ay}) {
      mix(x);
    }
  }
  return h;
}

}  // namespace dkv
