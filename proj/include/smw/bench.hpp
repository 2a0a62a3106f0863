#pragma once

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace smw {

// Wall-clock summary for one grid point of a scaling study.
struct BenchRecord {
  double axis = 0.0;
  double median_s = 0.0;
  double min_s = 0.0;
  double max_s = 0.0;
  std::size_t repeats = 0;
  std::string config;  // free-form echo of the run configuration
};

// Times f() over `repeats` runs (>= 3) after one discarded warm-up run.
template <typename F>
inline BenchRecord time_median(F&& f, std::size_t repeats, double axis) {
  if (repeats < 3) throw std::invalid_argument("timing records require repeats >= 3");
  using clock = std::chrono::steady_clock;
  f();  // warm-up
  std::vector<double> times(repeats);
  for (auto& t : times) {
    const auto start = clock::now();
    f();
    t = std::chrono::duration<double>(clock::now() - start).count();
  }
  std::sort(times.begin(), times.end());
  BenchRecord r;
  r.axis = axis;
  r.median_s = times[repeats / 2];
  r.min_s = times.front();
  r.max_s = times.back();
  r.repeats = repeats;
  return r;
}

}  // namespace smw
