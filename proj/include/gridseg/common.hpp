#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace gridseg {

// Error categories, mapped to process exit codes by the CLI:
// input_error -> 2, numeric_error -> 3, format_error -> 4.
struct input_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numeric_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Runs fn over [0,n) split into contiguous chunks, one thread per chunk.
// Callers must write disjoint outputs and keep any reduction inside a single
// chunk element, so results do not depend on the thread count.
void parallel_for(std::int64_t n, int threads,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

// Uniform [0,1) from the top 24 bits of one mt19937 draw. std::uniform_*
// distributions are implementation-defined, this is reproducible everywhere.
inline float uniform01(std::mt19937& rng) {
  return static_cast<float>(rng() >> 8) * (1.0f / 16777216.0f);
}

inline float uniform(std::mt19937& rng, float lo, float hi) {
  return lo + (hi - lo) * uniform01(rng);
}

// Inclusive range.
inline int uniform_int(std::mt19937& rng, int lo, int hi) {
  return lo + static_cast<int>(rng() % static_cast<std::uint32_t>(hi - lo + 1));
}

std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t state = 14695981039346656037ULL);

}  // namespace gridseg
