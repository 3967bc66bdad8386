#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace raschsel {

using Engine = std::mt19937_64;

// Engine for the stream named by (base seed, stream ids...). Every
// replication, subset and retry gets its own named stream, so results do not
// depend on the order in which work is scheduled.
inline Engine make_engine(std::initializer_list<std::uint64_t> stream) {
  std::vector<std::uint32_t> words;
  words.reserve(stream.size() * 2 + 1);
  words.push_back(static_cast<std::uint32_t>(stream.size()));
  for (auto v : stream) {
    words.push_back(static_cast<std::uint32_t>(v));
    words.push_back(static_cast<std::uint32_t>(v >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  return Engine(seq);
}

// Stream tags keep generation, permutation and subsampling draws apart.
enum class Stream : std::uint64_t {
  abilities = 1,
  responses = 2,
  permutation = 3,
  subsample = 4,
};

}  // namespace raschsel
