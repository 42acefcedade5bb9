#pragma once

#include <cstdint>
#include <vector>

#include "chairgan/core/error.hpp"
#include "chairgan/core/rng.hpp"

namespace chairgan::dataset {

inline constexpr std::uint64_t kBatchStream = 0x4241'5443'48ull;  // "BATCH"

inline std::uint64_t epoch_seed(std::uint64_t seed, std::uint64_t epoch) {
  return derive_seed(derive_seed(seed, kBatchStream), epoch);
}

/// Splits a (seed, epoch)-keyed permutation of `ids` into batches; the last
/// batch may be short.
template <typename Id>
std::vector<std::vector<Id>> minibatches(const std::vector<Id>& ids, std::size_t batch_size, std::uint64_t seed,
                                         std::uint64_t epoch) {
  if (batch_size < 1) throw InvalidArgument("minibatches: batch_size must be >= 1");
  if (ids.empty()) throw EmptyDataset("minibatches: no ids");
  std::vector<Id> order = ids;
  Rng rng(epoch_seed(seed, epoch));
  rng.shuffle(order);
  std::vector<std::vector<Id>> batches;
  for (std::size_t i = 0; i < order.size(); i += batch_size) {
    const std::size_t end = std::min(order.size(), i + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(i), order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

inline std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) { return (n + batch_size - 1) / batch_size; }

}  // namespace chairgan::dataset
