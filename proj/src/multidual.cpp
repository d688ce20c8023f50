#include "finn/multidual.hpp"

namespace finn {

namespace {

// Partitions of `s`: the lowest element joins every subset of the rest, the
// remainder is partitioned recursively.
void enumerate(Mask s, SetPartition& prefix, std::vector<SetPartition>& out) {
  if (s == 0) {
    out.push_back(prefix);
    return;
  }
  const Mask low = s & (~s + 1);
  const Mask rest = s & ~low;
  for (Mask t = rest;; t = (t - 1) & rest) {
    prefix.push_back(low | t);
    enumerate(rest & ~t, prefix, out);
    prefix.pop_back();
    if (t == 0) break;
  }
}

std::vector<std::vector<SetPartition>> build_partition_table() {
  const Mask count = Mask{1} << kMaxTrackedVars;
  std::vector<std::vector<SetPartition>> table(count);
  for (Mask s = 0; s < count; ++s) {
    SetPartition prefix;
    enumerate(s, prefix, table[s]);
  }
  return table;
}

}  // namespace

const std::vector<SetPartition>& set_partitions(Mask s) {
  static const std::vector<std::vector<SetPartition>> table = build_partition_table();
  if (s >= table.size()) throw std::out_of_range("set_partitions: mask too wide");
  return table[s];
}

}  // namespace finn
