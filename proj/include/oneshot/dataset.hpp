#pragma once

#include <string>
#include <vector>

#include "oneshot/frame.hpp"
#include "oneshot/pairs.hpp"

namespace oneshot {

// Memory-mapped access to every run referenced by a pair store. Paths in the
// store are relative to its own directory.
class RunCache {
 public:
  RunCache(const PairStore& store, const std::string& store_dir);

  const RunView& view(uint32_t run_idx) const { return views_[run_idx]; }
  size_t count() const { return views_.size(); }

 private:
  std::vector<RunView> views_;
};

}  // namespace oneshot
