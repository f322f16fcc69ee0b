#include "oneshot/dataset.hpp"

#include <filesystem>

namespace oneshot {

RunCache::RunCache(const PairStore& store, const std::string& store_dir) {
  views_.reserve(store.runs.size());
  for (const auto& r : store.runs) {
    const std::filesystem::path p = std::filesystem::path(store_dir) / r.path;
    views_.emplace_back(p.string());
  }
}

}  // namespace oneshot
