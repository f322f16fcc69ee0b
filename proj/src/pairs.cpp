#include "oneshot/pairs.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include "oneshot/check.hpp"
#include "oneshot/rng.hpp"

namespace oneshot {

std::vector<TrainingPair> generate_pairs(const std::vector<SectionLayout>& run_layouts, uint64_t seed,
                                         bool near_negatives, PairGenStats* stats) {
  check(!run_layouts.empty(), "generate_pairs: need at least one run");
  const size_t n_runs = run_layouts.size();
  const auto dirs = run_layouts[0].directions();
  for (size_t r = 1; r < n_runs; ++r)
    check(run_layouts[r].directions() == dirs, "generate_pairs: run ", r,
          " has a different section structure than run 0; runs of one course must align by section index");

  PairGenStats local;
  PairGenStats& st = stats ? *stats : local;
  std::vector<TrainingPair> out;

  for (size_t j = 0; j < dirs.size(); ++j) {
    bool usable = true;
    for (size_t r = 0; r < n_runs; ++r)
      if (!run_layouts[r].sections[j].usable_for_pairs()) usable = false;
    if (!usable) {
      st.warnings.push_back(strcat_msg("section ", j, " shorter than ", kSectionEndFrames + kWindowFrames,
                                       " frames in some run; skipped"));
      continue;
    }

    // Reference windows: each of the 6 start offsets inside the 15-frame end.
    constexpr int kRefPositions = kSectionEndFrames - kWindowFrames + 1;
    struct Window {
      uint32_t run, start;
    };
    std::vector<Window> refs;
    for (uint32_t r = 0; r < n_runs; ++r) {
      const Section& s = run_layouts[r].sections[j];
      for (int p = 0; p < kRefPositions; ++p)
        refs.push_back({r, static_cast<uint32_t>(s.end_start() + p)});
    }

    // Positives: every ordered (reference window, test window) combination;
    // test windows come from the same enumeration.
    for (const auto& ref : refs)
      for (const auto& test : refs) {
        TrainingPair p;
        p.ref_run = ref.run;
        p.ref_start = ref.start;
        p.test_run = test.run;
        p.test_start = test.start;
        p.section = static_cast<uint16_t>(j);
        p.label = 1;
        p.kind = PairKind::positive;
        out.push_back(p);
        ++st.positives;
      }
    const int n_pos = static_cast<int>(refs.size() * refs.size());

    // Negatives: test window must end >= 10 frames before the section end.
    Rng rng(Rng::derive(seed, strcat_msg("negatives-", j)));
    std::vector<std::pair<uint32_t, int>> neg_ranges;  // (run, max start)
    bool any_neg_range = false;
    for (uint32_t r = 0; r < n_runs; ++r) {
      const Section& s = run_layouts[r].sections[j];
      const int max_start = s.end_start() - kTrainingBufferFrames - kWindowFrames;  // window end stays clear
      neg_ranges.push_back({r, max_start});
      if (max_start >= s.start) any_neg_range = true;
    }
    if (!any_neg_range) {
      st.warnings.push_back(strcat_msg("section ", j, " has no room for negative windows; none generated"));
    } else {
      const int want = 2 * n_pos;
      int made = 0;
      while (made < want) {
        const auto& ref = refs[static_cast<size_t>(rng.below(static_cast<int>(refs.size())))];
        const uint32_t tr = static_cast<uint32_t>(rng.below(static_cast<int>(n_runs)));
        const Section& s = run_layouts[tr].sections[j];
        const int max_start = neg_ranges[tr].second;
        if (max_start < s.start) continue;
        const int start = s.start + rng.below(max_start - s.start + 1);
        TrainingPair p;
        p.ref_run = ref.run;
        p.ref_start = ref.start;
        p.test_run = tr;
        p.test_start = static_cast<uint32_t>(start);
        p.section = static_cast<uint16_t>(j);
        p.label = 0;
        p.kind = PairKind::negative;
        out.push_back(p);
        ++st.negatives;
        ++made;
      }
    }

    if (near_negatives) {
      // Windows fully inside the 15 frames preceding the section end, every
      // combination with every reference, each twice.
      for (const auto& ref : refs)
        for (uint32_t tr = 0; tr < n_runs; ++tr) {
          const Section& s = run_layouts[tr].sections[j];
          const int zone_start = s.end_start() - kTestBufferFrames;
          for (int p = 0; p < kRefPositions; ++p) {
            const int start = zone_start + p;
            if (start < s.start) continue;
            for (int copy = 0; copy < 2; ++copy) {
              TrainingPair tp;
              tp.ref_run = ref.run;
              tp.ref_start = ref.start;
              tp.test_run = tr;
              tp.test_start = static_cast<uint32_t>(start);
              tp.section = static_cast<uint16_t>(j);
              tp.label = 0;
              tp.kind = PairKind::near_negative;
              out.push_back(tp);
              ++st.near_negatives;
            }
          }
        }
    }
  }
  return out;
}

std::string PairStore::group_key(const TrainingPair& p) const {
  return runs[p.ref_run].course_key + "#" + std::to_string(p.section);
}

namespace {
constexpr char kMagic[4] = {'O', 'S', 'P', '1'};
constexpr uint16_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}
void write_str(std::ostream& out, const std::string& s) {
  write_pod(out, static_cast<uint16_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}
std::string read_str(std::istream& in) {
  const auto len = read_pod<uint16_t>(in);
  std::string s(len, '\0');
  in.read(s.data(), len);
  return s;
}
}  // namespace

void save_pair_store(const PairStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "pair store: cannot write ", path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<uint16_t>(kWindowFrames));
  write_pod(out, static_cast<uint32_t>(store.runs.size()));
  for (const auto& r : store.runs) {
    write_str(out, r.path);
    write_str(out, r.course_key);
    write_pod(out, static_cast<uint8_t>(r.mirrored ? 1 : 0));
  }
  write_pod(out, static_cast<uint32_t>(store.pairs.size()));
  for (const auto& p : store.pairs) {
    write_pod(out, p.ref_run);
    write_pod(out, p.ref_start);
    write_pod(out, p.test_run);
    write_pod(out, p.test_start);
    write_pod(out, p.section);
    write_pod(out, p.label);
    write_pod(out, static_cast<uint8_t>(p.kind));
  }
  check(out.good(), "pair store: write failed for ", path);
}

PairStore load_pair_store(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "pair store: cannot open ", path);
  char magic[4];
  in.read(magic, 4);
  check(in.good() && std::memcmp(magic, kMagic, 4) == 0, "pair store: ", path, " is not an OSP1 file");
  check(read_pod<uint16_t>(in) == kVersion, "pair store: unsupported version in ", path);
  check(read_pod<uint16_t>(in) == kWindowFrames, "pair store: window length mismatch in ", path);
  PairStore store;
  const auto n_runs = read_pod<uint32_t>(in);
  store.runs.resize(n_runs);
  for (auto& r : store.runs) {
    r.path = read_str(in);
    r.course_key = read_str(in);
    r.mirrored = read_pod<uint8_t>(in) != 0;
  }
  const auto n_pairs = read_pod<uint32_t>(in);
  store.pairs.resize(n_pairs);
  for (auto& p : store.pairs) {
    p.ref_run = read_pod<uint32_t>(in);
    p.ref_start = read_pod<uint32_t>(in);
    p.test_run = read_pod<uint32_t>(in);
    p.test_start = read_pod<uint32_t>(in);
    p.section = read_pod<uint16_t>(in);
    p.label = read_pod<uint8_t>(in);
    p.kind = static_cast<PairKind>(read_pod<uint8_t>(in));
    check(p.ref_run < n_runs && p.test_run < n_runs, "pair store: run index out of range in ", path);
  }
  check(in.good(), "pair store: ", path, " truncated");
  return store;
}

void split_train_val(const std::vector<uint32_t>& pair_ids, float fraction, uint64_t seed,
                     std::vector<uint32_t>& train, std::vector<uint32_t>& val) {
  check(fraction > 0.0f && fraction < 1.0f, "split_train_val: fraction must be in (0,1), got ", fraction);
  std::vector<uint32_t> ids = pair_ids;
  Rng rng(Rng::derive(seed, "train-val-split"));
  rng.shuffle(ids);
  const size_t n_val = static_cast<size_t>(std::llround(fraction * static_cast<double>(ids.size())));
  val.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  train.assign(ids.begin() + static_cast<std::ptrdiff_t>(n_val), ids.end());
}

std::vector<std::vector<uint32_t>> make_batches(const PairStore& store, const std::vector<uint32_t>& pair_ids,
                                                int batch_size, uint64_t seed, int epoch) {
  check(batch_size >= 1, "make_batches: batch size must be positive");
  std::map<std::string, std::vector<uint32_t>> groups;
  for (uint32_t id : pair_ids) {
    check(id < store.pairs.size(), "make_batches: pair id ", id, " out of range");
    groups[store.group_key(store.pairs[id])].push_back(id);
  }
  Rng rng(Rng::derive(Rng::derive(seed, "batches"), strcat_msg("epoch-", epoch)));
  std::vector<std::vector<uint32_t>> batches;
  for (auto& [key, ids] : groups) {
    rng.shuffle(ids);
    for (size_t at = 0; at < ids.size(); at += static_cast<size_t>(batch_size)) {
      const size_t end = std::min(ids.size(), at + static_cast<size_t>(batch_size));
      batches.emplace_back(ids.begin() + static_cast<std::ptrdiff_t>(at),
                           ids.begin() + static_cast<std::ptrdiff_t>(end));
    }
  }
  rng.shuffle(batches);
  return batches;
}

}  // namespace oneshot
