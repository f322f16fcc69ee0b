#include "oneshot/frame.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cstring>
#include <fstream>

#include "oneshot/check.hpp"

namespace oneshot {

namespace {

constexpr char kMagic[4] = {'O', 'S', 'R', '1'};
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

}  // namespace

std::vector<float> RecordedRun::steering_trace() const {
  std::vector<float> t;
  t.reserve(frames.size());
  for (const auto& f : frames) t.push_back(f.steering);
  return t;
}

void save_run(const RecordedRun& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "run: cannot write ", path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_pod(out, static_cast<uint8_t>(run.mirrored ? 1 : 0));
  write_pod(out, static_cast<uint8_t>(0));
  write_pod(out, run.run_id);
  write_pod(out, static_cast<uint32_t>(run.frames.size()));
  write_pod(out, static_cast<uint16_t>(kImgW));
  write_pod(out, static_cast<uint16_t>(kImgH));
  write_pod(out, static_cast<uint16_t>(kImgC));
  write_pod(out, run.fps);
  check(run.course_id.size() < 65536, "run: course id too long");
  write_pod(out, static_cast<uint16_t>(run.course_id.size()));
  out.write(run.course_id.data(), static_cast<std::streamsize>(run.course_id.size()));
  const int64_t img_sz = static_cast<int64_t>(kImgC) * kImgH * kImgW;
  for (const auto& f : run.frames) {
    check(f.image.size() == img_sz, "run: frame ", f.index, " image shape ", f.image.shape_str());
    out.write(reinterpret_cast<const char*>(f.image.data()), img_sz * 4);
    write_pod(out, f.steering);
    write_pod(out, f.throttle);
  }
  check(out.good(), "run: write failed for ", path);
}

RecordedRun load_run(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "run: cannot open ", path);
  char magic[4];
  in.read(magic, 4);
  check(in.good() && std::memcmp(magic, kMagic, 4) == 0, "run: ", path, " is not an OSR1 file");
  const auto version = read_pod<uint16_t>(in);
  check(version == kVersion, "run: ", path, ": unsupported version ", version);
  RecordedRun run;
  run.mirrored = read_pod<uint8_t>(in) != 0;
  read_pod<uint8_t>(in);
  run.run_id = read_pod<uint32_t>(in);
  const auto count = read_pod<uint32_t>(in);
  const auto w = read_pod<uint16_t>(in);
  const auto h = read_pod<uint16_t>(in);
  const auto c = read_pod<uint16_t>(in);
  check(w == kImgW && h == kImgH && c == kImgC, "run: ", path, ": unexpected image dims ", w, "x", h, "x", c);
  run.fps = read_pod<float>(in);
  const auto id_len = read_pod<uint16_t>(in);
  run.course_id.resize(id_len);
  in.read(run.course_id.data(), id_len);
  const int64_t img_sz = static_cast<int64_t>(kImgC) * kImgH * kImgW;
  run.frames.resize(count);
  for (uint32_t i = 0; i < count; ++i) {
    Frame& f = run.frames[i];
    f.image = Tensor({kImgC, kImgH, kImgW});
    in.read(reinterpret_cast<char*>(f.image.data()), img_sz * 4);
    f.steering = read_pod<float>(in);
    f.throttle = read_pod<float>(in);
    f.index = static_cast<int>(i);
    f.timestamp = static_cast<float>(i) / run.fps;
    check(in.good(), "run: ", path, " truncated at frame ", i);
  }
  return run;
}

Tensor mirror_image(const Tensor& image) {
  Tensor out(image.shape());
  const size_t plane = static_cast<size_t>(kImgH) * kImgW;
  for (int ch = 0; ch < kImgC; ++ch) {
    const int src_ch = ch < 3 ? ch + 3 : ch - 3;  // swap eyes
    for (int r = 0; r < kImgH; ++r)
      for (int col = 0; col < kImgW; ++col)
        out[static_cast<size_t>(ch) * plane + static_cast<size_t>(r) * kImgW + col] =
            image[static_cast<size_t>(src_ch) * plane + static_cast<size_t>(r) * kImgW + (kImgW - 1 - col)];
  }
  return out;
}

RecordedRun mirror_run(const RecordedRun& run) {
  RecordedRun m;
  m.course_id = run.course_id;
  m.run_id = run.run_id;
  m.mirrored = !run.mirrored;
  m.fps = run.fps;
  m.frames.reserve(run.frames.size());
  for (const auto& f : run.frames) {
    Frame g;
    g.image = mirror_image(f.image);
    g.steering = -f.steering;
    g.throttle = f.throttle;
    g.index = f.index;
    g.timestamp = f.timestamp;
    m.frames.push_back(std::move(g));
  }
  return m;
}

RunView::RunView(const std::string& path) {
  const int fd = ::open(path.c_str(), O_RDONLY);
  check(fd >= 0, "run: cannot open ", path);
  struct stat st{};
  if (::fstat(fd, &st) != 0) {
    ::close(fd);
    throw std::invalid_argument("run: cannot stat " + path);
  }
  map_len_ = static_cast<size_t>(st.st_size);
  map_ = ::mmap(nullptr, map_len_, PROT_READ, MAP_PRIVATE, fd, 0);
  ::close(fd);
  check(map_ != MAP_FAILED, "run: mmap failed for ", path);
  const auto* p = static_cast<const unsigned char*>(map_);
  check(map_len_ > 24 && std::memcmp(p, kMagic, 4) == 0, "run: ", path, " is not an OSR1 file");
  uint16_t version;
  std::memcpy(&version, p + 4, 2);
  check(version == kVersion, "run: ", path, ": unsupported version ", version);
  mirrored_ = p[6] != 0;
  uint32_t count;
  std::memcpy(&count, p + 12, 4);
  uint16_t id_len;
  std::memcpy(&id_len, p + 26, 2);
  course_id_.assign(reinterpret_cast<const char*>(p + 28), id_len);
  frame_count_ = static_cast<int>(count);
  frames_ = p + 28 + id_len;
  frame_stride_ = static_cast<size_t>(kImgC) * kImgH * kImgW * 4 + 8;
  check(map_len_ >= 28 + id_len + frame_stride_ * count, "run: ", path, " truncated");
}

RunView::RunView(RunView&& o) noexcept { *this = std::move(o); }

RunView& RunView::operator=(RunView&& o) noexcept {
  if (this != &o) {
    if (map_) ::munmap(map_, map_len_);
    map_ = o.map_;
    map_len_ = o.map_len_;
    frames_ = o.frames_;
    frame_stride_ = o.frame_stride_;
    frame_count_ = o.frame_count_;
    course_id_ = std::move(o.course_id_);
    mirrored_ = o.mirrored_;
    o.map_ = nullptr;
    o.map_len_ = 0;
  }
  return *this;
}

RunView::~RunView() {
  if (map_) ::munmap(map_, map_len_);
}

const float* RunView::image(int frame) const {
  check(frame >= 0 && frame < frame_count_, "run view: frame ", frame, " out of range");
  return reinterpret_cast<const float*>(frames_ + static_cast<size_t>(frame) * frame_stride_);
}

float RunView::steering(int frame) const {
  float v;
  std::memcpy(&v, frames_ + static_cast<size_t>(frame) * frame_stride_ + frame_stride_ - 8, 4);
  return v;
}

float RunView::throttle(int frame) const {
  float v;
  std::memcpy(&v, frames_ + static_cast<size_t>(frame) * frame_stride_ + frame_stride_ - 4, 4);
  return v;
}

std::vector<float> RunView::steering_trace() const {
  std::vector<float> t(static_cast<size_t>(frame_count_));
  for (int i = 0; i < frame_count_; ++i) t[static_cast<size_t>(i)] = steering(i);
  return t;
}

}  // namespace oneshot
