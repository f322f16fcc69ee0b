#include "oneshot/model_io.hpp"

#include <cstring>
#include <fstream>
#include <map>

#include "oneshot/check.hpp"

namespace oneshot {

namespace {

constexpr char kMagic[4] = {'O', 'S', 'M', '1'};
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

void write_tensor(std::ostream& out, const std::string& name, const Tensor& t) {
  check(name.size() < 65536, "model io: tensor name too long");
  write_pod(out, static_cast<uint16_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_pod(out, static_cast<uint8_t>(0));  // dtype: float32
  write_pod(out, static_cast<uint8_t>(t.rank()));
  for (int d = 0; d < t.rank(); ++d) write_pod(out, static_cast<uint32_t>(t.dim(d)));
  out.write(reinterpret_cast<const char*>(t.data()), t.size() * 4);
}

std::pair<std::string, Tensor> read_tensor(std::istream& in) {
  const auto name_len = read_pod<uint16_t>(in);
  std::string name(name_len, '\0');
  in.read(name.data(), name_len);
  const auto dtype = read_pod<uint8_t>(in);
  check(dtype == 0, "model io: unsupported dtype ", static_cast<int>(dtype), " for tensor '", name, "'");
  const auto rank = read_pod<uint8_t>(in);
  std::vector<int> shape(rank);
  for (auto& d : shape) d = static_cast<int>(read_pod<uint32_t>(in));
  Tensor t(shape);
  in.read(reinterpret_cast<char*>(t.data()), t.size() * 4);
  check(in.good(), "model io: truncated tensor '", name, "'");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "model io: cannot write ", path);
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  const std::string cfg = model.config().to_json();
  write_pod(out, static_cast<uint32_t>(cfg.size()));
  out.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  write_pod(out, static_cast<int64_t>(model.opt_step()));

  std::map<std::string, const Tensor*> table;
  for (const auto& [name, p] : model.params().all()) {
    table.emplace(name, &p.value);
    table.emplace("opt." + name + ".m", &p.m);
    table.emplace("opt." + name + ".v", &p.v);
  }
  std::vector<std::pair<std::string, Tensor>> bn_tensors;
  for (size_t l = 0; l < model.bn().size(); ++l) {
    bn_tensors.emplace_back("bn" + std::to_string(l + 1) + ".running_mean", model.bn()[l].mean);
    bn_tensors.emplace_back("bn" + std::to_string(l + 1) + ".running_var", model.bn()[l].var);
  }
  for (const auto& [name, t] : bn_tensors) table.emplace(name, &t);

  write_pod(out, static_cast<uint32_t>(table.size()));
  for (const auto& [name, t] : table) write_tensor(out, name, *t);
  check(out.good(), "model io: write failed for ", path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "model io: cannot open ", path);
  char magic[4];
  in.read(magic, 4);
  check(in.good() && std::memcmp(magic, kMagic, 4) == 0, "model io: ", path, " is not an OSM1 file");
  const auto version = read_pod<uint16_t>(in);
  check(version == kVersion, "model io: ", path, ": unsupported version ", version);
  const auto cfg_len = read_pod<uint32_t>(in);
  check(cfg_len < (1u << 20), "model io: config block too large in ", path);
  std::string cfg_text(cfg_len, '\0');
  in.read(cfg_text.data(), cfg_len);
  const auto step = read_pod<int64_t>(in);
  check(in.good(), "model io: ", path, " truncated in header");

  Model model = Model::build(McnConfig::from_json(cfg_text));
  model.opt_step() = step;
  const auto count = read_pod<uint32_t>(in);
  size_t filled = 0;
  for (uint32_t i = 0; i < count; ++i) {
    auto [name, t] = read_tensor(in);
    if (name.rfind("opt.", 0) == 0) {
      const bool is_m = name.size() > 6 && name.compare(name.size() - 2, 2, ".m") == 0;
      const std::string pname = name.substr(4, name.size() - 6);
      Param& p = model.params().get(pname);
      Tensor& dst = is_m ? p.m : p.v;
      check(dst.same_shape(t), "model io: shape mismatch for '", name, "'");
      dst = std::move(t);
    } else if (name.rfind("bn", 0) == 0) {
      const auto dot = name.find('.');
      const size_t layer = static_cast<size_t>(std::stoi(name.substr(2, dot - 2))) - 1;
      check(layer < model.bn().size(), "model io: unexpected tensor '", name, "'");
      Tensor& dst = name.compare(dot, std::string::npos, ".running_mean") == 0 ? model.bn()[layer].mean
                                                                               : model.bn()[layer].var;
      check(dst.same_shape(t), "model io: shape mismatch for '", name, "'");
      dst = std::move(t);
    } else {
      Param& p = model.params().get(name);
      check(p.value.same_shape(t), "model io: shape mismatch for '", name, "'");
      p.value = std::move(t);
    }
    ++filled;
  }
  const size_t want = model.params().count() * 3 + model.bn().size() * 2;
  check(filled == want, "model io: ", path, " holds ", filled, " tensors, expected ", want);
  return model;
}

}  // namespace oneshot
