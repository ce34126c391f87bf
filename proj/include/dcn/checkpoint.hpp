#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dcn/errors.hpp"
#include "dcn/model.hpp"
#include "dcn/optim.hpp"

namespace dcn {

// Checkpoint file: magic "DCN1", u32 format version (little-endian), a
// u64-length-prefixed text manifest (tensor names, shapes, dtype, config
// fingerprint, step, rng seed), then raw tensor payloads in manifest order.
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace ckpt_detail {

template <typename T>
const char* dtype_name();
template <>
inline const char* dtype_name<float>() {
  return "f32";
}
template <>
inline const char* dtype_name<double>() {
  return "f64";
}

inline void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

inline void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<char*>(b), 8);
}

inline std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace ckpt_detail

template <typename T>
void save_checkpoint(const std::string& path, DcnModel<T>& model, Adam<T>& opt,
                     std::uint64_t rng_seed, std::uint64_t step) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");

  auto params = model.parameters();
  std::ostringstream man;
  man << "dtype " << ckpt_detail::dtype_name<T>() << "\n";
  man << "fingerprint " << model.config().fingerprint() << "\n";
  man << "step " << step << "\n";
  man << "rng_seed " << rng_seed << "\n";
  man << "adam_step " << opt.step_count() << "\n";
  man << "tensors " << params.size() * 3 << "\n";
  auto list_tensor = [&man](const std::string& name, const Tensor<T>& t) {
    man << name;
    for (std::size_t e : t.shape) man << " " << e;
    man << "\n";
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    list_tensor(params[i]->name, params[i]->value);
    list_tensor(params[i]->name + "#m", opt.first_moments()[i]);
    list_tensor(params[i]->name + "#v", opt.second_moments()[i]);
  }
  std::string manifest = man.str();

  out.write("DCN1", 4);
  ckpt_detail::write_u32(out, kCheckpointVersion);
  ckpt_detail::write_u64(out, manifest.size());
  out.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  auto dump = [&out](const Tensor<T>& t) {
    out.write(reinterpret_cast<const char*>(t.ptr()),
              static_cast<std::streamsize>(t.size() * sizeof(T)));
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    dump(params[i]->value);
    dump(opt.first_moments()[i]);
    dump(opt.second_moments()[i]);
  }
  if (!out) throw IoError("short write on checkpoint '" + path + "'");
}

template <typename T>
struct CheckpointInfo {
  std::uint64_t step = 0;
  std::uint64_t rng_seed = 0;
};

template <typename T>
CheckpointInfo<T> load_checkpoint(const std::string& path, DcnModel<T>& model, Adam<T>& opt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read checkpoint '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, "DCN1", 4) != 0)
    throw IoError("'" + path + "' is not a DCN1 checkpoint");
  std::uint32_t version = ckpt_detail::read_u32(in);
  if (version != kCheckpointVersion)
    throw IoError("checkpoint format version " + std::to_string(version) + " unsupported");
  std::uint64_t man_len = ckpt_detail::read_u64(in);
  std::string manifest(man_len, '\0');
  in.read(manifest.data(), static_cast<std::streamsize>(man_len));
  if (!in) throw IoError("truncated checkpoint manifest in '" + path + "'");

  std::istringstream man(manifest);
  std::string key;
  std::string dtype;
  std::uint64_t fingerprint = 0, step = 0, rng_seed = 0, adam_step = 0, count = 0;
  man >> key >> dtype;
  if (key != "dtype") throw IoError("checkpoint manifest: expected dtype");
  if (dtype != ckpt_detail::dtype_name<T>())
    throw IoError("checkpoint dtype " + dtype + " does not match this build's " +
                  ckpt_detail::dtype_name<T>());
  man >> key >> fingerprint;
  if (key != "fingerprint" || fingerprint != model.config().fingerprint())
    throw ValidationError("checkpoint config fingerprint mismatch");
  man >> key >> step;
  man >> key >> rng_seed;
  man >> key >> adam_step;
  man >> key >> count;

  auto params = model.parameters();
  if (count != params.size() * 3)
    throw ValidationError("checkpoint holds " + std::to_string(count) + " tensors, model has " +
                          std::to_string(params.size() * 3));
  man.ignore();  // end of counts line

  struct Entry {
    std::string name;
    std::vector<std::size_t> shape;
  };
  std::vector<Entry> entries;
  std::string line;
  while (std::getline(man, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    Entry e;
    ls >> e.name;
    std::size_t ext;
    while (ls >> ext) e.shape.push_back(ext);
    entries.push_back(std::move(e));
  }
  if (entries.size() != count) throw ValidationError("checkpoint manifest entry count mismatch");

  auto read_into = [&in, &path](Tensor<T>& t, const Entry& e) {
    if (t.shape != e.shape)
      throw ValidationError("checkpoint tensor '" + e.name + "' shape mismatch");
    in.read(reinterpret_cast<char*>(t.ptr()),
            static_cast<std::streamsize>(t.size() * sizeof(T)));
    if (!in) throw IoError("truncated tensor payload in '" + path + "'");
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (entries[3 * i].name != params[i]->name)
      throw ValidationError("checkpoint tensor order mismatch at '" + entries[3 * i].name +
                            "'");
    read_into(params[i]->value, entries[3 * i]);
    read_into(opt.first_moments()[i], entries[3 * i + 1]);
    read_into(opt.second_moments()[i], entries[3 * i + 2]);
  }
  opt.set_step_count(adam_step);
  return CheckpointInfo<T>{step, rng_seed};
}

}  // namespace dcn
