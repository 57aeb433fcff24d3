#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "collamamba/core/binary_io.hpp"
#include "collamamba/core/error.hpp"
#include "collamamba/net/config.hpp"
#include "collamamba/net/model.hpp"

namespace collamamba {

/// Weight snapshot container:
///   "CMBW" | u32 version | string header JSON {"variant", "config"}
///   | u32 tensor count | per tensor: string name, tensor record
/// All integers and values little-endian. Tensors appear in visit order.
inline constexpr std::string_view kSnapshotMagic = "CMBW";
inline constexpr std::uint32_t kSnapshotVersion = 1;

template <typename T>
void write_snapshot(std::ostream& os, Model<T>& m) {
  io::Writer w(os);
  w.magic(kSnapshotMagic);
  w.u32(kSnapshotVersion);
  nlohmann::json header = {{"variant", std::string(variant_name(m.variant))}, {"config", m.cfg}};
  w.string(header.dump());
  std::uint32_t count = 0;
  m.visit("", [&](const std::string&, auto&, InitKind) { ++count; });
  w.u32(count);
  m.visit("", [&](const std::string& name, auto& t, InitKind) {
    w.string(name);
    w.tensor(t);
  });
  if (!w.ok()) throw Error("write_snapshot: stream error");
}

template <typename T>
Model<T> read_snapshot(std::istream& is) {
  io::Reader r(is, "weight snapshot");
  r.expect_magic(kSnapshotMagic);
  const std::uint32_t version = r.u32();
  if (version != kSnapshotVersion) r.fail("unsupported version " + std::to_string(version));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.string());
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad header: ") + e.what());
  }
  NetConfig cfg;
  Variant variant;
  try {
    cfg = header.at("config").get<NetConfig>();
    variant = parse_variant(header.at("variant").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    r.fail(std::string("bad header: ") + e.what());
  } catch (const InvalidArgument& e) {
    r.fail(e.what());
  }
  // Read everything before touching the model so a bad file leaves nothing
  // half-loaded.
  const std::uint32_t count = r.u32();
  std::map<std::string, Tensor<T>> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string(4096);
    tensors.emplace(std::move(name), r.template tensor<T>());
  }
  Model<T> m(cfg, variant);
  std::size_t matched = 0;
  m.visit("", [&](const std::string& name, auto& t, InitKind) {
    auto it = tensors.find(name);
    if (it == tensors.end()) r.fail("missing tensor '" + name + "'");
    if (it->second.shape() != t.shape())
      r.fail("tensor '" + name + "' has shape " + shape_string(it->second.shape()) + ", expected " +
             shape_string(t.shape()));
    t = std::move(it->second);
    ++matched;
  });
  if (matched != tensors.size()) r.fail("snapshot holds tensors the model does not have");
  return m;
}

template <typename T>
void save_snapshot(const std::string& path, Model<T>& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open '" + path + "' for writing");
  write_snapshot(os, m);
}

template <typename T>
Model<T> load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open '" + path + "'");
  return read_snapshot<T>(is);
}

}  // namespace collamamba
