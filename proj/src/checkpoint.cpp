#include "ptrner/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ptrner/errors.hpp"

namespace ptrner {

namespace {

void put_u64(std::ostream& out, std::uint64_t v) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(bytes, 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char bytes[8];
  if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw ValidationError("checkpoint: truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  return v;
}

}  // namespace

void write_checkpoint(std::ostream& out, const nlohmann::ordered_json& meta, const ParameterSet& params) {
  nlohmann::ordered_json header;
  header["meta"] = meta;
  header["tensors"] = nlohmann::ordered_json::array();
  std::uint64_t offset = 0;
  for (const Parameter& p : params.all()) {
    header["tensors"].push_back({{"name", p.name}, {"shape", {p.value.rows, p.value.cols}}, {"offset", offset}});
    offset += p.value.size() * 8;
  }
  const std::string text = header.dump();
  out.write(kCheckpointMagic.data(), static_cast<std::streamsize>(kCheckpointMagic.size()));
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter& p : params.all())
    for (double v : p.value.data) put_u64(out, std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error("checkpoint: write failed");
}

void write_checkpoint(const std::string& path, const nlohmann::ordered_json& meta, const ParameterSet& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  write_checkpoint(out, meta, params);
}

LoadedCheckpoint read_checkpoint(std::istream& in) {
  std::string magic(kCheckpointMagic.size(), '\0');
  if (!in.read(magic.data(), static_cast<std::streamsize>(magic.size())) || magic != kCheckpointMagic) {
    throw ValidationError("checkpoint: bad magic (not a checkpoint or unsupported version)");
  }
  const std::uint64_t header_len = get_u64(in);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) throw ValidationError("checkpoint: truncated header");
  LoadedCheckpoint ck;
  nlohmann::ordered_json header;
  try {
    header = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad header: ") + e.what());
  }
  ck.meta = header.at("meta");
  std::uint64_t expected = 0;
  for (const auto& t : header.at("tensors")) {
    const std::string name = t.at("name");
    const std::size_t rows = t.at("shape").at(0), cols = t.at("shape").at(1);
    if (t.at("offset").get<std::uint64_t>() != expected) throw ValidationError("checkpoint: non-contiguous tensor " + name);
    Matrix m(rows, cols);
    for (double& v : m.data) v = std::bit_cast<double>(get_u64(in));
    expected += m.size() * 8;
    ck.tensors.emplace(name, std::move(m));
  }
  return ck;
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return read_checkpoint(in);
}

void load_parameters(ParameterSet& params, const LoadedCheckpoint& ckpt) {
  for (Parameter& p : params.all()) {
    const auto it = ckpt.tensors.find(p.name);
    if (it == ckpt.tensors.end()) throw ValidationError("checkpoint: missing tensor " + p.name);
    if (it->second.rows != p.value.rows || it->second.cols != p.value.cols) {
      throw ValidationError("checkpoint: shape mismatch for " + p.name);
    }
    p.value = it->second;
  }
}

}  // namespace ptrner
