#include "swsched/params_blob.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "swsched/error.hpp"

namespace swsched {

static_assert(std::endian::native == std::endian::little, "payloads are copied in host order");

namespace {

constexpr std::string_view kMagic = "CGW1";

template <class U>
void put(std::string& out, U v) {
  for (size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U take(std::string_view bytes, size_t& pos, std::string_view what) {
  if (bytes.size() - pos < sizeof(U)) throw ParseError(fmt::format("params blob truncated in {}", what));
  U v = 0;
  for (size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

std::string encode_blob(const std::vector<BlobRecord>& records) {
  std::string out(kMagic);
  for (const auto& r : records) {
    put<uint32_t>(out, static_cast<uint32_t>(r.name.size()));
    out += r.name;
    put<uint64_t>(out, r.payload.size());
    out.append(reinterpret_cast<const char*>(r.payload.data()), r.payload.size());
  }
  return out;
}

std::vector<BlobRecord> decode_blob(std::string_view bytes) {
  if (!bytes.starts_with(kMagic)) throw ParseError("params blob lacks the CGW1 magic");
  std::vector<BlobRecord> out;
  size_t pos = kMagic.size();
  while (pos < bytes.size()) {
    BlobRecord r;
    const auto len = take<uint32_t>(bytes, pos, "a name length");
    if (bytes.size() - pos < len) throw ParseError("params blob truncated in a name");
    r.name = std::string(bytes.substr(pos, len));
    pos += len;
    const auto size = take<uint64_t>(bytes, pos, fmt::format("the length of '{}'", r.name));
    if (bytes.size() - pos < size) throw ParseError(fmt::format("params blob truncated in '{}'", r.name));
    r.payload.assign(bytes.begin() + static_cast<ptrdiff_t>(pos), bytes.begin() + static_cast<ptrdiff_t>(pos + size));
    pos += size;
    out.push_back(std::move(r));
  }
  return out;
}

nlohmann::json blob_index(const std::vector<BlobRecord>& records) {
  nlohmann::json list = nlohmann::json::array();
  size_t pos = kMagic.size();
  for (const auto& r : records) {
    pos += 4 + r.name.size() + 8;
    list.push_back({{"name", r.name}, {"offset", pos}, {"bytes", r.payload.size()}});
    pos += r.payload.size();
  }
  return {{"format", "CGW1"}, {"records", list}};
}

void write_blob(const std::filesystem::path& path, const std::vector<BlobRecord>& records) {
  {
    std::ofstream out(path, std::ios::binary);
    const std::string bytes = encode_blob(records);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
  }
  std::ofstream side(path.string() + ".json");
  side << blob_index(records).dump(2) << '\n';
}

std::vector<BlobRecord> read_blob(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(fmt::format("cannot read params blob '{}'", path.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return decode_blob(s.str());
}

template <class T>
std::vector<BlobRecord> to_records(const std::vector<TensorDecl>& decls, const TensorMap<T>& data) {
  std::vector<BlobRecord> out;
  for (const auto& d : decls) {
    auto it = data.find(d.name);
    if (it == data.end()) continue;
    BlobRecord r{d.name, std::vector<unsigned char>(it->second.size() * sizeof(T))};
    std::memcpy(r.payload.data(), it->second.data(), r.payload.size());
    out.push_back(std::move(r));
  }
  return out;
}

template <class T>
TensorMap<T> from_records(const std::vector<TensorDecl>& decls, const std::vector<BlobRecord>& records) {
  TensorMap<T> out;
  for (const auto& r : records) {
    auto d = std::find_if(decls.begin(), decls.end(), [&](const TensorDecl& t) { return t.name == r.name; });
    if (d == decls.end()) continue;
    if (static_cast<int64_t>(r.payload.size()) != d->num_elems() * static_cast<int64_t>(sizeof(T)))
      throw SimulationError(SimulationError::Kind::shape_mismatch,
                            fmt::format("blob record '{}' has {} bytes, expected {}", r.name, r.payload.size(),
                                        d->num_elems() * static_cast<int64_t>(sizeof(T))));
    std::vector<T> v(static_cast<size_t>(d->num_elems()));
    std::memcpy(v.data(), r.payload.data(), r.payload.size());
    out[r.name] = std::move(v);
  }
  return out;
}

template std::vector<BlobRecord> to_records<float>(const std::vector<TensorDecl>&, const TensorMap<float>&);
template std::vector<BlobRecord> to_records<int32_t>(const std::vector<TensorDecl>&, const TensorMap<int32_t>&);
template TensorMap<float> from_records<float>(const std::vector<TensorDecl>&, const std::vector<BlobRecord>&);
template TensorMap<int32_t> from_records<int32_t>(const std::vector<TensorDecl>&, const std::vector<BlobRecord>&);

}  // namespace swsched
