#pragma once

// CGW1 parameter blobs: the magic "CGW1" followed by records of
//   u32 name length, name bytes, u64 payload length, payload
// until end of file, all little-endian. A JSON sidecar indexes the records.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "swsched/tensor_ir.hpp"

namespace swsched {

struct BlobRecord {
  std::string name;
  std::vector<unsigned char> payload;
};

std::string encode_blob(const std::vector<BlobRecord>& records);
/// Throws ParseError on a bad magic or a truncated record.
std::vector<BlobRecord> decode_blob(std::string_view bytes);

/// Writes `path` and its sidecar `path` + ".json".
void write_blob(const std::filesystem::path& path, const std::vector<BlobRecord>& records);
std::vector<BlobRecord> read_blob(const std::filesystem::path& path);

/// {"records": [{"name", "offset", "bytes"}]}, offsets of each payload.
nlohmann::json blob_index(const std::vector<BlobRecord>& records);

/// Records for `decls` in order, taken from `data`; absent tensors are skipped.
template <class T>
std::vector<BlobRecord> to_records(const std::vector<TensorDecl>& decls, const TensorMap<T>& data);

/// Tensors named in `decls`; unknown records are ignored, a size mismatch
/// throws SimulationError(shape_mismatch).
template <class T>
TensorMap<T> from_records(const std::vector<TensorDecl>& decls, const std::vector<BlobRecord>& records);

}  // namespace swsched
