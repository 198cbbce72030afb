#include "agcr/binary_io.hpp"

#include <fstream>

namespace agcr::io {

void write_header(ByteWriter& w, std::string_view magic, std::uint32_t version, std::string_view metadata) {
  w.bytes(magic);
  w.u32(version);
  w.u64(metadata.size());
  w.bytes(metadata);
}

std::string read_header(ByteReader& r, std::string_view magic, std::uint32_t version) {
  if (r.remaining() < magic.size()) throw TruncatedError(r.source() + ": truncated header");
  if (r.bytes(magic.size()) != magic) throw BadMagicError(r.source() + ": bad magic (expected \"" + std::string(magic) + "\")");
  const std::uint32_t got = r.u32();
  if (got != version) {
    throw UnsupportedVersionError(r.source() + ": unsupported version " + std::to_string(got) + " (expected " +
                                  std::to_string(version) + ")");
  }
  const std::uint64_t len = r.u64();
  return std::string(r.bytes(static_cast<std::size_t>(len)));
}

void write_file(const std::filesystem::path& path, std::string_view bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace agcr::io
