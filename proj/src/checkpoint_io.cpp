#include "catvrnn/checkpoint.hpp"

#include <zlib.h>

#include <cstdio>
#include <fstream>
#include <iterator>

namespace catvrnn {

namespace {

std::uint32_t crc_of(const char* data, std::size_t n, std::uint32_t seed = 0) {
  uLong crc = seed == 0 ? crc32(0L, Z_NULL, 0) : seed;
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

std::string hex32(std::uint32_t v) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08x", v);
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read checkpoint " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct Parsed {
  nlohmann::json header;
  std::string bytes;
  std::size_t body_begin = 0;
  std::size_t body_end = 0;
};

Parsed parse(const std::filesystem::path& path) {
  Parsed p;
  p.bytes = read_file(path);
  const auto& b = p.bytes;
  const std::string where = path.string();
  if (b.size() < sizeof(std::uint64_t) + sizeof(std::uint32_t)) {
    throw FormatError(where + ": truncated checkpoint");
  }
  std::uint32_t stored_crc = 0;
  std::memcpy(&stored_crc, b.data() + b.size() - sizeof(stored_crc), sizeof(stored_crc));
  if (crc_of(b.data(), b.size() - sizeof(stored_crc)) != stored_crc) {
    throw FormatError(where + ": checksum mismatch (corrupt or truncated file)");
  }
  std::uint64_t header_len = 0;
  std::memcpy(&header_len, b.data(), sizeof(header_len));
  const std::size_t header_begin = sizeof(header_len);
  if (header_len > b.size() - header_begin - sizeof(stored_crc)) {
    throw FormatError(where + ": header length exceeds file size");
  }
  try {
    p.header = nlohmann::json::parse(b.begin() + static_cast<std::ptrdiff_t>(header_begin),
                                     b.begin() + static_cast<std::ptrdiff_t>(header_begin + header_len));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(where + ": malformed header: " + e.what());
  }
  const int version = p.header.value("format_version", -1);
  if (version != kCheckpointVersion) {
    throw FormatError(where + ": unsupported format version " + std::to_string(version) +
                      " (expected " + std::to_string(kCheckpointVersion) + ")");
  }
  p.body_begin = header_begin + header_len;
  p.body_end = b.size() - sizeof(stored_crc);
  return p;
}

}  // namespace

void write_container(const std::filesystem::path& path, const Container& c) {
  nlohmann::json header = c.meta;
  header["format_version"] = kCheckpointVersion;
  nlohmann::json manifest = nlohmann::json::array();
  std::string body;
  for (const auto& t : c.tensors) {
    manifest.push_back({{"name", t.name},
                        {"shape", t.shape},
                        {"dtype", t.dtype},
                        {"offset", body.size()},
                        {"nbytes", t.bytes.size()}});
    body += t.bytes;
  }
  header["tensors"] = manifest;
  header["body_crc32"] = hex32(crc_of(body.data(), body.size()));
  const std::string header_text = header.dump();

  std::string out;
  const std::uint64_t header_len = header_text.size();
  out.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out += header_text;
  out += body;
  const std::uint32_t crc = crc_of(out.data(), out.size());
  out.append(reinterpret_cast<const char*>(&crc), sizeof(crc));

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw FormatError("cannot write checkpoint " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw FormatError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Container read_container(const std::filesystem::path& path) {
  Parsed p = parse(path);
  Container c;
  c.meta = p.header;
  const std::size_t body_size = p.body_end - p.body_begin;
  for (const auto& m : p.header.at("tensors")) {
    RawTensor t;
    t.name = m.at("name").get<std::string>();
    t.shape = m.at("shape").get<std::vector<std::int64_t>>();
    t.dtype = m.at("dtype").get<std::string>();
    const auto offset = m.at("offset").get<std::size_t>();
    const auto nbytes = m.at("nbytes").get<std::size_t>();
    if (offset > body_size || nbytes > body_size - offset) {
      throw FormatError(path.string() + ": tensor '" + t.name + "' lies outside the body");
    }
    t.bytes = p.bytes.substr(p.body_begin + offset, nbytes);
    c.tensors.push_back(std::move(t));
  }
  if (hex32(crc_of(p.bytes.data() + p.body_begin, body_size)) !=
      p.header.value("body_crc32", std::string())) {
    throw FormatError(path.string() + ": body checksum mismatch");
  }
  c.meta.erase("tensors");
  c.meta.erase("format_version");
  c.meta.erase("body_crc32");
  return c;
}

nlohmann::json read_container_header(const std::filesystem::path& path) {
  return parse(path).header;
}

std::string checkpoint_digest(const std::filesystem::path& path) {
  return read_container_header(path).at("body_crc32").get<std::string>();
}

}  // namespace catvrnn
