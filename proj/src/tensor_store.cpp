#include "loramix/tensor_store.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "loramix/errors.hpp"

namespace loramix {

namespace {

using json = nlohmann::json;

// nlohmann keeps object keys sorted (std::map), which is exactly the
// canonical order we want in the header.
json header_json(const TensorStore & store) {
  json header = json::object();
  if (!store.metadata.empty()) {
    json meta = json::object();
    for (const auto & [k, v] : store.metadata) meta[k] = v;
    header["__metadata__"] = std::move(meta);
  }
  std::uint64_t offset = 0;
  for (const auto & [name, t] : store.tensors) {
    json entry;
    entry["dtype"] = dtype_tag(t.dt);
    entry["shape"] = t.shape;
    entry["data_offsets"] = {offset, offset + t.data.size()};
    header[name] = std::move(entry);
    offset += t.data.size();
  }
  return header;
}

} // namespace

std::vector<std::uint8_t> serialize_store(const TensorStore & store) {
  validate_store(store);
  const std::string header = header_json(store).dump();

  std::size_t data_size = 0;
  for (const auto & [name, t] : store.tensors) data_size += t.data.size();

  std::vector<std::uint8_t> out;
  out.reserve(8 + header.size() + data_size);

  const std::uint64_t n = header.size();
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<std::uint8_t>((n >> (8 * i)) & 0xFF));
  out.insert(out.end(), header.begin(), header.end());
  for (const auto & [name, t] : store.tensors)
    out.insert(out.end(), t.data.begin(), t.data.end());
  return out;
}

TensorStore parse_store(const std::uint8_t * bytes, std::size_t size) {
  if (size < 8)
    fail(errc::malformed_header, "file shorter than the 8-byte length prefix");

  std::uint64_t header_len = 0;
  for (int i = 0; i < 8; ++i)
    header_len |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  if (header_len > size - 8)
    fail(errc::malformed_header, "declared header length exceeds file size");

  json header;
  try {
    header = json::parse(bytes + 8, bytes + 8 + header_len);
  } catch (const json::exception & e) {
    fail(errc::malformed_header, std::string("header is not valid JSON: ") + e.what());
  }
  if (!header.is_object())
    fail(errc::malformed_header, "header JSON is not an object");

  const std::uint8_t * data = bytes + 8 + header_len;
  const std::size_t data_size = size - 8 - header_len;

  TensorStore store;
  // Ranges collected for the overlap check, in declared offset order.
  std::vector<std::pair<std::uint64_t, std::uint64_t>> ranges;

  for (const auto & [name, entry] : header.items()) {
    if (name == "__metadata__") {
      if (!entry.is_object())
        fail(errc::malformed_header, "__metadata__ must be an object");
      for (const auto & [k, v] : entry.items()) {
        if (!v.is_string())
          fail(errc::malformed_header, "__metadata__ values must be strings");
        store.metadata[k] = v.get<std::string>();
      }
      continue;
    }
    if (!entry.is_object() || !entry.contains("dtype") ||
        !entry.contains("shape") || !entry.contains("data_offsets"))
      fail(errc::malformed_header,
           "tensor entry '" + name + "' is missing dtype/shape/data_offsets");
    if (!entry["dtype"].is_string())
      fail(errc::malformed_header, "dtype of '" + name + "' is not a string");

    Tensor t;
    t.dt = parse_dtype(entry["dtype"].get<std::string>());

    if (!entry["shape"].is_array())
      fail(errc::malformed_header, "shape of '" + name + "' is not an array");
    for (const auto & d : entry["shape"]) {
      if (!d.is_number_unsigned())
        fail(errc::malformed_header,
             "shape of '" + name + "' has a non-unsigned entry");
      t.shape.push_back(d.get<std::uint64_t>());
    }

    const auto & off = entry["data_offsets"];
    if (!off.is_array() || off.size() != 2 || !off[0].is_number_unsigned() ||
        !off[1].is_number_unsigned())
      fail(errc::malformed_header,
           "data_offsets of '" + name + "' must be two unsigned integers");
    const std::uint64_t begin = off[0].get<std::uint64_t>();
    const std::uint64_t end = off[1].get<std::uint64_t>();
    if (end < begin)
      fail(errc::malformed_header,
           "data_offsets of '" + name + "' end before they begin");

    const std::uint64_t expect = t.numel() * dtype_size(t.dt);
    if (end - begin != expect)
      fail(errc::malformed_header,
           "data_offsets of '" + name + "' disagree with shape and dtype");
    if (end > data_size)
      fail(errc::truncated_data,
           "tensor '" + name + "' extends past the end of the file");

    t.data.assign(data + begin, data + end);
    ranges.emplace_back(begin, end);

    if (!store.tensors.emplace(name, std::move(t)).second)
      fail(errc::malformed_header, "duplicate tensor name '" + name + "'");
  }

  std::sort(ranges.begin(), ranges.end());
  for (std::size_t i = 1; i < ranges.size(); ++i) {
    if (ranges[i].first < ranges[i - 1].second)
      fail(errc::overlapping_offsets,
           "two tensors declare overlapping byte ranges");
  }

  validate_store(store);
  return store;
}

TensorStore read_store(const std::filesystem::path & path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(errc::io_failure, "cannot open '" + path.string() + "'");
  std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in),
                                  std::istreambuf_iterator<char>()};
  if (in.bad()) fail(errc::io_failure, "read failed on '" + path.string() + "'");
  return parse_store(bytes.data(), bytes.size());
}

void write_store(const TensorStore & store, const std::filesystem::path & path) {
  const std::vector<std::uint8_t> bytes = serialize_store(store);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(errc::io_failure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char *>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) fail(errc::io_failure, "write failed on '" + path.string() + "'");
}

} // namespace loramix
