#include "eegdecode/checkpoint.hpp"

#include "byte_stream.hpp"
#include "eegdecode/io.hpp"

namespace eegdecode {

namespace {

constexpr char kCkptMagic[8] = {'E', 'E', 'G', 'C', 'K', 'P', 'T', '\0'};

}  // namespace

void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  detail::ByteWriter w;
  w.raw(kCkptMagic, 8);
  w.u32(kCheckpointFormatVersion);
  const ArchConfig& a = params.arch;
  for (std::size_t v : {a.n_channels, a.n_time, a.segment_len, a.n_temporal_filters,
                        a.depth_multiplier, a.lstm_hidden, a.n_classes}) {
    w.u64(v);
  }
  w.f64(a.dropout_rate);
  w.f64(a.bn_epsilon);
  w.f64(a.bn_momentum);
  const auto arrays = params.all_arrays();
  w.u32(static_cast<std::uint32_t>(arrays.size()));
  for (const auto& e : arrays) {
    w.str(e.name);
    w.u32(static_cast<std::uint32_t>(e.array->shape.size()));
    for (std::size_t d : e.array->shape) w.u64(d);
    for (double v : e.array->data) w.f64(v);
  }
  w.write_to(path);
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  detail::ByteReader r(path);
  r.expect_magic(kCkptMagic);
  const std::size_t version_at = r.offset();
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointFormatVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), version_at);
  }
  ArchConfig a;
  a.n_channels = r.u64("n_channels");
  a.n_time = r.u64("n_time");
  a.segment_len = r.u64("segment_len");
  a.n_temporal_filters = r.u64("n_temporal_filters");
  a.depth_multiplier = r.u64("depth_multiplier");
  a.lstm_hidden = r.u64("lstm_hidden");
  a.n_classes = r.u64("n_classes");
  a.dropout_rate = r.f64("dropout_rate");
  a.bn_epsilon = r.f64("bn_epsilon");
  const std::size_t arch_end = r.offset() + 8;
  a.bn_momentum = r.f64("bn_momentum");
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(std::string("invalid architecture: ") + e.what(), arch_end);
  }

  // A freshly initialized model defines the expected names and shapes.
  ModelParams p = init_params(a, 0);
  auto arrays = p.all_arrays();
  const std::size_t count_at = r.offset();
  const std::uint32_t count = r.u32("array count");
  if (count != arrays.size()) {
    throw FormatError("expected " + std::to_string(arrays.size()) + " arrays, found " +
                          std::to_string(count),
                      count_at);
  }
  for (auto& e : arrays) {
    const std::size_t at = r.offset();
    const std::string name = r.str("array name");
    if (name != e.name) throw FormatError("expected array '" + e.name + "', found '" + name + "'", at);
    const std::uint32_t ndim = r.u32("array rank");
    ad::Shape shape(ndim);
    for (auto& d : shape) d = r.u64("array extent");
    if (shape != e.array->shape) {
      throw FormatError("shape mismatch for '" + name + "': stored " + ad::shape_str(shape) +
                            ", architecture needs " + ad::shape_str(e.array->shape),
                        at);
    }
    r.f64_array(e.array->data, ad::numel(shape), name.c_str());
  }
  r.expect_end();
  return p;
}

}  // namespace eegdecode
