#include "eegdecode/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "byte_stream.hpp"

namespace eegdecode {

namespace {

using detail::ByteReader;
using detail::ByteWriter;

constexpr char kRecMagic[8] = {'E', 'E', 'G', 'R', 'E', 'C', '\0', '\0'};
constexpr char kEpoMagic[8] = {'E', 'E', 'G', 'E', 'P', 'O', '\0', '\0'};

void check_version(ByteReader& r, std::uint32_t supported) {
  const std::size_t at = r.offset();
  const auto version = r.u32("version");
  if (version != supported) {
    throw FormatError("unknown format version " + std::to_string(version), at);
  }
}

}  // namespace

void save_recording(const ContinuousRecording& rec, const std::filesystem::path& path) {
  rec.validate();
  ByteWriter w;
  w.raw(kRecMagic, 8);
  w.u32(kRecordingFormatVersion);
  w.f64(rec.sample_rate_hz);
  w.u32(static_cast<std::uint32_t>(rec.channels.size()));
  w.u64(rec.n_samples);
  w.u64(rec.events.size());
  for (const auto& ch : rec.channels) w.str(ch);
  for (const auto& ev : rec.events) {
    w.u64(ev.sample_index);
    w.i32(ev.label);
  }
  for (double v : rec.samples) w.f64(v);
  w.write_to(path);
}

ContinuousRecording load_recording(const std::filesystem::path& path) {
  ByteReader r(path);
  r.expect_magic(kRecMagic);
  check_version(r, kRecordingFormatVersion);
  ContinuousRecording rec;
  std::size_t at = r.offset();
  rec.sample_rate_hz = r.f64("sample rate");
  if (!(rec.sample_rate_hz > 0.0)) throw FormatError("non-positive sample rate", at);
  const auto n_channels = r.u32("channel count");
  rec.n_samples = r.u64("sample count");
  const auto n_events = r.u64("event count");
  for (std::uint32_t c = 0; c < n_channels; ++c) rec.channels.push_back(r.str("channel label"));
  if (n_events > r.remaining() / 12) throw FormatError("event table truncated", r.offset());
  for (std::uint64_t e = 0; e < n_events; ++e) {
    at = r.offset();
    Event ev;
    ev.sample_index = r.u64("event index");
    ev.label = r.i32("event label");
    if (ev.sample_index >= rec.n_samples) {
      throw FormatError("event sample index outside recording", at);
    }
    rec.events.push_back(ev);
  }
  r.f64_array(rec.samples, std::uint64_t{n_channels} * rec.n_samples, "samples");
  r.expect_end();
  try {
    rec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), r.offset());
  }
  return rec;
}

void save_epochs(const EpochSet& es, const std::filesystem::path& path) {
  es.validate();
  ByteWriter w;
  w.raw(kEpoMagic, 8);
  w.u32(kEpochFormatVersion);
  w.str(es.subject_id);
  w.f64(es.sample_rate_hz);
  w.f64(es.window_start_ms);
  w.f64(es.window_end_ms);
  w.u32(static_cast<std::uint32_t>(es.channels.size()));
  w.u64(es.n_trials());
  w.u64(es.n_time);
  w.u32(static_cast<std::uint32_t>(es.class_cpd.size()));
  for (double f : es.class_cpd) w.f64(f);
  for (const auto& ch : es.channels) w.str(ch);
  for (int l : es.labels) w.i32(l);
  for (double v : es.data) w.f64(v);
  w.write_to(path);
}

EpochSet load_epochs(const std::filesystem::path& path) {
  ByteReader r(path);
  r.expect_magic(kEpoMagic);
  check_version(r, kEpochFormatVersion);
  EpochSet es;
  es.subject_id = r.str("subject id");
  const std::size_t rate_at = r.offset();
  es.sample_rate_hz = r.f64("sample rate");
  if (!(es.sample_rate_hz > 0.0)) throw FormatError("non-positive sample rate", rate_at);
  es.window_start_ms = r.f64("window start");
  es.window_end_ms = r.f64("window end");
  const auto n_channels = r.u32("channel count");
  const auto n_trials = r.u64("trial count");
  es.n_time = r.u64("time count");
  const auto n_classes = r.u32("class count");
  r.f64_array(es.class_cpd, n_classes, "class frequencies");
  for (std::uint32_t c = 0; c < n_channels; ++c) es.channels.push_back(r.str("channel label"));
  if (n_trials > r.remaining() / 4) throw FormatError("label table truncated", r.offset());
  es.labels.resize(n_trials);
  for (auto& l : es.labels) {
    const std::size_t at = r.offset();
    l = r.i32("label");
    if (l < 0 || l >= kNumClasses) throw FormatError("class label outside 0..2", at);
  }
  r.f64_array(es.data, n_trials * n_channels * es.n_time, "epoch samples");
  r.expect_end();
  try {
    es.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), r.offset());
  }
  return es;
}

ContinuousRecording import_csv(const std::filesystem::path& csv_path, double sample_rate_hz,
                               const std::optional<std::filesystem::path>& events_path) {
  std::ifstream in(csv_path);
  if (!in) throw std::runtime_error("cannot open '" + csv_path.string() + "'");
  auto split_line = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
      cells.push_back(cell);
    }
    return cells;
  };

  ContinuousRecording rec;
  rec.sample_rate_hz = sample_rate_hz;
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line)) throw FormatError("missing header row", line_no);
  rec.channels = split_line(line);
  if (rec.channels.empty()) throw FormatError("empty header row", line_no);

  std::vector<std::vector<double>> columns(rec.channels.size());
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto cells = split_line(line);
    if (cells.size() != rec.channels.size()) {
      throw FormatError("shape mismatch: row has " + std::to_string(cells.size()) +
                            " values, header declares " + std::to_string(rec.channels.size()),
                        line_no);
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        std::size_t used = 0;
        columns[c].push_back(std::stod(cells[c], &used));
        if (used != cells[c].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw FormatError("not a number: '" + cells[c] + "'", line_no);
      }
    }
  }
  rec.n_samples = columns.front().size();
  for (const auto& col : columns) rec.samples.insert(rec.samples.end(), col.begin(), col.end());

  if (events_path) {
    std::ifstream ev_in(*events_path);
    if (!ev_in) throw std::runtime_error("cannot open '" + events_path->string() + "'");
    std::size_t ev_line = 0;
    while (std::getline(ev_in, line)) {
      ++ev_line;
      if (line.empty() || line == "\r") continue;
      const auto cells = split_line(line);
      if (cells.size() != 2) throw FormatError("event line needs sample_index,label", ev_line);
      try {
        Event ev;
        ev.sample_index = static_cast<std::size_t>(std::stoull(cells[0]));
        ev.label = std::stoi(cells[1]);
        rec.events.push_back(ev);
      } catch (const std::exception&) {
        throw FormatError("malformed event line", ev_line);
      }
    }
  }
  try {
    rec.validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what(), line_no);
  }
  return rec;
}

}  // namespace eegdecode
