#include "ibot/snapshot.hpp"

#include <boost/crc.hpp>

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ibot {

namespace {

static_assert(std::endian::native == std::endian::little, "snapshot encoding assumes a little-endian host");

constexpr char kMagic[4] = {'I', 'B', 'O', 'T'};

enum RecordKind : std::uint8_t { kRow = 1, kSmp = 2, kDelay = 3, kUpSince = 4, kSaved = 5, kCounts = 6 };

class Writer {
 public:
  template <typename T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void put_doubles(const std::vector<double>& v) {
    put(static_cast<std::uint32_t>(v.size()));
    for (const double x : v) put(x);
  }
  void put_row(const ProfileRow& row) {
    const int n = row.tasks();
    put(static_cast<std::uint32_t>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        put(row.slope(i, j));
        put(row.intercept(i, j));
        put(static_cast<std::uint8_t>(row.state(i, j)));
      }
  }
  void put_smp(const SmpModel& m) {
    put(static_cast<std::uint8_t>(m.current_state));
    put(m.current_age);
    put_doubles(m.up_holding);
    put_doubles(m.down_holding);
  }
  [[nodiscard]] const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(const char* data, std::size_t size) : data_(data), size_(size) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::vector<double> get_doubles() {
    const auto n = get<std::uint32_t>();
    need(static_cast<std::size_t>(n) * sizeof(double));
    std::vector<double> v(n);
    for (auto& x : v) x = get<double>();
    return v;
  }
  ProfileRow get_row() {
    const auto n = static_cast<int>(get<std::uint32_t>());
    need(static_cast<std::size_t>(n) * static_cast<std::size_t>(n) * (2 * sizeof(double) + 1));
    ProfileRow row(n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        row.slope(i, j) = get<double>();
        row.intercept(i, j) = get<double>();
        const auto s = get<std::uint8_t>();
        if (s > static_cast<std::uint8_t>(EntryState::Missing)) corrupt("bad entry state");
        row.set_state(i, j, static_cast<EntryState>(s));
      }
    return row;
  }
  SmpModel get_smp() {
    SmpModel m;
    const auto s = get<std::uint8_t>();
    if (s > static_cast<std::uint8_t>(Availability::Down)) corrupt("bad availability state");
    m.current_state = static_cast<Availability>(s);
    m.current_age = get<double>();
    m.up_holding = get_doubles();
    m.down_holding = get_doubles();
    return m;
  }
  [[nodiscard]] bool done() const { return pos_ == size_; }

  [[noreturn]] static void corrupt(const std::string& why) { throw Error("CorruptSnapshot", why); }

 private:
  void need(std::size_t n) const {
    if (size_ - pos_ < n) corrupt("record runs past its end");
  }

  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(const char* data, std::size_t size) {
  boost::crc_32_type crc;
  crc.process_bytes(data, size);
  return crc.checksum();
}

void put_record(Writer& out, RecordKind kind, const Writer& body) {
  out.put(static_cast<std::uint8_t>(kind));
  out.put(static_cast<std::uint32_t>(body.bytes().size()));
  for (const char c : body.bytes()) out.put(c);
}

}  // namespace

Snapshot snapshot_of(const OrchestratorState& state) {
  return {state.matrix, state.counts.rows(), state.smp, state.delay, state.up_since, state.saved_rows};
}

void restore(OrchestratorState& state, const Snapshot& snap) {
  state.matrix = snap.matrix;
  state.smp = snap.smp;
  state.delay = snap.delay;
  state.up_since = snap.up_since;
  state.saved_rows = snap.saved_rows;
  for (const auto& [id, counts] : std::map<DeviceId, Eigen::VectorXi>(state.counts.rows()))
    state.counts.remove_device(id);
  for (const auto& [id, z] : snap.counts) {
    if (z.size() != state.counts.tasks()) throw Error("CorruptSnapshot", "count row has the wrong task count");
    state.counts.add_device(id);
    for (int k = 0; k < z.size(); ++k)
      for (int c = 0; c < z(k); ++c) state.counts.increment(id, k);
  }
}

std::string encode_snapshot(const Snapshot& snap) {
  Writer out;
  for (const char c : kMagic) out.put(c);
  out.put(kSnapshotVersion);
  for (const auto& [id, row] : snap.matrix) {
    Writer body;
    body.put(to_int(id));
    body.put_row(row);
    put_record(out, kRow, body);
  }
  for (const auto& [id, z] : snap.counts) {
    Writer body;
    body.put(to_int(id));
    body.put(static_cast<std::uint32_t>(z.size()));
    for (const int c : z) body.put(static_cast<std::int32_t>(c));
    put_record(out, kCounts, body);
  }
  for (const auto& [id, model] : snap.smp) {
    Writer body;
    body.put(to_int(id));
    body.put_smp(model);
    put_record(out, kSmp, body);
  }
  for (const auto& [kind, values] : {std::pair{kDelay, &snap.delay}, std::pair{kUpSince, &snap.up_since}})
    for (const auto& [id, v] : *values) {
      Writer body;
      body.put(to_int(id));
      body.put(v);
      put_record(out, kind, body);
    }
  for (const auto& [id, saved] : snap.saved_rows) {
    Writer body;
    body.put(to_int(id));
    body.put_row(saved.row);
    body.put_smp(saved.smp);
    body.put(saved.delay);
    put_record(out, kSaved, body);
  }
  std::string bytes = out.bytes();
  Writer tail;
  tail.put(crc_of(bytes.data(), bytes.size()));
  return bytes + tail.bytes();
}

Snapshot decode_snapshot(const std::string& bytes) {
  constexpr std::size_t header = sizeof(kMagic) + sizeof(std::uint32_t);
  if (bytes.size() < header + sizeof(std::uint32_t) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    Reader::corrupt("missing magic");
  std::uint32_t version = 0;
  std::memcpy(&version, bytes.data() + sizeof(kMagic), sizeof(version));
  if (version != kSnapshotVersion)
    throw Error("VersionMismatch", "snapshot version " + std::to_string(version) + ", reader expects " +
                                       std::to_string(kSnapshotVersion));
  const std::size_t body_end = bytes.size() - sizeof(std::uint32_t);
  std::uint32_t stored = 0;
  std::memcpy(&stored, bytes.data() + body_end, sizeof(stored));
  if (stored != crc_of(bytes.data(), body_end)) Reader::corrupt("checksum mismatch");

  Snapshot snap;
  Reader in(bytes.data() + header, body_end - header);
  while (!in.done()) {
    const auto kind = in.get<std::uint8_t>();
    const auto length = in.get<std::uint32_t>();
    std::string payload(length, '\0');
    for (auto& c : payload) c = in.get<char>();
    Reader rec(payload.data(), payload.size());
    const DeviceId id = device_id(rec.get<std::int32_t>());
    switch (kind) {
      case kRow: snap.matrix[id] = rec.get_row(); break;
      case kSmp: snap.smp[id] = rec.get_smp(); break;
      case kCounts: {
        const auto n = rec.get<std::uint32_t>();
        Eigen::VectorXi z(static_cast<Eigen::Index>(n));
        for (auto& c : z) c = rec.get<std::int32_t>();
        snap.counts[id] = std::move(z);
        break;
      }
      case kDelay: snap.delay[id] = rec.get<double>(); break;
      case kUpSince: snap.up_since[id] = rec.get<double>(); break;
      case kSaved: {
        SavedDevice saved;
        saved.row = rec.get_row();
        saved.smp = rec.get_smp();
        saved.delay = rec.get<double>();
        snap.saved_rows[id] = std::move(saved);
        break;
      }
      default: Reader::corrupt("unknown record kind " + std::to_string(kind));
    }
    if (!rec.done()) Reader::corrupt("record has trailing bytes");
  }
  return snap;
}

void save_snapshot(const Snapshot& snap, const std::string& path) {
  const std::string bytes = encode_snapshot(snap);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("IoError", tmp + ": cannot open for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("IoError", tmp + ": write failed");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("IoError", path + ": cannot replace");
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("IoError", path + ": cannot open");
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_snapshot(bytes);
}

}  // namespace ibot
