#pragma once

#include "ibot/orchestrator.hpp"

#include <cstdint>
#include <map>
#include <string>

namespace ibot {

inline constexpr std::uint32_t kSnapshotVersion = 1;

/// The persistent part of the orchestrator: everything needed to skip
/// re-profiling, plus the live counts. Readjust statistics are not kept.
struct Snapshot {
  ProfileMatrix matrix;
  std::map<DeviceId, Eigen::VectorXi> counts;
  std::map<DeviceId, SmpModel> smp;
  std::map<DeviceId, double> delay;
  std::map<DeviceId, double> up_since;
  std::map<DeviceId, SavedDevice> saved_rows;

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

Snapshot snapshot_of(const OrchestratorState& state);

/// Replaces the persistent part of `state`, counts included.
void restore(OrchestratorState& state, const Snapshot& snap);

/// Layout: "IBOT" magic, u32 version, then records of (u8 kind, u32 length,
/// payload), then a CRC-32 of every preceding byte. Integers little-endian,
/// doubles as their IEEE-754 bit pattern.
std::string encode_snapshot(const Snapshot& snap);

/// Throws Error{VersionMismatch} for another version and
/// Error{CorruptSnapshot} for a bad magic, checksum or record.
Snapshot decode_snapshot(const std::string& bytes);

void save_snapshot(const Snapshot& snap, const std::string& path);
Snapshot load_snapshot(const std::string& path);

}  // namespace ibot
