#pragma once

#include "ckh/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ckh {

/// On-disk `.ckhs` layout, all fields little-endian:
///
///   offset  size  field
///        0     4  magic "CKHS"
///        4     4  u32 format version (1)
///        8     4  u32 d
///       12     4  u32 n
///       16    48  f64 P, gamma, kappa, mu, lambda, t
///       64     4  u32 field count (1 + d)
///       68     4  u32 CRC-32 of bytes [0, 68) followed by the payload
///       72     -  f64 payload: rho, then m_0 .. m_{d-1}, each n^d samples
///                 in grid order (x-axis fastest)
inline constexpr std::uint32_t snapshot_version = 1;
inline constexpr std::size_t snapshot_header_size = 72;

class SnapshotError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct SnapshotHeader {
    std::uint32_t version = snapshot_version;
    int dim = 0;
    int n = 0;
    double period = 0.0;
    double gamma = 0.0;
    double kappa = 0.0;
    double mu = 0.0;
    double lambda = 0.0;
    double t = 0.0;
    int field_count = 0;
    std::uint32_t checksum = 0;
};

struct Snapshot {
    SnapshotHeader header;
    State state;
    /// gamma, kappa, mu and lambda from the header; everything else default.
    FluidParams params;
};

std::vector<unsigned char> encode_snapshot(const State& state, const FluidParams& params);
Snapshot decode_snapshot(std::span<const unsigned char> bytes);

void write_snapshot(const State& state, const FluidParams& params, const std::filesystem::path& path);
Snapshot read_snapshot(const std::filesystem::path& path);

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

/// Comment block written above every table: the resolved configuration and a
/// hash of the inputs the table was computed from.
struct ReportHeader {
    std::string config_text;
    std::string input_hash;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row);
};

void write_table(const std::filesystem::path& path, const ReportHeader& header, const Table& table);
/// Reads a table written by write_table; comment lines are skipped.
Table read_table(const std::filesystem::path& path);

/// CRC-32 of a byte range, as 8 lowercase hex digits.
std::string content_hash(std::span<const unsigned char> bytes);
std::string content_hash(const std::string& text);
/// Hash over the bytes of several files, in the order given.
std::string files_hash(const std::vector<std::filesystem::path>& files);

Table energy_table(const EnergyReport& report);
EnergyReport energy_from_table(const Table& table);

/// A directory holding snap_NNNNN.ckhs files, series.csv (index, t, file) and
/// energy.csv with the ledger.
struct SeriesData {
    std::vector<State> snapshots;
    FluidParams params;
    std::optional<EnergyReport> energy;
    std::vector<std::filesystem::path> files;
};

void write_series(const std::filesystem::path& dir, const std::vector<State>& snapshots, const FluidParams& params,
                  const EnergyReport* energy, const ReportHeader& header);
SeriesData read_series(const std::filesystem::path& dir);

}  // namespace ckh
