#include "ckh/io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

namespace ckh {

namespace fs = std::filesystem;

namespace {

constexpr unsigned char magic[4] = {'C', 'K', 'H', 'S'};
constexpr std::size_t checksum_offset = 68;

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(bits >> (8 * i)));
}

std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}

double get_f64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

std::uint32_t crc_of(std::span<const unsigned char> head, std::span<const unsigned char> payload) {
    uLong c = crc32(0L, Z_NULL, 0);
    c = crc32(c, head.data(), static_cast<uInt>(head.size()));
    // zlib takes uInt lengths; feed the payload in bounded chunks.
    std::size_t off = 0;
    while (off < payload.size()) {
        const std::size_t len = std::min<std::size_t>(payload.size() - off, 1u << 30);
        c = crc32(c, payload.data() + off, static_cast<uInt>(len));
        off += len;
    }
    return static_cast<std::uint32_t>(c);
}

std::vector<unsigned char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SnapshotError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("malformed number '" + s + "'");
    return v;
}

}  // namespace

std::vector<unsigned char> encode_snapshot(const State& state, const FluidParams& params) {
    state.validate();
    const PeriodicGrid& g = state.grid();
    std::vector<unsigned char> out(std::begin(magic), std::end(magic));
    out.reserve(snapshot_header_size + 8 * g.size() * static_cast<std::size_t>(1 + g.dim()));
    put_u32(out, snapshot_version);
    put_u32(out, static_cast<std::uint32_t>(g.dim()));
    put_u32(out, static_cast<std::uint32_t>(g.n()));
    for (double v : {g.period(), params.gamma, params.kappa, params.mu, params.lambda, state.t}) put_f64(out, v);
    put_u32(out, static_cast<std::uint32_t>(1 + g.dim()));
    put_u32(out, 0);
    for (Eigen::Index i = 0; i < state.rho.size(); ++i) put_f64(out, state.rho(i));
    for (int a = 0; a < g.dim(); ++a) {
        for (Eigen::Index i = 0; i < state.momentum.size(); ++i) put_f64(out, state.momentum(i, a));
    }
    const std::span<const unsigned char> all(out);
    const auto crc = crc_of(all.first(checksum_offset), all.subspan(snapshot_header_size));
    for (int i = 0; i < 4; ++i) out[checksum_offset + static_cast<std::size_t>(i)] = static_cast<unsigned char>(crc >> (8 * i));
    return out;
}

Snapshot decode_snapshot(std::span<const unsigned char> bytes) {
    if (bytes.size() < 8) throw SnapshotError("truncated snapshot: " + std::to_string(bytes.size()) + " bytes");
    if (std::memcmp(bytes.data(), magic, 4) != 0) throw SnapshotError("not a snapshot file (bad magic)");
    SnapshotHeader h;
    h.version = get_u32(bytes.data() + 4);
    if (h.version != snapshot_version) {
        throw SnapshotError("unsupported snapshot version " + std::to_string(h.version) + " (this build reads version " +
                            std::to_string(snapshot_version) + ")");
    }
    if (bytes.size() < snapshot_header_size) throw SnapshotError("truncated snapshot header");
    const unsigned char* p = bytes.data();
    h.dim = static_cast<int>(get_u32(p + 8));
    h.n = static_cast<int>(get_u32(p + 12));
    h.period = get_f64(p + 16);
    h.gamma = get_f64(p + 24);
    h.kappa = get_f64(p + 32);
    h.mu = get_f64(p + 40);
    h.lambda = get_f64(p + 48);
    h.t = get_f64(p + 56);
    h.field_count = static_cast<int>(get_u32(p + 64));
    h.checksum = get_u32(p + checksum_offset);

    for (double v : {h.period, h.gamma, h.kappa, h.mu, h.lambda, h.t}) {
        if (!std::isfinite(v)) throw SnapshotError("snapshot header holds a non-finite value");
    }
    if (h.dim < 1 || h.dim > 3 || h.field_count != 1 + h.dim) throw SnapshotError("snapshot header has inconsistent field layout");
    if (h.n < 4 || h.n > (1 << 12)) throw SnapshotError("snapshot header has an invalid grid size");
    std::size_t points = 1;
    for (int a = 0; a < h.dim; ++a) points *= static_cast<std::size_t>(h.n);
    const std::size_t payload = 8 * points * static_cast<std::size_t>(h.field_count);
    if (bytes.size() < snapshot_header_size + payload) {
        throw SnapshotError("truncated snapshot: payload has " + std::to_string(bytes.size() - snapshot_header_size) +
                            " of " + std::to_string(payload) + " bytes");
    }
    if (bytes.size() > snapshot_header_size + payload) throw SnapshotError("snapshot has trailing bytes");
    const auto crc = crc_of(bytes.first(checksum_offset), bytes.subspan(snapshot_header_size));
    if (crc != h.checksum) throw SnapshotError("snapshot checksum mismatch");

    const PeriodicGrid g(h.dim, h.n, h.period);
    RealField rho(g, 1);
    RealField m(g, h.dim);
    const unsigned char* q = p + snapshot_header_size;
    for (std::size_t i = 0; i < points; ++i, q += 8) rho(static_cast<Eigen::Index>(i)) = get_f64(q);
    for (int a = 0; a < h.dim; ++a) {
        for (std::size_t i = 0; i < points; ++i, q += 8) m(static_cast<Eigen::Index>(i), a) = get_f64(q);
    }
    FluidParams params;
    params.gamma = h.gamma;
    params.kappa = h.kappa;
    params.mu = h.mu;
    params.lambda = h.lambda;
    return {h, State(h.t, std::move(rho), std::move(m)), params};
}

void write_snapshot(const State& state, const FluidParams& params, const fs::path& path) {
    const auto bytes = encode_snapshot(state, params);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Snapshot read_snapshot(const fs::path& path) {
    const auto bytes = read_bytes(path);
    try {
        return decode_snapshot(bytes);
    } catch (const SnapshotError& e) {
        throw SnapshotError(path.string() + ": " + e.what());
    }
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void Table::add(std::vector<std::string> row) {
    if (row.size() != columns.size()) throw std::invalid_argument("table row width does not match the columns");
    rows.push_back(std::move(row));
}

void write_table(const fs::path& path, const ReportHeader& header, const Table& table) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    std::istringstream cfg(header.config_text);
    for (std::string line; std::getline(cfg, line);) out << "# " << line << '\n';
    out << "# input_hash = " << header.input_hash << '\n';
    for (std::size_t c = 0; c < table.columns.size(); ++c) out << (c ? "," : "") << table.columns[c];
    out << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << row[c];
        out << '\n';
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

Table read_table(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    Table t;
    bool have_columns = false;
    for (std::string line; std::getline(in, line);) {
        if (line.empty() || line[0] == '#') continue;
        if (!have_columns) {
            t.columns = split_csv_line(line);
            have_columns = true;
        } else {
            t.add(split_csv_line(line));
        }
    }
    if (!have_columns) throw std::runtime_error(path.string() + ": table has no column line");
    return t;
}

std::string content_hash(std::span<const unsigned char> bytes) {
    const auto c = crc_of(bytes, {});
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(c));
    return buf;
}

std::string content_hash(const std::string& text) {
    return content_hash(std::span(reinterpret_cast<const unsigned char*>(text.data()), text.size()));
}

std::string files_hash(const std::vector<fs::path>& files) {
    uLong c = crc32(0L, Z_NULL, 0);
    for (const auto& f : files) {
        const auto bytes = read_bytes(f);
        c = crc32(c, bytes.data(), static_cast<uInt>(bytes.size()));
    }
    char buf[16];
    std::snprintf(buf, sizeof buf, "%08x", static_cast<unsigned>(c));
    return buf;
}

Table energy_table(const EnergyReport& report) {
    Table t{{"t", "energy", "dissipation", "work", "residual"}, {}};
    for (const auto& r : report.rows) {
        t.add({format_double(r.t), format_double(r.energy), format_double(r.dissipation), format_double(r.work),
               format_double(r.residual)});
    }
    return t;
}

EnergyReport energy_from_table(const Table& table) {
    if (table.columns != std::vector<std::string>{"t", "energy", "dissipation", "work", "residual"}) {
        throw std::invalid_argument("not an energy table");
    }
    EnergyReport rep;
    for (const auto& row : table.rows) {
        EnergyRow r{parse_double(row[0]), parse_double(row[1]), parse_double(row[2]), parse_double(row[3]),
                    parse_double(row[4])};
        rep.bound = std::max(rep.bound, r.energy + r.dissipation);
        rep.rows.push_back(r);
    }
    if (!rep.rows.empty()) rep.initial_energy = rep.rows.front().energy;
    return rep;
}

void write_series(const fs::path& dir, const std::vector<State>& snapshots, const FluidParams& params,
                  const EnergyReport* energy, const ReportHeader& header) {
    fs::create_directories(dir);
    Table index{{"index", "t", "file"}, {}};
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "snap_%05zu.ckhs", i);
        write_snapshot(snapshots[i], params, dir / name);
        index.add({std::to_string(i), format_double(snapshots[i].t), name});
    }
    write_table(dir / "series.csv", header, index);
    if (energy) write_table(dir / "energy.csv", header, energy_table(*energy));
}

SeriesData read_series(const fs::path& dir) {
    const auto index = read_table(dir / "series.csv");
    if (index.columns != std::vector<std::string>{"index", "t", "file"}) {
        throw std::invalid_argument((dir / "series.csv").string() + " is not a series index");
    }
    SeriesData out;
    for (const auto& row : index.rows) {
        const fs::path file = dir / row[2];
        auto snap = read_snapshot(file);
        if (out.snapshots.empty()) {
            out.params = snap.params;
        } else if (snap.params.gamma != out.params.gamma || snap.params.kappa != out.params.kappa ||
                   snap.params.mu != out.params.mu || snap.params.lambda != out.params.lambda) {
            throw SnapshotError(file.string() + ": fluid parameters differ within the series");
        }
        out.snapshots.push_back(std::move(snap.state));
        out.files.push_back(file);
    }
    if (fs::exists(dir / "energy.csv")) out.energy = energy_from_table(read_table(dir / "energy.csv"));
    return out;
}

}  // namespace ckh
