#include "olfact/csv.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "olfact/util.hpp"

namespace olfact {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

SensorSession parse_session_csv(const std::string& path, const ChannelSchema& schema) {
    std::ifstream in(path);
    if (!in) throw DataError(cat("cannot open session file '", path, "'"));

    std::string line;
    if (!std::getline(in, line)) throw DataError(cat(path, ": empty file"));
    auto header = split_csv_line(line);
    for (auto& h : header) h = trim(h);

    const std::size_t d = schema.num_channels();
    // Map each schema channel to its column. The first column may be a
    // non-schema timestamp column, which we skip.
    std::size_t col0 = 0;
    if (!header.empty() && schema.channel_index(header[0]) < 0) col0 = 1;
    std::vector<std::size_t> col_of(d);
    for (std::size_t ch = 0; ch < d; ++ch) {
        int found = -1;
        for (std::size_t c = col0; c < header.size(); ++c)
            if (header[c] == schema.channels[ch]) { found = static_cast<int>(c); break; }
        if (found < 0)
            throw DataError(cat(path, ":1: missing column '", schema.channels[ch], "'"));
        col_of[ch] = static_cast<std::size_t>(found);
    }
    for (std::size_t c = col0; c < header.size(); ++c)
        if (schema.channel_index(header[c]) < 0)
            throw DataError(cat(path, ":1: unknown column '", header[c], "'"));

    SensorSession session;
    session.schema = schema;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        auto cells = split_csv_line(line);
        if (cells.size() != header.size())
            throw DataError(cat(path, ":", lineno, ": expected ", header.size(),
                                " cells, got ", cells.size()));
        for (std::size_t ch = 0; ch < d; ++ch) {
            const std::string cell = trim(cells[col_of[ch]]);
            char* end = nullptr;
            const double v = std::strtod(cell.c_str(), &end);
            if (cell.empty() || end != cell.c_str() + cell.size())
                throw DataError(cat(path, ":", lineno, ": non-numeric cell '", cell, "'"));
            if (!std::isfinite(v))
                throw DataError(cat(path, ":", lineno, ": non-finite cell '", cell, "'"));
            session.readings.push_back(v);
        }
        ++session.num_steps;
    }
    if (session.num_steps == 0) throw DataError(cat(path, ": no data rows"));
    return session;
}

void write_session_csv(const std::string& path, const SensorSession& session) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(cat("cannot write session file '", path, "'"));
    const std::size_t d = session.schema.num_channels();
    for (std::size_t ch = 0; ch < d; ++ch)
        out << (ch ? "," : "") << session.schema.channels[ch];
    out << "\n";
    for (std::size_t t = 0; t < session.num_steps; ++t) {
        for (std::size_t ch = 0; ch < d; ++ch)
            out << (ch ? "," : "") << format_double(session.at(t, ch));
        out << "\n";
    }
    if (!out) throw DataError(cat("write to '", path, "' failed"));
}

}  // namespace olfact
