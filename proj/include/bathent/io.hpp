#pragma once

// Parameter ranges, CSV output and run manifests for the command-line tool.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bathent/error.hpp"

#ifndef BATHENT_VERSION
#define BATHENT_VERSION "dev"
#endif

namespace bathent::io {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_number(std::string_view text) {
    const std::string s = trim(text);
    if (s.empty()) throw ConfigError("empty number");
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + s + "'");
    }
    if (used != s.size()) throw ConfigError("not a number: '" + s + "'");
    if (!std::isfinite(v)) throw ConfigError("non-finite value: '" + s + "'");
    return v;
}

/// "x", "a,b,c" or "start:stop:step" (stop included when it lands on the grid);
/// list items may themselves be ranges.
inline std::vector<double> parse_values(std::string_view text) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto comma = text.find(',', pos);
        const auto item = trim(text.substr(pos, comma == std::string_view::npos ? text.npos : comma - pos));
        if (item.empty()) throw ConfigError("empty entry in value list '" + std::string(text) + "'");
        const auto c1 = item.find(':');
        if (c1 == std::string::npos) {
            out.push_back(parse_number(item));
        } else {
            const auto c2 = item.find(':', c1 + 1);
            if (c2 == std::string::npos || item.find(':', c2 + 1) != std::string::npos)
                throw ConfigError("range must be start:stop:step, got '" + item + "'");
            const double a = parse_number(item.substr(0, c1));
            const double b = parse_number(item.substr(c1 + 1, c2 - c1 - 1));
            const double h = parse_number(item.substr(c2 + 1));
            if (!(h > 0.0)) throw ConfigError("range step must be positive in '" + item + "'");
            if (b < a) throw ConfigError("range is empty: '" + item + "'");
            const double span = (b - a) / h;
            if (span > 1e6) throw ConfigError("range has too many points: '" + item + "'");
            const auto n = std::size_t(std::floor(span + 1e-9)) + 1;
            // snap to 12 significant digits so 0:0.25:0.05 yields 0.15, not 0.15000000000000002
            char buf[32];
            for (std::size_t i = 0; i < n; ++i) {
                std::snprintf(buf, sizeof buf, "%.12g", a + double(i) * h);
                out.push_back(std::strtod(buf, nullptr));
            }
        }
        if (comma == std::string_view::npos) break;
        pos = comma + 1;
    }
    return out;
}

/// Shortest decimal that round-trips (>= 15 significant digits).
inline std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.15g", v);
    if (std::strtod(buf, nullptr) != v) std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

using ConfigEcho = std::vector<std::pair<std::string, std::string>>;

/// One CSV file: a comment block with the tool version and the resolved
/// configuration, a header row, then numeric rows. Rows are flushed as written
/// so an interrupted sweep leaves the finished part on disk.
class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& columns, const ConfigEcho& config)
        : path_(path), columns_(columns.size()) {
        out_.open(path);
        if (!out_) throw ConfigError("cannot write " + path.string());
        out_ << "# bathent " << BATHENT_VERSION << "\n";
        for (const auto& [k, v] : config) out_ << "# " << k << " = " << v << "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) out_ << (i ? "," : "") << columns[i];
        out_ << "\n";
        out_.flush();
    }

    void row(const std::vector<double>& values) {
        if (values.size() != columns_) throw ConfigError("CSV row width mismatch in " + path_.string());
        for (std::size_t i = 0; i < values.size(); ++i) out_ << (i ? "," : "") << format_number(values[i]);
        out_ << "\n";
        out_.flush();
        ++rows_;
    }

    std::size_t rows() const { return rows_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::size_t columns_;
    std::size_t rows_ = 0;
    std::ofstream out_;
};

struct ManifestEntry {
    std::string file;
    std::size_t rows = 0;
};

/// MANIFEST: what the run wrote and whether it finished.
inline void write_manifest(const std::filesystem::path& dir, const std::string& command, bool complete,
                           const std::vector<ManifestEntry>& files, const std::string& error = {}) {
    std::ofstream out(dir / "MANIFEST");
    if (!out) throw ConfigError("cannot write MANIFEST in " + dir.string());
    out << "tool = bathent " << BATHENT_VERSION << "\n";
    out << "command = " << command << "\n";
    out << "status = " << (complete ? "complete" : "partial") << "\n";
    if (!error.empty()) out << "error = " << error << "\n";
    for (const auto& f : files) out << "file = " << f.file << " rows=" << f.rows << "\n";
}

/// matplotlib script that draws `csv` as E against `x`, one curve per value of `group`.
inline void write_plot_script(const std::filesystem::path& path, const std::string& csv, const std::string& x,
                              const std::string& y, const std::string& group, const std::string& xlabel,
                              const std::string& ylabel) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path.string());
    out << "import csv\n"
           "import matplotlib.pyplot as plt\n\n"
           "rows = list(csv.DictReader(line for line in open('"
        << csv
        << "') if not line.startswith('#')))\n"
           "curves = {}\n"
           "for r in rows:\n"
           "    curves.setdefault(r['"
        << group << "'], []).append((float(r['" << x << "']), float(r['" << y
        << "'])))\n"
           "fig, ax = plt.subplots()\n"
           "for key, pts in curves.items():\n"
           "    xs, ys = zip(*pts)\n"
           "    ax.plot(xs, ys, label='"
        << group
        << " = ' + key)\n"
           "ax.set_xlabel('"
        << xlabel << "')\nax.set_ylabel('" << ylabel
        << "')\n"
           "ax.legend()\n"
           "fig.savefig('"
        << path.stem().string() << ".pdf')\n";
}

}  // namespace bathent::io
