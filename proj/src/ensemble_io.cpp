#include "driftfit/ensemble_io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "driftfit/errors.hpp"

namespace driftfit::harness {

namespace {

[[noreturn]] void bad_line(const std::string& path, std::size_t line, const std::string& message) {
    throw FormatError(path + ":" + std::to_string(line) + ": " + message);
}

void append_double(std::string& out, double v) {
    char buf[40];
    const int len = std::snprintf(buf, sizeof(buf), "%.17g", v);
    out.append(buf, static_cast<std::size_t>(len));
}

/// Splits a CSV line in place; empty fields are preserved.
void split_fields(const std::string& line, std::vector<std::string>& fields) {
    fields.clear();
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

double parse_double(const std::string& field, const std::string& path, std::size_t line) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end != begin + field.size() || field.empty())
        bad_line(path, line, "malformed number '" + field + "'");
    return v;
}

long parse_index(const std::string& field, const std::string& path, std::size_t line) {
    const char* begin = field.c_str();
    char* end = nullptr;
    const long v = std::strtol(begin, &end, 10);
    if (end != begin + field.size() || field.empty() || v < 0)
        bad_line(path, line, "malformed index '" + field + "'");
    return v;
}

} // namespace

void save_ensemble(const dynamics::Ensemble& ensemble, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot open '" + path + "' for writing");

    const int d = ensemble.dim;
    bool with_noise = !ensemble.paths.empty();
    for (const auto& p : ensemble.paths)
        with_noise = with_noise && p.has_noise();

    std::string header = "m,l,t";
    for (int k = 1; k <= d; ++k)
        header += ",x" + std::to_string(k);
    if (with_noise)
        for (int k = 1; k <= d; ++k)
            header += ",dw" + std::to_string(k);
    out << header << "\n";

    std::string row;
    for (std::size_t m = 0; m < ensemble.paths.size(); ++m) {
        const auto& path_m = ensemble.paths[m];
        const auto rows = path_m.states.rows();
        for (Eigen::Index l = 0; l < rows; ++l) {
            row.clear();
            row += std::to_string(m);
            row += ',';
            row += std::to_string(l);
            row += ',';
            append_double(row, ensemble.grid.time(static_cast<std::size_t>(l)));
            for (int k = 0; k < d; ++k) {
                row += ',';
                append_double(row, path_m.states(l, k));
            }
            if (with_noise) {
                // The final grid point has no outgoing step, hence no
                // increment: its dw fields stay empty.
                for (int k = 0; k < d; ++k) {
                    row += ',';
                    if (l + 1 < rows)
                        append_double(row, path_m.noise(l, k));
                }
            }
            row += '\n';
            out << row;
        }
    }
    if (!out)
        throw IoError("failed writing '" + path + "'");
}

dynamics::Ensemble load_ensemble(const std::string& path, int expect_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open '" + path + "' for reading");

    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line))
        throw FormatError(path + ": empty file");
    if (!line.empty() && line.back() == '\r')
        line.pop_back();

    std::vector<std::string> fields;
    split_fields(line, fields);
    if (fields.size() < 4 || fields[0] != "m" || fields[1] != "l" || fields[2] != "t")
        bad_line(path, line_no, "header must start with m,l,t,x1");
    int d = 0;
    std::size_t col = 3;
    while (col < fields.size() && fields[col] == "x" + std::to_string(d + 1)) {
        ++d;
        ++col;
    }
    if (d == 0)
        bad_line(path, line_no, "header must declare at least x1");
    bool with_noise = false;
    if (col < fields.size()) {
        for (int k = 1; k <= d; ++k, ++col)
            if (col >= fields.size() || fields[col] != "dw" + std::to_string(k))
                bad_line(path, line_no, "header noise columns must be dw1..dw" + std::to_string(d));
        with_noise = true;
    }
    if (col != fields.size())
        bad_line(path, line_no, "unexpected trailing header columns");
    if (expect_dim >= 0 && d != expect_dim)
        bad_line(path, line_no,
                 "file dimension " + std::to_string(d) + " does not match expected " +
                     std::to_string(expect_dim));
    const std::size_t n_fields = 3 + static_cast<std::size_t>(with_noise ? 2 * d : d);

    // First pass over trajectory m = 0 fixes the grid; every later
    // trajectory must repeat the same l/t sequence.
    dynamics::Ensemble ensemble;
    ensemble.dim = d;
    std::vector<double> times;
    std::vector<Vector> states;
    std::vector<Vector> noises;  // realized increments, one per loaded row
    long expect_m = 0;
    long expect_l = 0;

    auto flush_trajectory = [&](std::size_t at_line) {
        if (states.size() < 2)
            bad_line(path, at_line, "trajectory " + std::to_string(expect_m) +
                                        " has fewer than two rows");
        if (ensemble.paths.empty()) {
            ensemble.grid = dynamics::TimeGrid(times);
        } else if (states.size() != ensemble.grid.size()) {
            bad_line(path, at_line, "trajectory " + std::to_string(expect_m) +
                                        " length differs from trajectory 0");
        }
        if (with_noise && noises.size() + 1 != states.size())
            bad_line(path, at_line,
                     "noise fields must be blank exactly on each trajectory's last row");
        dynamics::Trajectory traj;
        traj.states.resize(static_cast<Eigen::Index>(states.size()), d);
        for (std::size_t l = 0; l < states.size(); ++l)
            traj.states.row(static_cast<Eigen::Index>(l)) = states[l].transpose();
        if (with_noise) {
            traj.noise.resize(static_cast<Eigen::Index>(states.size()) - 1, d);
            for (std::size_t l = 0; l + 1 < states.size(); ++l)
                traj.noise.row(static_cast<Eigen::Index>(l)) = noises[l].transpose();
        }
        ensemble.paths.push_back(std::move(traj));
        states.clear();
        noises.clear();
        times.clear();
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        split_fields(line, fields);
        if (fields.size() != n_fields)
            bad_line(path, line_no,
                     "expected " + std::to_string(n_fields) + " fields, got " +
                         std::to_string(fields.size()));
        const long m = parse_index(fields[0], path, line_no);
        const long l = parse_index(fields[1], path, line_no);
        if (m == expect_m + 1 && l == 0) {
            flush_trajectory(line_no);
            ++expect_m;
            expect_l = 0;
        }
        if (m != expect_m || l != expect_l)
            bad_line(path, line_no, "rows out of order: got (m=" + std::to_string(m) +
                                        ",l=" + std::to_string(l) + "), expected (m=" +
                                        std::to_string(expect_m) + ",l=" +
                                        std::to_string(expect_l) + ")");
        const double t = parse_double(fields[2], path, line_no);
        if (ensemble.paths.empty()) {
            times.push_back(t);
        } else if (t != ensemble.grid.time(static_cast<std::size_t>(l))) {
            bad_line(path, line_no, "time differs from trajectory 0 at the same index");
        }
        Vector x(d);
        for (int k = 0; k < d; ++k)
            x(k) = parse_double(fields[3 + static_cast<std::size_t>(k)], path, line_no);
        states.push_back(std::move(x));
        if (with_noise) {
            Vector dw(d);
            bool any_blank = false;
            bool all_blank = true;
            for (int k = 0; k < d; ++k) {
                const std::string& field =
                    fields[3 + static_cast<std::size_t>(d) + static_cast<std::size_t>(k)];
                if (field.empty()) {
                    any_blank = true;
                } else {
                    all_blank = false;
                    dw(k) = parse_double(field, path, line_no);
                }
            }
            if (any_blank != all_blank)
                bad_line(path, line_no, "noise fields must be all present or all blank");
            if (!any_blank)
                noises.push_back(std::move(dw));
            // A blank row must be the trajectory's last; checked when the
            // trajectory is flushed via the count below.
        }
        ++expect_l;
    }
    if (in.bad())
        throw IoError("failed reading '" + path + "'");
    if (states.empty() && ensemble.paths.empty())
        throw FormatError(path + ": no data rows");
    if (!states.empty())
        flush_trajectory(line_no);
    return ensemble;
}

} // namespace driftfit::harness
