#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "composition.hpp"
#include "error.hpp"

namespace wormsim {

inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::vector<std::string> trace_header(const SimTrace& tr) {
    std::vector<std::string> h{"t"};
    for (const char* pre : {"r", "q"})
        for (std::size_t i = 0; i < tr.source_ids.size(); ++i)
            for (std::size_t j = 0; j < tr.paths_per_source[i]; ++j)
                h.push_back(std::string(pre) + "_s" + std::to_string(tr.source_ids[i]) + "_p" + std::to_string(j + 1));
    for (const char* pre : {"rl", "delay", "mit", "drop", "detect"})
        for (int id : tr.link_ids) h.push_back(std::string(pre) + "_" + std::to_string(id));
    h.push_back("x_compromise");
    if (tr.has_plant)
        for (const char* c : {"x_plant", "u", "tau", "dropped"}) h.push_back(c);
    return h;
}

inline void write_trace(std::ostream& os, const SimTrace& tr) {
    auto h = trace_header(tr);
    for (std::size_t k = 0; k < h.size(); ++k) os << (k ? "," : "") << h[k];
    os << '\n';
    for (const auto& row : tr.rows) {
        std::string line = format_double(row.t);
        auto put = [&](double v) {
            line += ',';
            line += format_double(v);
        };
        for (double v : row.r) put(v);
        for (double v : row.q) put(v);
        for (const auto* col : {&row.rl, &row.delay, &row.mit, &row.drop})
            for (double v : *col) put(v);
        for (char d : row.detect) line += d ? ",1" : ",0";
        put(row.x_compromise);
        if (tr.has_plant) {
            put(row.x_plant);
            put(row.u);
            put(row.tau);
            line += row.dropped ? ",1" : ",0";
        }
        os << line << '\n';
    }
}

inline void emit_trace(const SimTrace& tr, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open " + path + " for writing");
    write_trace(os, tr);
    if (!os) throw IoError("write failed: " + path);
}

// Column-oriented view of a CSV trace.
struct TraceTable {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    std::ptrdiff_t find(const std::string& name) const {
        for (std::size_t k = 0; k < columns.size(); ++k)
            if (columns[k] == name) return static_cast<std::ptrdiff_t>(k);
        return -1;
    }
    std::size_t index(const std::string& name) const {
        auto k = find(name);
        if (k < 0) throw AuditError("trace has no column " + name);
        return static_cast<std::size_t>(k);
    }
};

inline TraceTable read_trace_table(std::istream& is) {
    TraceTable t;
    std::string line;
    if (!std::getline(is, line)) throw AuditError("empty trace");
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) t.columns.push_back(cell);
    }
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (used != cell.size()) throw std::invalid_argument(cell);
            } catch (const std::exception&) {
                throw AuditError("line " + std::to_string(lineno) + ": bad number '" + cell + "'");
            }
        }
        if (row.size() != t.columns.size())
            throw AuditError("line " + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) +
                             " fields");
        t.rows.push_back(std::move(row));
    }
    return t;
}

inline TraceTable read_trace_table(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open " + path);
    return read_trace_table(is);
}

// Rebuild a SimTrace for `as` from a parsed table; columns must match.
inline SimTrace trace_from_table(const SystemAssembly& as, const TraceTable& t) {
    SimTrace tr = empty_trace(as);
    tr.has_plant = t.find("x_plant") >= 0;
    auto want = trace_header(tr);
    if (want != t.columns) throw AuditError("trace columns do not match the scenario");
    const std::size_t P = as.spec.path_count(), L = as.spec.links.size();
    for (const auto& v : t.rows) {
        TraceRow row;
        std::size_t c = 0;
        row.t = v[c++];
        auto take = [&](std::vector<double>& dst, std::size_t n) {
            dst.assign(v.begin() + static_cast<std::ptrdiff_t>(c), v.begin() + static_cast<std::ptrdiff_t>(c + n));
            c += n;
        };
        take(row.r, P);
        take(row.q, P);
        take(row.rl, L);
        take(row.delay, L);
        take(row.mit, L);
        take(row.drop, L);
        for (std::size_t l = 0; l < L; ++l) row.detect.push_back(v[c++] != 0.0);
        row.x_compromise = v[c++];
        if (tr.has_plant) {
            row.has_plant = true;
            row.x_plant = v[c++];
            row.u = v[c++];
            row.tau = v[c++];
            row.dropped = static_cast<int>(v[c++]);
        }
        for (double x : row.r)
            if (!std::isfinite(x)) throw AuditError("non-finite rate in trace");
        tr.rows.push_back(std::move(row));
    }
    return tr;
}

}  // namespace wormsim
