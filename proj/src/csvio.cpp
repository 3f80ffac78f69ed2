#include "metapinn/csvio.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace metapinn {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

int CsvTable::col(const std::string& name) const {
    for (size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return int(i);
    return -1;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const MatrixXd& values) {
    if (values.size() > 0 && values.cols() != Eigen::Index(header.size()))
        throw ValidationError("write_csv: header/value column mismatch for " + path);
    std::ofstream out(path);
    if (!out) throw ValidationError("write_csv: cannot open " + path);
    for (size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (Eigen::Index r = 0; r < values.rows(); ++r) {
        for (Eigen::Index c = 0; c < values.cols(); ++c) {
            if (c) out << ',';
            out << format_double(values(r, c));
        }
        out << '\n';
    }
    if (!out) throw ValidationError("write_csv: write failed for " + path);
}

static std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> parts;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            parts.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    parts.push_back(cur);
    return parts;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw ValidationError("read_csv: empty file " + path);
    CsvTable t;
    t.header = split_line(line);
    std::vector<double> data;
    Eigen::Index rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto parts = split_line(line);
        if (parts.size() != t.header.size())
            throw ValidationError("read_csv: ragged row in " + path);
        for (auto& p : parts) {
            char* end = nullptr;
            double v = std::strtod(p.c_str(), &end);
            if (end == p.c_str())
                throw ValidationError("read_csv: non-numeric cell '" + p +
                                      "' in " + path);
            data.push_back(v);
        }
        ++rows;
    }
    t.values.resize(rows, Eigen::Index(t.header.size()));
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < t.values.cols(); ++c)
            t.values(r, c) = data[size_t(r) * t.header.size() + size_t(c)];
    return t;
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw ValidationError("write_text: cannot open " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("read_text: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace metapinn
