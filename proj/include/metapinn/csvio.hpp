#pragma once

#include "metapinn/common.hpp"

#include <string>
#include <vector>

namespace metapinn {

// CSV helpers used by every artifact writer. Numbers are printed with
// %.17g so a write/read round trip reproduces doubles exactly.

std::string format_double(double v);

struct CsvTable {
    std::vector<std::string> header;
    MatrixXd values;  // rows x header.size()

    int col(const std::string& name) const;  // -1 when absent
};

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const MatrixXd& values);
CsvTable read_csv(const std::string& path);

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

}  // namespace metapinn
