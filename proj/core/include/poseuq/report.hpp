#pragma once

#include <string>

#include "poseuq/dataset.hpp"
#include "poseuq/evaluation.hpp"

namespace poseuq {

Json to_json(const CorrelationReport& report);
Json to_json(const SelectionReport& report);

// Aligned plain-text tables: rho with two decimals; ADD in centimeters.
std::string format_table(const CorrelationReport& report);
std::string format_table(const SelectionReport& report);

}  // namespace poseuq
