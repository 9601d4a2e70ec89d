#ifndef CPHMM_DATASETS_HPP
#define CPHMM_DATASETS_HPP

#include <string>

#include "cphmm/model.hpp"

// The two case-study datasets, embedded so the CLI works out of the box.
namespace cphmm::datasets {

// British coal-mining accident counts, 1851-1962 (n = 112).
ObservationSeries coal();

// BT474 chromosome-10 log-reference ratios (n = 120).
ObservationSeries bt474();

ObservationSeries builtin(const std::string& name);
bool is_builtin(const std::string& name);

}  // namespace cphmm::datasets

#endif  // CPHMM_DATASETS_HPP
