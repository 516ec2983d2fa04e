#pragma once

#include <map>
#include <string>
#include <vector>

namespace wgqed {

struct TimeTrace {
    std::vector<double> times;   // ns
    std::vector<double> values;
    std::map<std::string, std::string> metadata;

    std::size_t size() const { return times.size(); }
    void validate() const;
};

}  // namespace wgqed
