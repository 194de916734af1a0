#pragma once
#include <algorithm>
#include <string>
#include <vector>

namespace rqed {

struct Check {
    std::string name;
    double deviation = 0.0;
    double tolerance = 0.0;
    bool pass() const { return deviation <= tolerance; }
};

struct Report {
    std::vector<Check> checks;

    void add(std::string name, double dev, double tol) { checks.push_back({std::move(name), dev, tol}); }
    void merge(const Report& r) { checks.insert(checks.end(), r.checks.begin(), r.checks.end()); }
    bool pass() const
    {
        return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });
    }
    double max_deviation() const
    {
        double m = 0.0;
        for (auto& c : checks) m = std::max(m, c.deviation);
        return m;
    }
    const Check* first_failure() const
    {
        for (auto& c : checks)
            if (!c.pass()) return &c;
        return nullptr;
    }
};

} // namespace rqed
