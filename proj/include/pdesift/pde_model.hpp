#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "pdesift/basis.hpp"

namespace pdesift {

struct ModelTerm {
    BasisTerm term;
    double coefficient = 0.0;
};

/// d^time_order u / dt^time_order = sum_k coefficient_k * term_k(u).
struct PdeModel {
    int time_order = 1;
    std::vector<ModelTerm> terms;

    int max_derivative() const noexcept
    {
        int m = 0;
        for (const auto& t : terms) m = std::max(m, t.term.deriv.total());
        return m;
    }

    std::map<std::string, double> coefficient_map() const
    {
        std::map<std::string, double> out;
        for (const auto& t : terms) out[t.term.label()] += t.coefficient;
        return out;
    }

    std::string to_string() const
    {
        std::string lhs = time_order == 1 ? "u_t" : "u_tt";
        std::string rhs;
        for (const auto& t : terms) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%s%.6g", rhs.empty() ? "" : " + ", t.coefficient);
            rhs += buf;
            rhs += " " + t.term.label();
        }
        return lhs + " = " + (rhs.empty() ? "0" : rhs);
    }
};

} // namespace pdesift
