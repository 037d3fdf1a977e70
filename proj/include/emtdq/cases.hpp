#pragma once

#include "emtdq/builder.hpp"

namespace emtdq {

// The 9-bus base case: 2 SGs, 1 grid-forming inverter, 3 transformers with
// magnetizing branches, 6 pi-lines, 3 constant-impedance loads.
NetworkCase wscc9_case();

// Built-in cases: wscc9, c1..c8 (scaled, seed 42), the minimal subsystem
// fixtures s1-min / s2-min, and the detection fixtures fig1-cutset,
// fig2-loop, rl-ladder.
NetworkCase builtin_case(const std::string& name);
bool is_builtin_case(const std::string& name);
std::vector<std::string> builtin_case_names();

} // namespace emtdq
