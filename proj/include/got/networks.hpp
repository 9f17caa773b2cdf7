#pragma once

#include "got/graph.hpp"

namespace got {

// Single edge from (0,0) to (length,0).
MetricGraph straight_pipe(double length = 1.0);

// One edge bent at the origin: (-arm,0) -> (0,0) -> (0,-arm).
MetricGraph l_bend(double arm = 0.5);

// Stem from (-stem,0) to the junction at the origin, two arms at +-45 degrees.
MetricGraph y_network(double stem = 1.0, double arm = 1.0);

// Inlet stem splitting into two bent corridors; a hand-built stand-in for the junction figure.
MetricGraph figure1_network();

}  // namespace got
