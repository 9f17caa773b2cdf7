#include "got/networks.hpp"

#include <cmath>

namespace got {

MetricGraph straight_pipe(double length) {
    MetricGraph g;
    const auto a = g.add_node("a");
    const auto b = g.add_node("b");
    g.add_edge("e", a, b, length, Polyline({make_point(0, 0), make_point(length, 0)}));
    return g;
}

MetricGraph l_bend(double arm) {
    MetricGraph g;
    const auto a = g.add_node("a");
    const auto b = g.add_node("b");
    g.add_edge("e", a, b, 2.0 * arm, Polyline({make_point(-arm, 0), make_point(0, 0), make_point(0, -arm)}));
    return g;
}

MetricGraph y_network(double stem, double arm) {
    MetricGraph g;
    const auto s = g.add_node("inlet");
    const auto j = g.add_node("junction");
    const auto u = g.add_node("upper");
    const auto d = g.add_node("lower");
    const double r = arm / std::sqrt(2.0);
    g.add_edge("stem", s, j, stem, Polyline({make_point(-stem, 0), make_point(0, 0)}));
    g.add_edge("upper", j, u, arm, Polyline({make_point(0, 0), make_point(r, r)}));
    g.add_edge("lower", j, d, arm, Polyline({make_point(0, 0), make_point(r, -r)}));
    return g;
}

MetricGraph figure1_network() {
    MetricGraph g;
    const auto in = g.add_node("inlet");
    const auto j = g.add_node("junction");
    const auto u = g.add_node("outlet_upper");
    const auto d = g.add_node("outlet_lower");
    const double diag = 0.4 * std::sqrt(2.0);
    g.add_edge("stem", in, j, 0.8, Polyline({make_point(0, 0), make_point(0.8, 0)}));
    g.add_edge("upper", j, u, diag + 0.8,
               Polyline({make_point(0.8, 0), make_point(1.2, 0.4), make_point(2.0, 0.4)}));
    g.add_edge("lower", j, d, diag + 0.8,
               Polyline({make_point(0.8, 0), make_point(1.2, -0.4), make_point(2.0, -0.4)}));
    return g;
}

}  // namespace got
