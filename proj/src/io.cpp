#include "got/io.hpp"

#include <fstream>
#include <sstream>

namespace got {

bool JsonView::has(std::string_view key) const { return node_->is_object() && node_->contains(key); }

JsonView JsonView::at(std::string_view key) const {
    if (!node_->is_object()) fail("expected an object");
    const auto it = node_->find(key);
    if (it == node_->end()) fail("missing key '" + std::string(key) + "'");
    return JsonView(*it, pointer_ + "/" + std::string(key));
}

JsonView JsonView::at(std::size_t index) const {
    if (!node_->is_array()) fail("expected an array");
    if (index >= node_->size()) fail("index " + std::to_string(index) + " out of range");
    return JsonView((*node_)[index], pointer_ + "/" + std::to_string(index));
}

std::size_t JsonView::size() const {
    if (!node_->is_array()) fail("expected an array");
    return node_->size();
}

double JsonView::number() const {
    if (!node_->is_number()) fail("expected a number");
    return node_->get<double>();
}

double JsonView::positive() const {
    const double v = number();
    if (!(v > 0.0) || !std::isfinite(v)) fail("expected a positive number");
    return v;
}

long long JsonView::integer() const {
    if (!node_->is_number_integer()) fail("expected an integer");
    return node_->get<long long>();
}

std::string JsonView::string() const {
    if (!node_->is_string()) fail("expected a string");
    return node_->get<std::string>();
}

bool JsonView::boolean() const {
    if (!node_->is_boolean()) fail("expected true or false");
    return node_->get<bool>();
}

void JsonView::fail(const std::string& message) const { throw FormatError("at " + where() + ": " + message); }

Json parse_json(std::string_view text, const std::string& source) {
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, column = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < text.size(); ++i) {
            if (text[i] == '\n') {
                ++line;
                column = 1;
            } else {
                ++column;
            }
        }
        throw FormatError(source + ":" + std::to_string(line) + ":" + std::to_string(column) + ": invalid JSON");
    }
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot read '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json_file(const std::filesystem::path& path) { return parse_json(read_text_file(path), path.string()); }

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write '" + tmp.string() + "'");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

namespace {

Json point_to_json(const Point& p, bool planar) {
    Json a = Json::array({p[0], p[1]});
    if (!planar) a.push_back(p[2]);
    return a;
}

Point point_from_json(const JsonView& v) {
    const std::size_t n = v.size();
    if (n != 2 && n != 3) v.fail("a point needs 2 or 3 coordinates");
    Point p;
    for (std::size_t i = 0; i < n; ++i) p[i] = v.at(i).number();
    return p;
}

}  // namespace

Json graph_to_json(const MetricGraph& g) {
    Json doc;
    doc["format"] = "mgraph/1";
    Json nodes = Json::array();
    for (std::size_t v = 0; v < g.node_count(); ++v) nodes.push_back(g.node_name(NodeId{static_cast<std::uint32_t>(v)}));
    doc["nodes"] = std::move(nodes);
    Json edges = Json::array();
    for (const auto& e : g.edges()) {
        Json ej;
        ej["id"] = e.name;
        ej["tail"] = g.node_name(e.tail);
        ej["head"] = g.node_name(e.head);
        ej["length"] = e.length;
        if (e.embed) {
            bool planar = true;
            for (const auto& p : e.embed->vertices()) planar = planar && p[2] == 0.0;
            Json pts = Json::array();
            for (const auto& p : e.embed->vertices()) pts.push_back(point_to_json(p, planar));
            ej["embed"] = std::move(pts);
        }
        edges.push_back(std::move(ej));
    }
    doc["edges"] = std::move(edges);
    return doc;
}

MetricGraph graph_from_json(const JsonView& doc) {
    if (doc.at("format").string() != "mgraph/1") doc.at("format").fail("expected \"mgraph/1\"");
    MetricGraph g;
    const JsonView nodes = doc.at("nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const std::string name = nodes.at(i).string();
        if (g.find_node(name)) nodes.at(i).fail("duplicate node '" + name + "'");
        g.add_node(name);
    }
    const JsonView edges = doc.at("edges");
    for (std::size_t i = 0; i < edges.size(); ++i) {
        const JsonView e = edges.at(i);
        const std::string id = e.at("id").string();
        if (g.find_edge(id)) e.at("id").fail("duplicate edge '" + id + "'");
        auto node = [&](std::string_view key) {
            const auto v = g.find_node(e.at(key).string());
            if (!v) e.at(key).fail("unknown node '" + e.at(key).string() + "'");
            return *v;
        };
        std::optional<Polyline> embed;
        if (e.has("embed")) {
            const JsonView pts = e.at("embed");
            std::vector<Point> vs;
            for (std::size_t k = 0; k < pts.size(); ++k) vs.push_back(point_from_json(pts.at(k)));
            if (vs.size() < 2) pts.fail("an embedding needs at least two points");
            embed = Polyline(std::move(vs));
        }
        double length = 0.0;
        if (e.has("length")) {
            length = e.at("length").positive();
        } else if (embed) {
            length = embed->length();
        } else {
            e.fail("missing key 'length'");
        }
        g.add_edge(id, node("tail"), node("head"), length, std::move(embed));
    }
    const auto report = validate_graph(g);
    if (!report.ok()) doc.fail("invalid graph: " + report.violations.front());
    return g;
}

Json measure_to_json(const DiscreteMeasure& m, const MetricGraph* g) {
    Json doc;
    doc["format"] = "measure/1";
    Json atoms = Json::array();
    if (m.kind() == MeasureKind::graph) {
        if (!g) throw DomainError("graph measures need their graph for serialization");
        doc["kind"] = "graph";
        for (std::size_t i = 0; i < m.size(); ++i) {
            const GraphPoint& p = m.graph_points()[i];
            atoms.push_back(Json{{"edge", g->edge(p.edge).name}, {"coord", p.coord}, {"weight", m.weight(i)}});
        }
    } else {
        doc["kind"] = "ambient";
        bool planar = true;
        for (const auto& p : m.ambient_points()) planar = planar && p[2] == 0.0;
        for (std::size_t i = 0; i < m.size(); ++i)
            atoms.push_back(Json{{"point", point_to_json(m.ambient_points()[i], planar)}, {"weight", m.weight(i)}});
    }
    doc["atoms"] = std::move(atoms);
    return doc;
}

DiscreteMeasure measure_from_json(const JsonView& doc, const MetricGraph* g) {
    if (doc.at("format").string() != "measure/1") doc.at("format").fail("expected \"measure/1\"");
    const std::string kind = doc.at("kind").string();
    const JsonView atoms = doc.at("atoms");
    if (atoms.size() == 0) atoms.fail("a measure needs at least one atom");
    std::vector<double> weights;
    try {
        if (kind == "graph") {
            if (!g) doc.fail("graph measures need a graph");
            std::vector<GraphPoint> pts;
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                const JsonView a = atoms.at(i);
                const auto e = g->find_edge(a.at("edge").string());
                if (!e) a.at("edge").fail("unknown edge '" + a.at("edge").string() + "'");
                const double coord = a.at("coord").number();
                if (coord < 0.0 || coord > g->edge(*e).length) a.at("coord").fail("coordinate outside the edge");
                pts.push_back({*e, coord});
                weights.push_back(a.at("weight").number());
            }
            return DiscreteMeasure::on_graph(std::move(pts), std::move(weights));
        }
        if (kind == "ambient") {
            std::vector<Point> pts;
            for (std::size_t i = 0; i < atoms.size(); ++i) {
                const JsonView a = atoms.at(i);
                pts.push_back(point_from_json(a.at("point")));
                weights.push_back(a.at("weight").number());
            }
            return DiscreteMeasure::ambient(std::move(pts), std::move(weights));
        }
    } catch (const FormatError&) {
        throw;
    } catch (const DomainError& e) {
        atoms.fail(e.what());
    }
    doc.at("kind").fail("expected \"graph\" or \"ambient\"");
}

Json otresult_to_json(const OtSolution& s, const MonotonicityReport* monotonicity) {
    Json doc;
    doc["format"] = "otresult/1";
    doc["value"] = s.plan.value;
    Json plan = Json::array();
    for (const auto& e : s.plan.entries)
        plan.push_back(Json{{"source", e.source}, {"target", e.target}, {"mass", e.mass}});
    doc["coupling"] = std::move(plan);
    doc["potentials"] = Json{{"phi", s.certificate.phi}, {"psi", s.certificate.psi}};
    doc["primal"] = s.certificate.primal;
    doc["dual"] = s.certificate.dual;
    doc["gap"] = s.certificate.gap;
    doc["solver"] = s.used_assignment ? "assignment" : "successive-shortest-paths";
    if (monotonicity) {
        doc["monotonicity"] = Json{{"violations", monotonicity->violations},
                                   {"worst_margin", monotonicity->worst_margin},
                                   {"cycles_checked", monotonicity->cycles_checked},
                                   {"exhaustive", monotonicity->exhaustive},
                                   {"worst_cycle", monotonicity->worst_cycle}};
    }
    return doc;
}

}  // namespace got
