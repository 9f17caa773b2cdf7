#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "got/graph.hpp"
#include "got/measures.hpp"
#include "got/static_ot.hpp"
#include "json.hpp"

namespace got {

using Json = nlohmann::ordered_json;

// Malformed or schema-violating input; the message names the offending position.
class FormatError : public DomainError {
public:
    using DomainError::DomainError;
};

// Read-only cursor into a JSON document that reports failures with a JSON pointer.
class JsonView {
public:
    JsonView(const Json& node, std::string pointer = "") : node_(&node), pointer_(std::move(pointer)) {}

    const Json& raw() const { return *node_; }
    const std::string& pointer() const { return pointer_; }
    std::string where() const { return pointer_.empty() ? "/" : pointer_; }

    bool has(std::string_view key) const;
    JsonView at(std::string_view key) const;
    JsonView at(std::size_t index) const;
    std::size_t size() const;  // arrays only

    double number() const;
    double positive() const;
    long long integer() const;
    std::string string() const;
    bool boolean() const;

    [[noreturn]] void fail(const std::string& message) const;

private:
    const Json* node_;
    std::string pointer_;
};

// Parse errors become FormatError with line and column.
Json parse_json(std::string_view text, const std::string& source);
Json read_json_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);
// Writes to a sibling temporary file, then renames it over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

// {"format": "mgraph/1", "nodes": [...], "edges": [{"id", "tail", "head", "length", "embed"?}]}
Json graph_to_json(const MetricGraph& g);
MetricGraph graph_from_json(const JsonView& doc);

// {"format": "measure/1", "kind": "graph" | "ambient", "atoms": [...]}
Json measure_to_json(const DiscreteMeasure& m, const MetricGraph* g);
DiscreteMeasure measure_from_json(const JsonView& doc, const MetricGraph* g);

// {"format": "otresult/1", "value", "coupling", "potentials", "gap", "monotonicity"?}
Json otresult_to_json(const OtSolution& s, const MonotonicityReport* monotonicity = nullptr);

}  // namespace got
