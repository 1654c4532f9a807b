#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "isocausal/discrete.hpp"
#include "isocausal/grw.hpp"
#include "isocausal/mapping.hpp"
#include "isocausal/mpwave.hpp"

namespace isocausal::cli {

using json = nlohmann::json;

// Reads an input document (or "-" for stdin); requires an object with "version": 1
// and a known "kind".
json read_document(const std::string& path);
std::string document_kind(const json& doc);

// Object access that remembers which keys were read, so leftovers can be
// reported with their JSON pointer.
class Fields {
public:
    Fields(const json& j, std::string pointer);
    const json& require(const std::string& key);
    const json* optional(const std::string& key);
    std::string where(const std::string& key) const;
    const std::string& pointer() const { return ptr_; }
    void finish() const;

private:
    const json& j_;
    std::string ptr_;
    std::set<std::string> seen_;
};

ScalarExpr expr_at(const json& v, const std::string& where);
Interval interval_at(const json& v, const std::string& where);
double number_at(const json& v, const std::string& where);
Mat matrix_at(const json& v, const std::string& where);

struct MetricDoc {
    MetricField metric;
    std::optional<std::vector<std::vector<ScalarExpr>>> tensor;
};

MetricDoc parse_metric(const json& doc);
DiffeoSpec parse_diffeo(const json& doc);
GRWSpec parse_grw(const json& doc);
TimeProductSpec parse_timeproduct(const json& doc);
MpWaveSpec parse_mpwave(const json& doc);
PlaneWaveSpec parse_planewave(const json& doc);

struct GridJob {
    std::optional<std::string> fixture;
    double scale = 1.0;
    Bridge bridge = Bridge::BumpIntegral;
    std::optional<MetricField> metric;  // custom grid instead of a fixture
    std::vector<std::pair<std::string, GridAxis>> axes;
    std::optional<std::array<double, 2>> node;
    std::optional<ReachKind> relation;
    std::optional<Direction> direction;
    std::optional<int> j;
};

GridJob parse_gridjob(const json& doc);
Bridge parse_bridge(const std::string& s, const std::string& where);
ReachKind parse_relation(const std::string& s, const std::string& where);
Direction parse_direction(const std::string& s, const std::string& where);
// "sphere", "S1", "Sn", "torus" and "compact" are compact; "R", "Rn", "plane"
// and "noncompact" are not.
bool fiber_is_compact(const std::string& fiber, const std::string& where);

// JSON views of library results.
json to_json(const Vec& v);
json to_json(const Mat& m);
json to_json(const MappingVerdict& v);
json to_json(const IntervalProfile& p);
json to_json(const GRWClass& c);
json to_json(const OrderResult& r);

}  // namespace isocausal::cli
