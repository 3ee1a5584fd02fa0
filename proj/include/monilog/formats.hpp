#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "monilog/classify.hpp"
#include "monilog/detect.hpp"
#include "monilog/eval.hpp"
#include "monilog/parser.hpp"

// JSON wire and file formats. Every decoder throws ValidationError on
// malformed input and never returns a partially filled object.

namespace monilog {

using Json = nlohmann::ordered_json;

/// Finite values as numbers; infinities as the strings "inf" / "-inf".
Json encode_double(double x);
double decode_double(const Json& j);

/// Parses JSON text; syntax errors become ValidationError.
Json parse_json(std::string_view text);

Json to_json(const ParserParams& p);
ParserParams parser_params_from_json(const Json& j);

// Parsed stream: one object per line with seq_no, ts, source, level,
// message, template_id, bindings (values), slots (token positions), payload.
Json to_json(const ParsedLog& log);
ParsedLog parsed_log_from_json(const Json& j);
void write_parsed_stream(std::ostream& out, std::span<const ParsedLog> logs);
std::vector<ParsedLog> read_parsed_stream(std::istream& in);

/// Template export: array of {id, template, support}.
Json templates_to_json(std::span<const Template> templates);

Json to_json(const MinerState& state);
MinerState miner_state_from_json(const Json& j);

Json to_json(const AnomalyReport& report);
AnomalyReport report_from_json(const Json& j);

Json to_json(const FeedbackEvent& event);
FeedbackEvent feedback_event_from_json(const Json& j);

Json to_json(const Pool& pool);
Json to_json(const ClassifierState& state);
ClassifierState classifier_state_from_json(const Json& j);

Json to_json(const DetectorParams& params);
DetectorParams detector_params_from_json(const Json& j);

Json to_json(const DetectorState& state);
DetectorState detector_state_from_json(const Json& j);

Json to_json(const DetectionMetrics& m);
Json to_json(const CalibrationResult& result);

}  // namespace monilog
