#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "monilog/common.hpp"
#include "monilog/ingest.hpp"
#include "monilog/preprocess.hpp"

namespace monilog {

struct ParserParams {
    /// Leading-token levels plus one; the tree descends tree_depth - 1 tokens.
    std::size_t tree_depth = 4;
    double sim_threshold = 0.4;
    /// Branch cap per node; one slot is held back for the catch-all child.
    std::size_t max_children = 100;

    void validate() const;
    bool operator==(const ParserParams&) const = default;
};

/// A mined template. Wildcard positions hold kWildcard.
struct Template {
    TemplateId id = 0;
    std::vector<std::string> tokens;
    std::uint64_t support = 0;

    std::size_t wildcard_count() const;
    /// Space-joined tokens.
    std::string render() const;

    bool operator==(const Template&) const = default;
};

/// Value of one wildcard position for one line.
struct Binding {
    std::size_t position = 0;
    std::string value;

    bool operator==(const Binding&) const = default;
};

struct ParseResult {
    TemplateId template_id = kEmptyTemplateId;
    std::vector<Binding> bindings;
};

/// One structured line of the parsed stream.
struct ParsedLog {
    RawLogRecord record;
    TemplateId template_id = kEmptyTemplateId;
    std::vector<Binding> bindings;
    std::vector<PayloadField> payload;

    bool operator==(const ParsedLog&) const = default;
};

/// Fraction of positions where the token equals the template literal, with
/// wildcard positions counted as equal. Lengths must match, else 0.
double template_similarity(std::span<const std::string> tokens,
                           std::span<const std::string> template_tokens);

/// Serializable view of a miner: templates plus the tree path each one
/// lives under.
struct MinerState {
    ParserParams params;
    std::vector<Template> templates;                 // index == id
    std::vector<std::vector<std::string>> routes;    // index == id
};

/// Online template miner over a fixed-depth tree keyed first by token
/// count, then by leading tokens. Tokens containing a digit descend into the
/// wildcard branch. Single-writer; copies are independent.
class TemplateMiner {
public:
    explicit TemplateMiner(ParserParams params = {});

    ParseResult parse(std::span<const std::string> tokens);
    ParseResult parse(const std::vector<Token>& tokens);

    /// Templates sorted by id, including the reserved empty template 0.
    std::vector<Template> export_templates() const;

    /// nullptr when the id was never assigned.
    const Template* find(TemplateId id) const;

    const ParserParams& params() const { return params_; }

    /// Number of templates excluding the reserved one.
    std::size_t template_count() const { return templates_.size() - 1; }

    MinerState state() const;
    static TemplateMiner restore(const MinerState& state);

private:
    struct Node {
        std::map<std::string, std::size_t> children;
        std::size_t literal_children = 0;
        std::vector<TemplateId> templates;
    };

    std::size_t child(std::size_t node, const std::string& key);
    std::string branch_key(std::size_t node, const std::string& token) const;

    ParserParams params_;
    std::vector<Node> nodes_;
    std::map<std::size_t, std::size_t> length_roots_;
    std::vector<Template> templates_;
    std::vector<std::vector<std::string>> routes_;
};

/// Preprocesses and parses one record.
ParsedLog parse_record(TemplateMiner& miner, const Preprocessor& preprocessor,
                       const RawLogRecord& record);

}  // namespace monilog
