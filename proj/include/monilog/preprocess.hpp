#pragma once

#include <regex>
#include <string>
#include <utility>
#include <vector>

namespace monilog {

struct Token {
    std::string text;
    std::size_t index = 0;

    bool operator==(const Token&) const = default;
};

enum class PayloadKind { none, json, xml, kv_braces };

std::string_view to_string(PayloadKind kind);

using PayloadField = std::pair<std::string, std::string>;

struct PreprocessedMessage {
    /// Message with the trailing payload (and whitespace before it) removed.
    std::string free_text;
    std::vector<Token> free_text_tokens;
    std::vector<PayloadField> payload;
    PayloadKind payload_kind = PayloadKind::none;
    /// Verbatim payload substring; free_text + separator + payload_text is
    /// the original message.
    std::string payload_text;
};

/// Detects a JSON object, a `{k=v, ...}` block or an XML element at the end
/// of the message and flattens it to dotted keys. Tokens are left empty.
PreprocessedMessage extract_structured_payload(std::string_view message);

std::vector<Token> tokenize(std::string_view free_text);

/// Optional masking rules, applied to the free text before tokenization.
/// Off by default.
struct MaskRule {
    std::string pattern;
    std::string placeholder;
};

class Preprocessor {
public:
    Preprocessor() = default;
    explicit Preprocessor(const std::vector<MaskRule>& masks);

    PreprocessedMessage operator()(std::string_view message) const;

private:
    std::vector<std::pair<std::regex, std::string>> masks_;
};

}  // namespace monilog
