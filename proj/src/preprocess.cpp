#include "monilog/preprocess.hpp"

#include <cctype>
#include <map>
#include <optional>

#include "json.hpp"
#include "monilog/common.hpp"

namespace monilog {

using json = nlohmann::ordered_json;

std::string_view to_string(PayloadKind kind) {
    switch (kind) {
        case PayloadKind::none:
            return "none";
        case PayloadKind::json:
            return "json";
        case PayloadKind::xml:
            return "xml";
        case PayloadKind::kv_braces:
            return "kv-braces";
    }
    return "none";
}

std::vector<Token> tokenize(std::string_view free_text) {
    std::vector<Token> tokens;
    for (const auto piece : split_whitespace(free_text)) {
        tokens.push_back({std::string(piece), tokens.size()});
    }
    return tokens;
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) {
        s.remove_prefix(1);
    }
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::string_view trim_right(std::string_view s) {
    while (!s.empty() && is_space(s.back())) {
        s.remove_suffix(1);
    }
    return s;
}

std::string join_key(const std::string& prefix, std::string_view key) {
    return prefix.empty() ? std::string(key) : prefix + "." + std::string(key);
}

// --- brace blocks -----------------------------------------------------------

/// Position one past the brace matching text[open], honouring double-quoted
/// strings; npos when unbalanced.
std::size_t match_brace(std::string_view text, std::size_t open) {
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) {
                return i + 1;
            }
        }
    }
    return std::string_view::npos;
}

void flatten_json(const json& value, const std::string& prefix, std::vector<PayloadField>& out) {
    if (value.is_object() && !value.empty()) {
        for (const auto& [key, child] : value.items()) {
            flatten_json(child, join_key(prefix, key), out);
        }
    } else if (value.is_array() && !value.empty()) {
        for (std::size_t i = 0; i < value.size(); ++i) {
            flatten_json(value[i], join_key(prefix, std::to_string(i)), out);
        }
    } else if (value.is_string()) {
        out.emplace_back(prefix, value.get<std::string>());
    } else {
        out.emplace_back(prefix, value.dump());
    }
}

std::vector<std::string_view> split_top_level(std::string_view text, char sep) {
    std::vector<std::string_view> parts;
    int depth = 0;
    bool in_string = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            --depth;
        } else if (c == sep && depth == 0) {
            parts.push_back(text.substr(start, i - start));
            start = i + 1;
        }
    }
    parts.push_back(text.substr(start));
    return parts;
}

bool parse_kv_block(std::string_view block, const std::string& prefix,
                    std::vector<PayloadField>& out) {
    if (block.size() < 2 || block.front() != '{' || block.back() != '}') {
        return false;
    }
    const auto inner = trim(block.substr(1, block.size() - 2));
    if (inner.empty()) {
        return false;
    }
    for (const auto raw_part : split_top_level(inner, ',')) {
        const auto part = trim(raw_part);
        if (part.empty()) {
            continue;
        }
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) {
            return false;
        }
        const auto key = trim(part.substr(0, eq));
        auto value = trim(part.substr(eq + 1));
        if (key.empty() || split_whitespace(key).size() != 1) {
            return false;
        }
        if (!value.empty() && value.front() == '{' && value.back() == '}') {
            if (!parse_kv_block(value, join_key(prefix, key), out)) {
                return false;
            }
            continue;
        }
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') {
            value = value.substr(1, value.size() - 2);
        }
        out.emplace_back(join_key(prefix, key), std::string(value));
    }
    return true;
}

// --- XML fragments ----------------------------------------------------------

bool is_name_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0 || c == '_' || c == ':';
}

bool is_name_char(char c) {
    return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) != 0 || c == '-' ||
           c == '.';
}

std::string decode_entities(std::string_view text) {
    static const std::map<std::string_view, char> entities{
        {"&lt;", '<'}, {"&gt;", '>'}, {"&amp;", '&'}, {"&quot;", '"'}, {"&apos;", '\''}};
    std::string out;
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] == '&') {
            const auto semi = text.find(';', i);
            if (semi != std::string_view::npos) {
                const auto it = entities.find(text.substr(i, semi - i + 1));
                if (it != entities.end()) {
                    out += it->second;
                    i = semi;
                    continue;
                }
            }
        }
        out += text[i];
    }
    return out;
}

class XmlFragmentParser {
public:
    explicit XmlFragmentParser(std::string_view text) : text_(text) {}

    /// Parses one element starting at `pos`; returns the position after it.
    std::optional<std::size_t> element(std::size_t pos, const std::string& prefix,
                                       std::vector<PayloadField>& out, int depth = 0) {
        if (depth > 32 || pos >= text_.size() || text_[pos] != '<') {
            return std::nullopt;
        }
        ++pos;
        const auto name = read_name(pos);
        if (name.empty()) {
            return std::nullopt;
        }
        const std::string path = join_key(prefix, name);
        std::vector<PayloadField> fields;
        // attributes
        while (true) {
            skip_space(pos);
            if (pos >= text_.size()) {
                return std::nullopt;
            }
            if (text_.compare(pos, 2, "/>") == 0) {
                out.insert(out.end(), fields.begin(), fields.end());
                if (fields.empty()) {
                    out.emplace_back(path, "");
                }
                return pos + 2;
            }
            if (text_[pos] == '>') {
                ++pos;
                break;
            }
            const auto attr = read_name(pos);
            if (attr.empty()) {
                return std::nullopt;
            }
            skip_space(pos);
            if (pos >= text_.size() || text_[pos] != '=') {
                return std::nullopt;
            }
            ++pos;
            skip_space(pos);
            if (pos >= text_.size() || (text_[pos] != '"' && text_[pos] != '\'')) {
                return std::nullopt;
            }
            const char quote = text_[pos++];
            const auto close = text_.find(quote, pos);
            if (close == std::string_view::npos) {
                return std::nullopt;
            }
            fields.emplace_back(join_key(path, attr), decode_entities(text_.substr(pos, close - pos)));
            pos = close + 1;
        }

        // content: text and child elements, collected first so repeated
        // child names can be indexed.
        std::string text;
        std::vector<std::pair<std::string, std::vector<PayloadField>>> children;
        while (true) {
            if (pos >= text_.size()) {
                return std::nullopt;
            }
            if (text_.compare(pos, 2, "</") == 0) {
                pos += 2;
                const auto closing = read_name(pos);
                skip_space(pos);
                if (closing != name || pos >= text_.size() || text_[pos] != '>') {
                    return std::nullopt;
                }
                ++pos;
                break;
            }
            if (text_.compare(pos, 4, "<!--") == 0) {
                const auto end = text_.find("-->", pos + 4);
                if (end == std::string_view::npos) {
                    return std::nullopt;
                }
                pos = end + 3;
                continue;
            }
            if (text_[pos] == '<') {
                std::size_t name_pos = pos + 1;
                const auto child_name = read_name(name_pos);
                std::vector<PayloadField> child_fields;
                const auto end = element(pos, "", child_fields, depth + 1);
                if (!end) {
                    return std::nullopt;
                }
                children.emplace_back(child_name, std::move(child_fields));
                pos = *end;
                continue;
            }
            const auto next = text_.find('<', pos);
            if (next == std::string_view::npos) {
                return std::nullopt;
            }
            text += text_.substr(pos, next - pos);
            pos = next;
        }

        std::map<std::string, int> name_count;
        for (const auto& child : children) {
            ++name_count[child.first];
        }
        std::map<std::string, int> name_seen;
        for (auto& [child_name, child_fields] : children) {
            std::string child_prefix = path;
            if (name_count[child_name] > 1) {
                // child fields are keyed "name...", insert the sibling index
                const std::string indexed =
                    child_name + "." + std::to_string(name_seen[child_name]++);
                for (auto& [key, value] : child_fields) {
                    key = indexed + key.substr(child_name.size());
                }
            }
            for (auto& [key, value] : child_fields) {
                fields.emplace_back(join_key(child_prefix, key), std::move(value));
            }
        }
        const auto trimmed = trim(text);
        if (!trimmed.empty() || (children.empty() && fields.empty())) {
            fields.emplace_back(path, decode_entities(trimmed));
        }
        out.insert(out.end(), fields.begin(), fields.end());
        return pos;
    }

private:
    std::string read_name(std::size_t& pos) const {
        if (pos >= text_.size() || !is_name_start(text_[pos])) {
            return {};
        }
        const std::size_t start = pos;
        while (pos < text_.size() && is_name_char(text_[pos])) {
            ++pos;
        }
        return std::string(text_.substr(start, pos - start));
    }

    void skip_space(std::size_t& pos) const {
        while (pos < text_.size() && is_space(text_[pos])) {
            ++pos;
        }
    }

    std::string_view text_;
};

// --- tail detection ---------------------------------------------------------

struct TailPayload {
    std::size_t start = 0;  // offset of the payload inside the trimmed message
    PayloadKind kind = PayloadKind::none;
    std::vector<PayloadField> fields;
};

std::optional<TailPayload> detect_tail_payload(std::string_view trimmed) {
    if (trimmed.empty()) {
        return std::nullopt;
    }
    if (trimmed.back() == '}') {
        for (std::size_t p = trimmed.find('{'); p != std::string_view::npos;
             p = trimmed.find('{', p + 1)) {
            if (match_brace(trimmed, p) != trimmed.size()) {
                continue;
            }
            const auto block = trimmed.substr(p);
            TailPayload tail;
            tail.start = p;
            try {
                const auto doc = json::parse(block);
                if (doc.is_object()) {
                    tail.kind = PayloadKind::json;
                    flatten_json(doc, "", tail.fields);
                    return tail;
                }
            } catch (const json::parse_error&) {
            }
            if (parse_kv_block(block, "", tail.fields)) {
                tail.kind = PayloadKind::kv_braces;
                return tail;
            }
            return std::nullopt;
        }
        return std::nullopt;
    }
    if (trimmed.back() == '>') {
        XmlFragmentParser parser(trimmed);
        for (std::size_t p = trimmed.find('<'); p != std::string_view::npos;
             p = trimmed.find('<', p + 1)) {
            if (p + 1 >= trimmed.size() || !is_name_start(trimmed[p + 1])) {
                continue;
            }
            TailPayload tail;
            tail.start = p;
            const auto end = parser.element(p, "", tail.fields);
            if (end && *end == trimmed.size()) {
                tail.kind = PayloadKind::xml;
                return tail;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

PreprocessedMessage extract_structured_payload(std::string_view message) {
    PreprocessedMessage result;
    result.free_text = std::string(message);
    const auto trimmed = trim_right(message);
    auto tail = detect_tail_payload(trimmed);
    if (!tail) {
        return result;
    }
    const auto free_text = trim_right(trimmed.substr(0, tail->start));
    // A message carrying two appended payloads is left alone, which keeps
    // extraction idempotent on its own output.
    if (detect_tail_payload(free_text)) {
        return result;
    }
    result.free_text = std::string(free_text);
    result.payload_text = std::string(trimmed.substr(tail->start));
    result.payload = std::move(tail->fields);
    result.payload_kind = tail->kind;
    return result;
}

Preprocessor::Preprocessor(const std::vector<MaskRule>& masks) {
    for (const auto& rule : masks) {
        try {
            masks_.emplace_back(std::regex(rule.pattern), rule.placeholder);
        } catch (const std::regex_error& e) {
            throw ValidationError("invalid mask pattern '" + rule.pattern + "': " + e.what());
        }
    }
}

PreprocessedMessage Preprocessor::operator()(std::string_view message) const {
    auto result = extract_structured_payload(message);
    if (!masks_.empty()) {
        std::string text = result.free_text;
        for (const auto& [pattern, placeholder] : masks_) {
            text = std::regex_replace(text, pattern, placeholder);
        }
        result.free_text_tokens = tokenize(text);
    } else {
        result.free_text_tokens = tokenize(result.free_text);
    }
    return result;
}

}  // namespace monilog
