// External MLLM-judge integration: prompt templates, response parsing, a
// chat-completions client with retries and replay fixtures, and
// judge-vs-oracle calibration metrics.
#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "planrl/core.hpp"
#include "planrl/geometry.hpp"
#include "planrl/rewards.hpp"

namespace planrl {

enum class JudgeKind : int { sem = 0, spa = 1, pi = 2, ground = 3, compare = 4 };

inline const char* judge_kind_name(JudgeKind k) {
    switch (k) {
        case JudgeKind::sem: return "sem";
        case JudgeKind::spa: return "spa";
        case JudgeKind::pi: return "pi";
        case JudgeKind::ground: return "ground";
        case JudgeKind::compare: return "compare";
    }
    throw ArgumentError("invalid judge kind");
}

// ----------------------------- templates -----------------------------
// Stored verbatim; placeholders in {braces} are substituted byte-for-byte.

inline constexpr int kJudgeTemplateVersion = 1;

namespace judge_templates {

inline constexpr const char* kSem =
    R"(You are a professional image caption evaluator. You will evaluate how well a detailed AI-generated caption aligns with a brief image prompt.

You will be given:
1. A brief image prompt that describes what should be in the image
2. A detailed caption that was generated based on the brief prompt

Your task is to evaluate if the detailed caption is aligned with and faithful to the brief prompt. Consider:
- Does the detailed caption include all elements from the brief prompt?
- Does the detailed caption add elements that contradict the brief prompt?
- Is the detailed caption reasonable and consistent with what the prompt describes?
- Is the caption coherent and properly formatted?

The score should be from 0 to 10:
- 0: Completely nonsensical output, messy code, or gibberish that fails to function as a caption
- 1-2: Severe misalignment. The detailed caption fails to represent key elements or completely contradicts the brief prompt
- 3-4: Poor alignment with significant omissions or contradictions to the brief prompt
- 5-6: Moderate alignment with some missing elements or noticeable inconsistencies
- 7-8: Strong alignment with minor inconsistencies or additions that don't contradict the prompt
- 9-10: Perfect alignment. The detailed caption faithfully includes all elements from the brief prompt with appropriate elaboration

Brief prompt: {prompt}

Detailed caption: {chain}

Note to only ouput with a dictionary with score in this format: {"score": ...})";

inline constexpr const char* kSpa =
    R"(Determine if objects are arranged as described in the prompt by analyzing the image.

ORIGINAL IMAGE PROMPT: {prompt}

COORDINATE SYSTEM EXPLANATION:
- The image shows object bounding boxes with names labeled at the top-left corner of each box

SCORING RULES:
- Score 8-10 if the objects are shown in the image and their positions MATCH the relationship in the prompt
* 10: Perfect match with clear relationship
* 9: Strong match with minor ambiguity
* 8: Good match with some ambiguity
- Score 5-7 if the relationship is partially correct or ambiguous
* 7: Mostly correct with some misalignment
* 6: Relationship is ambiguous but leaning toward correct
* 5: Borderline case where relationship could be interpreted either way
- Score 1-4 if the objects are NOT shown in the image or positions CONTRADICT the relationship in the prompt
* 4: Slight contradiction or missing one object
* 3: Clear contradiction but objects are present
* 2: Major contradiction or missing multiple objects
* 1: Complete mismatch with the prompt

Please answer in order to:
Verify if the objects are shown in the ORIGINAL IMAGE PROMPT.

Decide if the relationships between objects match what is described in the ORIGINAL IMAGE PROMPT.

Your response MUST be formatted as:

{{
    "reasoning": ...,
    "score": ...
}}

Output only the dictionary with nothing else.)";

inline constexpr const char* kPi =
    R"(You are an expert in visual analysis specializing in compositional accuracy evaluation.

Your task is to compare the caption with an image and assess ONLY how well the image matches the described elements, objects, and their relationships.

Analyze:

Compositional accuracy: Evaluate if all key elements mentioned in the caption appear in the image with correct relationships, positioning, and attributes as specified.

EVALUATION CRITERIA:

1. Object Presence: Are the key objects mentioned in the image prompt correctly shown in the image?

2. Spatial Positioning: Are the objects positioned in the EXACT spatial relationships described in the caption? Pay special attention to positional terms like "on top of," "next to," "inside," "left of," "right of," "behind," "in front of," etc.

Examples of STRICT spatial interpretations:

- "Left of" means the object must be positioned horizontally to the left, not above, below, or on top.

- "On top of" means the object must be directly above and touching, not beside or below.

Compositional accuracy score (0-10):

- 8-10: Perfect match. Image contains all elements with EXACTLY the spatial relationships described.

- 5-7: Minor mismatch. All objects present but with slightly incorrect spatial relationships.

- 0-4: Major mismatch. Objects present but with completely incorrect spatial relationships, or missing key objects.

Caption: {prompt}

Your response MUST be formatted as:

{{
    "description": "ONE sentence describing the image accurately, including the spatial relationship observed",
    "caption": "repeat of the image caption provided",
    "reasoning": "ONE sentence explaining if the spatial positioning in the image EXACTLY matches or contradicts the caption",
    "score": ...
}}

Output only the python dictionary with nothing else.)";

inline constexpr const char* kGround =
    R"(Locate the {object}, report the bbox coordinates in JSON format.)";

inline constexpr const char* kCompare =
    R"(You are an assistant tasked with evaluating two detailed image captions based on a given input prompt. Your goal is to determine which caption provides a better and more accurate description of the image, considering the object descriptions and their corresponding positions.

Task: Evaluate the two detailed image captions provided below, based on the given input prompt. Select the caption that is a better and more accurate description of an image, considering the object descriptions and their corresponding bounding boxes. The detailed captions includes the bounding boxes of the objects in the image, which are represented as (x1, x2), (y1, y2). (Assume a standard image coordinate system where (0,0) is the top-left corner).

Input Prompt:

{prompt}

Detailed Caption A:

{chain_a}

Detailed Caption B:

{chain_b}

When deciding which caption is better, please consider the following:

Relevance to the Input Prompt: How well does each caption address and align with the original input prompt?

Accuracy of Object Descriptions: Are the objects described correctly and in sufficient detail?

Accuracy of Bounding Boxes: Do the provided bounding boxes (x1, x2), (y1, y2) accurately represent the location and extent of the described objects?

Completeness: Does the caption identify and describe the key objects relevant to the input prompt? Does it miss any important elements or include irrelevant ones?

Clarity and Coherence: Is the caption easy to understand? Are the object descriptions and their spatial relationships (implied by bounding boxes) presented logically?

Naturalness and Fluency: Does the caption read like a natural and well-written description?

Output Format:

Please provide your response in the following format:

{{

    Reasoning: "Your reasoning here",

    Selected Caption: "A or B",

}})";

}  // namespace judge_templates

struct JudgePromptInputs {
    std::string prompt_text;
    std::string chain_text;
    std::string chain_text_b;  // compare only
    std::string object_label;  // ground only
};

namespace detail {

inline void substitute_all(std::string& text, const std::string& placeholder,
                           const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(placeholder, pos)) != std::string::npos) {
        text.replace(pos, placeholder.size(), value);
        pos += value.size();
    }
}

}  // namespace detail

inline std::string render_judge_prompt(JudgeKind kind, const JudgePromptInputs& in) {
    auto require = [](const std::string& v, const char* name) -> const std::string& {
        if (v.empty())
            throw ArgumentError(std::string("judge template missing input: ") + name);
        return v;
    };
    std::string text;
    switch (kind) {
        case JudgeKind::sem:
            text = judge_templates::kSem;
            detail::substitute_all(text, "{prompt}", require(in.prompt_text, "prompt"));
            detail::substitute_all(text, "{chain}", require(in.chain_text, "chain"));
            return text;
        case JudgeKind::spa:
            text = judge_templates::kSpa;
            detail::substitute_all(text, "{prompt}", require(in.prompt_text, "prompt"));
            return text;
        case JudgeKind::pi:
            text = judge_templates::kPi;
            detail::substitute_all(text, "{prompt}", require(in.prompt_text, "prompt"));
            return text;
        case JudgeKind::ground:
            text = judge_templates::kGround;
            detail::substitute_all(text, "{object}", require(in.object_label, "object"));
            return text;
        case JudgeKind::compare:
            text = judge_templates::kCompare;
            detail::substitute_all(text, "{prompt}", require(in.prompt_text, "prompt"));
            detail::substitute_all(text, "{chain_a}", require(in.chain_text, "chain_a"));
            detail::substitute_all(text, "{chain_b}", require(in.chain_text_b, "chain_b"));
            return text;
    }
    throw ArgumentError("unknown judge kind");
}

// ----------------------------- response parsing -----------------------------

namespace detail {

// Balanced open/close regions at any nesting level, skipping string
// literals. Returned as (offset, length), in scan order of the opener.
inline std::vector<std::pair<size_t, size_t>> balanced_regions(const std::string& s,
                                                               char open, char close) {
    std::vector<std::pair<size_t, size_t>> out;
    std::vector<size_t> stack;
    bool in_str = false, escape = false;
    for (size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (in_str) {
            if (escape) escape = false;
            else if (c == '\\') escape = true;
            else if (c == '"') in_str = false;
            continue;
        }
        if (c == '"') in_str = true;
        else if (c == open) stack.push_back(i);
        else if (c == close && !stack.empty()) {
            out.emplace_back(stack.back(), i + 1 - stack.back());
            stack.pop_back();
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

inline std::optional<int> score_from_value(const json& v) {
    double d;
    if (v.is_number()) {
        d = v.get<double>();
    } else if (v.is_string()) {
        try {
            size_t consumed = 0;
            d = std::stod(v.get<std::string>(), &consumed);
            if (consumed != v.get<std::string>().size()) return std::nullopt;
        } catch (const std::exception&) {
            return std::nullopt;
        }
    } else {
        return std::nullopt;
    }
    if (d != std::floor(d)) return std::nullopt;
    const int score = static_cast<int>(d);
    if (score < 0 || score > 10) return std::nullopt;
    return score;
}

}  // namespace detail

// Extracts the last syntactically valid JSON object carrying a "score" key.
inline int parse_score(const std::string& raw) {
    std::optional<int> found;
    for (const auto& [pos, len] : detail::balanced_regions(raw, '{', '}')) {
        const json j = json::parse(raw.substr(pos, len), nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("score")) continue;
        if (auto s = detail::score_from_value(j["score"])) found = *s;
    }
    if (!found) throw ParseError("no parsable score in judge response");
    return *found;
}

// Vote parser for the two-caption comparison format: the first quoted A or
// B after the last "Selected Caption" key.
inline char parse_vote(const std::string& raw) {
    const size_t key = raw.rfind("Selected Caption");
    const size_t from = key == std::string::npos ? 0 : key;
    const size_t qa = raw.find("\"A\"", from);
    const size_t qb = raw.find("\"B\"", from);
    if (qa != std::string::npos && (qb == std::string::npos || qa < qb)) return 'A';
    if (qb != std::string::npos) return 'B';
    throw ParseError("no A/B vote in judge response");
}

struct ParsedBoxes {
    std::vector<std::pair<std::string, Box>> boxes;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<std::array<double, 4>> coords_from(const json& v) {
    if (!v.is_array() || v.size() != 4) return std::nullopt;
    std::array<double, 4> c{};
    for (int i = 0; i < 4; ++i) {
        if (!v[i].is_number()) return std::nullopt;
        c[i] = v[i].get<double>();
    }
    return c;
}

inline std::optional<std::array<double, 4>> coords_from_object(const json& item,
                                                               std::string& label) {
    for (const char* key : {"bbox_2d", "bbox", "box", "coordinates"}) {
        if (item.contains(key)) {
            for (const char* lk : {"label", "name", "object"})
                if (item.contains(lk) && item[lk].is_string())
                    label = item[lk].get<std::string>();
            return coords_from(item[key]);
        }
    }
    return std::nullopt;
}

// Accepts the common labeled-bbox shapes; nullopt when the payload does not
// look like boxes at all.
inline std::optional<std::vector<std::pair<std::string, std::array<double, 4>>>>
extract_raw_boxes(const json& j) {
    std::vector<std::pair<std::string, std::array<double, 4>>> out;
    if (j.is_array()) {
        for (const auto& item : j) {
            std::string label;
            if (item.is_object()) {
                auto c = coords_from_object(item, label);
                if (!c) return std::nullopt;
                out.emplace_back(label, *c);
            } else if (auto c = coords_from(item)) {
                out.emplace_back("", *c);
            } else {
                return std::nullopt;
            }
        }
        return out;
    }
    if (j.is_object()) {
        std::string label;
        if (auto c = coords_from_object(j, label)) {
            out.emplace_back(label, *c);
            return out;
        }
        for (const auto& [key, value] : j.items()) {
            auto c = coords_from(value);
            if (!c) return std::nullopt;
            out.emplace_back(key, *c);
        }
        return out.empty() ? std::nullopt : std::make_optional(out);
    }
    return std::nullopt;
}

}  // namespace detail

// Parses labeled boxes from a grounding response and rescales them from
// judge-image pixels to canvas units. Degenerate boxes are dropped with a
// warning.
inline ParsedBoxes parse_boxes(const std::string& raw, int image_width, int image_height) {
    if (image_width <= 0 || image_height <= 0)
        throw ArgumentError("image dimensions must be known to rescale boxes");

    std::optional<std::vector<std::pair<std::string, std::array<double, 4>>>> extracted;
    const json whole = json::parse(raw, nullptr, false);
    if (!whole.is_discarded()) extracted = detail::extract_raw_boxes(whole);
    if (!extracted) {
        auto regions = detail::balanced_regions(raw, '[', ']');
        const auto braces = detail::balanced_regions(raw, '{', '}');
        regions.insert(regions.end(), braces.begin(), braces.end());
        std::sort(regions.begin(), regions.end());
        for (const auto& [pos, len] : regions) {
            const json j = json::parse(raw.substr(pos, len), nullptr, false);
            if (j.is_discarded()) continue;
            if ((extracted = detail::extract_raw_boxes(j))) break;
        }
    }
    if (!extracted) throw ParseError("no parsable boxes in grounding response");

    ParsedBoxes out;
    const double sx = static_cast<double>(kCanvasSize) / image_width;
    const double sy = static_cast<double>(kCanvasSize) / image_height;
    for (const auto& [label, c] : *extracted) {
        Box b{std::clamp(c[0] * sx, 0.0, double(kCanvasSize)),
              std::clamp(c[1] * sy, 0.0, double(kCanvasSize)),
              std::clamp(c[2] * sx, 0.0, double(kCanvasSize)),
              std::clamp(c[3] * sy, 0.0, double(kCanvasSize))};
        if (!b.valid()) {
            out.warnings.push_back("dropped degenerate box for label '" + label + "'");
            continue;
        }
        out.boxes.emplace_back(label, b);
    }
    return out;
}

// ----------------------------- wire client -----------------------------

struct JudgeRequest {
    JudgeKind kind = JudgeKind::sem;
    std::string prompt_text;          // filled template
    std::string image_png;            // empty for sem/compare
    int image_width = 0;
    int image_height = 0;
    std::string model;                // empty: endpoint default
    double timeout_seconds = 30.0;
    int max_retries = 2;

    void validate() const {
        const bool needs_image =
            kind == JudgeKind::spa || kind == JudgeKind::pi || kind == JudgeKind::ground;
        if (needs_image && image_png.empty())
            throw ArgumentError("this judge request kind requires an image");
        if (!needs_image && !image_png.empty())
            throw ArgumentError("this judge request kind must not carry an image");
    }
};

struct JudgeResponse {
    std::string raw;
    std::optional<int> score;                          // sem / spa / pi
    std::vector<std::pair<std::string, Box>> boxes;    // ground
    std::optional<char> vote;                          // compare
    double latency_seconds = 0;
};

struct EndpointConfig {
    std::string base_url;  // e.g. http://127.0.0.1:8080/v1
    std::string api_key;
    std::string model = "oracle-judge";
    double timeout_seconds = 30.0;
    int max_retries = 2;
    double backoff_seconds = 0.25;

    static EndpointConfig from_env() {
        EndpointConfig cfg;
        if (const char* v = std::getenv("JUDGE_BASE_URL")) cfg.base_url = v;
        if (const char* v = std::getenv("JUDGE_API_KEY")) cfg.api_key = v;
        if (const char* v = std::getenv("JUDGE_MODEL")) cfg.model = v;
        return cfg;
    }
};

namespace detail {

inline std::string base64_encode(const std::string& data) {
    static const char* alphabet =
        "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const uint32_t v = (static_cast<uint8_t>(data[i]) << 16) |
                           (static_cast<uint8_t>(data[i + 1]) << 8) |
                           static_cast<uint8_t>(data[i + 2]);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out.push_back(alphabet[v & 63]);
    }
    if (i + 1 == data.size()) {
        const uint32_t v = static_cast<uint8_t>(data[i]) << 16;
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out += "==";
    } else if (i + 2 == data.size()) {
        const uint32_t v = (static_cast<uint8_t>(data[i]) << 16) |
                           (static_cast<uint8_t>(data[i + 1]) << 8);
        out.push_back(alphabet[(v >> 18) & 63]);
        out.push_back(alphabet[(v >> 12) & 63]);
        out.push_back(alphabet[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

inline uint64_t fnv1a64(const std::string& s) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace detail

// Deterministic chat-completions body; the image rides as a base64 data URL
// content part.
inline std::string build_request_body(const JudgeRequest& request,
                                      const std::string& default_model) {
    request.validate();
    ordered_json content = ordered_json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt_text}});
    if (!request.image_png.empty()) {
        content.push_back(
            {{"type", "image_url"},
             {"image_url",
              {{"url",
                "data:image/png;base64," + detail::base64_encode(request.image_png)}}}});
    }
    ordered_json body{
        {"model", request.model.empty() ? default_model : request.model},
        {"messages", ordered_json::array({{{"role", "user"}, {"content", content}}})},
        {"temperature", 0}};
    return body.dump();
}

inline std::string request_hash(const std::string& body) {
    return detail::hex64(detail::fnv1a64(body));
}

// Transport: body in, assistant text out. Throws JudgeUnavailableError on
// any delivery failure.
using JudgeTransport = std::function<std::string(const std::string& body)>;

inline JudgeTransport make_http_transport(const EndpointConfig& cfg) {
    if (cfg.base_url.empty())
        throw ConfigError("judge endpoint not configured (set JUDGE_BASE_URL)");
    const auto scheme_end = cfg.base_url.find("://");
    const size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
    const auto path_start = cfg.base_url.find('/', host_start);
    const std::string origin =
        path_start == std::string::npos ? cfg.base_url : cfg.base_url.substr(0, path_start);
    const std::string prefix =
        path_start == std::string::npos ? "" : cfg.base_url.substr(path_start);
    const std::string api_key = cfg.api_key;
    const double timeout = cfg.timeout_seconds;

    return [origin, prefix, api_key, timeout](const std::string& body) -> std::string {
        httplib::Client cli(origin);
        cli.set_connection_timeout(std::chrono::milliseconds(
            static_cast<int64_t>(timeout * 1000)));
        cli.set_read_timeout(
            std::chrono::milliseconds(static_cast<int64_t>(timeout * 1000)));
        httplib::Headers headers;
        if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
        auto res = cli.Post(prefix + "/chat/completions", headers, body,
                            "application/json");
        if (!res) throw JudgeUnavailableError("judge endpoint unreachable");
        if (res->status < 200 || res->status >= 300)
            throw JudgeUnavailableError("judge endpoint returned status " +
                                        std::to_string(res->status));
        const json j = json::parse(res->body, nullptr, false);
        if (j.is_discarded() || !j.contains("choices") || j["choices"].empty())
            throw JudgeUnavailableError("malformed chat-completions response");
        return j["choices"][0].at("message").at("content").get<std::string>();
    };
}

// Replay fixture: JSONL lines of {"request_hash": ..., "response": ...}.
inline JudgeTransport make_replay_transport(const std::string& fixture_path) {
    auto table = std::make_shared<std::map<std::string, std::string>>();
    std::ifstream in(fixture_path);
    if (!in) throw ConfigError("cannot open replay fixture: " + fixture_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json j = json::parse(line, nullptr, false);
        if (j.is_discarded()) throw ParseError("bad replay fixture line: " + line);
        (*table)[j.at("request_hash").get<std::string>()] =
            j.at("response").get<std::string>();
    }
    return [table](const std::string& body) -> std::string {
        const auto it = table->find(request_hash(body));
        if (it == table->end())
            throw JudgeUnavailableError("no recorded response for request " +
                                        request_hash(body));
        return it->second;
    };
}

// Wraps a transport and appends every exchange to a fixture file.
inline JudgeTransport make_recording_transport(JudgeTransport inner,
                                               const std::string& fixture_path) {
    auto out = std::make_shared<std::ofstream>(fixture_path, std::ios::app);
    if (!*out) throw ConfigError("cannot open fixture for writing: " + fixture_path);
    return [inner = std::move(inner), out](const std::string& body) -> std::string {
        const std::string response = inner(body);
        ordered_json line{{"request_hash", request_hash(body)}, {"response", response}};
        *out << line.dump() << "\n";
        out->flush();
        return response;
    };
}

class JudgeClient {
  public:
    JudgeClient(EndpointConfig config, JudgeTransport transport)
        : config_(std::move(config)), transport_(std::move(transport)) {}

    static JudgeClient from_env() {
        EndpointConfig cfg = EndpointConfig::from_env();
        return JudgeClient(cfg, make_http_transport(cfg));
    }

    static JudgeClient replay(const std::string& fixture_path,
                              EndpointConfig cfg = EndpointConfig{}) {
        return JudgeClient(cfg, make_replay_transport(fixture_path));
    }

    const EndpointConfig& config() const { return config_; }

    // Bounded retries with exponential backoff. Delivery failures become
    // JudgeUnavailableError; responses that never parse become ParseError
    // (the caller maps that to reward 0 and logs it).
    JudgeResponse call(const JudgeRequest& request) const {
        request.validate();
        const std::string body = build_request_body(request, config_.model);
        const int attempts = std::max(request.max_retries, 0) + 1;
        std::exception_ptr last_error;
        for (int attempt = 0; attempt < attempts; ++attempt) {
            if (attempt > 0 && config_.backoff_seconds > 0) {
                std::this_thread::sleep_for(std::chrono::duration<double>(
                    config_.backoff_seconds * std::pow(2.0, attempt - 1)));
            }
            JudgeResponse response;
            const auto t0 = std::chrono::steady_clock::now();
            try {
                response.raw = transport_(body);
            } catch (const JudgeUnavailableError&) {
                last_error = std::current_exception();
                continue;
            }
            response.latency_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                    .count();
            try {
                switch (request.kind) {
                    case JudgeKind::sem:
                    case JudgeKind::spa:
                    case JudgeKind::pi:
                        response.score = parse_score(response.raw);
                        break;
                    case JudgeKind::ground:
                        response.boxes = parse_boxes(response.raw, request.image_width,
                                                     request.image_height)
                                             .boxes;
                        break;
                    case JudgeKind::compare:
                        response.vote = parse_vote(response.raw);
                        break;
                }
            } catch (const ParseError&) {
                last_error = std::current_exception();
                continue;
            }
            return response;
        }
        if (last_error) std::rethrow_exception(last_error);
        throw JudgeUnavailableError("judge call failed with no attempts made");
    }

  private:
    EndpointConfig config_;
    JudgeTransport transport_;
};

// ----------------------------- judge-backed rewards -----------------------------

// Judge failures after retries score 0, never a silent neutral 1.
inline ExternalJudgeHooks make_judge_hooks(
    std::shared_ptr<JudgeClient> client,
    std::function<void(const std::string&)> warn = nullptr) {
    auto log_warn = [warn](const std::string& msg) {
        if (warn) warn(msg);
    };
    ExternalJudgeHooks hooks;

    hooks.sem = [client, log_warn](const PromptSpec& prompt,
                                   const ReasoningChain& chain) -> double {
        JudgeRequest req;
        req.kind = JudgeKind::sem;
        req.prompt_text = render_judge_prompt(
            JudgeKind::sem, {.prompt_text = prompt.text, .chain_text = chain_to_text(chain)});
        try {
            return *client->call(req).score / 10.0;
        } catch (const ParseError& e) {
            log_warn(std::string("sem judge parse failure, scoring 0: ") + e.what());
            return 0.0;
        }
    };

    hooks.spa = [client, log_warn](const PromptSpec& prompt, const ReasoningChain& chain,
                                   const RenderConfig& render) -> double {
        const Canvas canvas = render_layout(chain, render);
        JudgeRequest req;
        req.kind = JudgeKind::spa;
        req.prompt_text =
            render_judge_prompt(JudgeKind::spa, {.prompt_text = prompt.text});
        req.image_png = export_png(canvas);
        req.image_width = canvas.width;
        req.image_height = canvas.height;
        try {
            return *client->call(req).score / 10.0;
        } catch (const ParseError& e) {
            log_warn(std::string("spa judge parse failure, scoring 0: ") + e.what());
            return 0.0;
        }
    };

    hooks.pi = [client, log_warn](const PromptSpec& prompt, const Scene& scene) -> double {
        ReasoningChain as_chain;
        as_chain.planned = scene.placed;
        const Canvas canvas = render_layout(as_chain);
        JudgeRequest req;
        req.kind = JudgeKind::pi;
        req.prompt_text = render_judge_prompt(JudgeKind::pi, {.prompt_text = prompt.text});
        req.image_png = export_png(canvas);
        req.image_width = canvas.width;
        req.image_height = canvas.height;
        try {
            return *client->call(req).score / 10.0;
        } catch (const ParseError& e) {
            log_warn(std::string("pi judge parse failure, scoring 0: ") + e.what());
            return 0.0;
        }
    };

    hooks.ri = [client, log_warn](const ReasoningChain& chain, const Scene& scene) -> double {
        ReasoningChain as_chain;
        as_chain.planned = scene.placed;
        const Canvas canvas = render_layout(as_chain);
        const std::string png = export_png(canvas);
        double total = 0;
        for (const auto& planned : chain.planned) {
            JudgeRequest req;
            req.kind = JudgeKind::ground;
            req.prompt_text = render_judge_prompt(
                JudgeKind::ground, {.object_label = entity_name(planned.entity)});
            req.image_png = png;
            req.image_width = canvas.width;
            req.image_height = canvas.height;
            double best = 0;
            try {
                for (const auto& [label, box] : client->call(req).boxes) {
                    if (!label.empty() && label != entity_name(planned.entity)) continue;
                    best = std::max(best, iou(planned.box, box));
                }
            } catch (const ParseError& e) {
                log_warn(std::string("grounding parse failure, object scores 0: ") +
                         e.what());
            }
            total += best;
        }
        return chain.planned.empty() ? 0.0 : total / chain.planned.size();
    };

    return hooks;
}

// ----------------------------- calibration metrics -----------------------------

// Kendall tau-a: (concordant - discordant) / all pairs; ties contribute 0.
inline double kendall_tau(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ArgumentError("kendall_tau needs equal lengths");
    const size_t n = xs.size();
    if (n < 2) throw ArgumentError("kendall_tau needs at least 2 points");
    long long concordant = 0, discordant = 0;
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            const double dx = xs[i] - xs[j];
            const double dy = ys[i] - ys[j];
            const double prod = dx * dy;
            if (prod > 0) ++concordant;
            else if (prod < 0) ++discordant;
        }
    }
    const double total = static_cast<double>(n) * (n - 1) / 2.0;
    return (concordant - discordant) / total;
}

inline std::vector<double> average_ranks(const std::vector<double>& xs) {
    const size_t n = xs.size();
    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](size_t a, size_t b) { return xs[a] < xs[b]; });
    std::vector<double> ranks(n);
    size_t i = 0;
    while (i < n) {
        size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;  // 1-based
        for (size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

// Pearson correlation of average ranks. Zero-variance input yields 0.
inline double spearman_rho(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size()) throw ArgumentError("spearman_rho needs equal lengths");
    const size_t n = xs.size();
    if (n < 2) throw ArgumentError("spearman_rho needs at least 2 points");
    const auto rx = average_ranks(xs);
    const auto ry = average_ranks(ys);
    double mx = 0, my = 0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0 || syy == 0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

struct CalibrationSample {
    JudgeRequest request;
    double oracle_score10 = 0;  // oracle reward scaled to the 0-10 rubric
};

struct CalibrationReport {
    double tau = 0;
    double rho = 0;
    int used = 0;
    int skipped = 0;
    std::map<std::string, std::array<int, 11>> judge_histograms;
};

inline void to_json(json& j, const CalibrationReport& r) {
    j = json{{"kendall_tau", r.tau},
             {"spearman_rho", r.rho},
             {"used", r.used},
             {"skipped", r.skipped},
             {"judge_histograms", r.judge_histograms}};
}

// Scores every sample with the judge and correlates against the oracle.
// Failed judgments are recorded and skipped.
inline CalibrationReport calibrate_judge(const std::vector<CalibrationSample>& samples,
                                         const JudgeClient& client,
                                         std::function<void(const std::string&)> warn =
                                             nullptr) {
    CalibrationReport report;
    std::vector<double> judge_scores, oracle_scores;
    for (const auto& sample : samples) {
        int score;
        try {
            const auto response = client.call(sample.request);
            if (!response.score) throw ParseError("judge response had no score");
            score = *response.score;
        } catch (const std::exception& e) {
            ++report.skipped;
            if (warn) warn(std::string("calibration sample skipped: ") + e.what());
            continue;
        }
        ++report.used;
        judge_scores.push_back(score);
        oracle_scores.push_back(sample.oracle_score10);
        report.judge_histograms[judge_kind_name(sample.request.kind)]
                               [static_cast<size_t>(score)]++;
    }
    if (judge_scores.size() >= 2) {
        report.tau = kendall_tau(judge_scores, oracle_scores);
        report.rho = spearman_rho(judge_scores, oracle_scores);
    }
    return report;
}

}  // namespace planrl
