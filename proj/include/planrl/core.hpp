// Core domain types: prompts, boxes, anchors, reasoning chains, scenes,
// trajectories and reward vectors, plus their canonical JSON forms.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace planrl {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

// ----------------------------- errors -----------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DecodeError : Error {
    using Error::Error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct ArgumentError : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct JudgeUnavailableError : Error {
    using Error::Error;
};

// ----------------------------- vocabulary -----------------------------

inline constexpr int kCanvasSize = 64;
inline constexpr int kNumCategories = 8;
inline constexpr int kNumAttributes = 6;
inline constexpr int kNumAnchors = 32;
inline constexpr int kStepsPerEntity = 3;  // attribute, planned anchor, realized anchor

inline constexpr std::array<const char*, kNumCategories> kCategoryNames = {
    "cube", "sphere", "dog", "cat", "car", "tree", "bird", "chair"};

inline constexpr std::array<const char*, kNumAttributes> kAttributeNames = {
    "red", "blue", "green", "yellow", "brown", "orange"};

inline int category_id(const std::string& name) {
    for (int i = 0; i < kNumCategories; ++i)
        if (name == kCategoryNames[i]) return i;
    throw ArgumentError("unknown category name: " + name);
}

inline int attribute_id(const std::string& name) {
    for (int i = 0; i < kNumAttributes; ++i)
        if (name == kAttributeNames[i]) return i;
    throw ArgumentError("unknown attribute name: " + name);
}

// ----------------------------- relations -----------------------------

enum class RelationKind : int { left_of = 0, right_of = 1, above = 2, below = 3 };

inline constexpr int kNumRelationKinds = 4;

inline const char* relation_kind_name(RelationKind k) {
    switch (k) {
        case RelationKind::left_of: return "left-of";
        case RelationKind::right_of: return "right-of";
        case RelationKind::above: return "above";
        case RelationKind::below: return "below";
    }
    throw ArgumentError("invalid relation kind");
}

inline RelationKind relation_kind_from_name(const std::string& name) {
    for (int i = 0; i < kNumRelationKinds; ++i) {
        auto k = static_cast<RelationKind>(i);
        if (name == relation_kind_name(k)) return k;
    }
    throw ArgumentError("unknown relation kind: " + name);
}

// ----------------------------- geometry primitives -----------------------------

// Axis-aligned box in canvas units. y grows downward.
struct Box {
    double x1 = 0, y1 = 0, x2 = 0, y2 = 0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    double cx() const { return (x1 + x2) / 2.0; }
    double cy() const { return (y1 + y2) / 2.0; }

    bool valid() const {
        return x1 >= 0 && x1 < x2 && x2 <= kCanvasSize && y1 >= 0 && y1 < y2 &&
               y2 <= kCanvasSize;
    }

    friend bool operator==(const Box& a, const Box& b) {
        return a.x1 == b.x1 && a.y1 == b.y1 && a.x2 == b.x2 && a.y2 == b.y2;
    }
};

// The fixed discrete placement action space: a 4x4 grid of centers crossed
// with side lengths {16, 32}, clipped to the canvas. 32 anchors, index<->box
// is a bijection.
inline Box anchor_box(int index) {
    if (index < 0 || index >= kNumAnchors)
        throw ArgumentError("anchor index out of range: " + std::to_string(index));
    const int size_idx = index / 16;
    const int cell = index % 16;
    const int col = cell % 4;
    const int row = cell / 4;
    const double cx = (2 * col + 1) * 8.0;
    const double cy = (2 * row + 1) * 8.0;
    const double half = size_idx == 0 ? 8.0 : 16.0;
    Box b{cx - half, cy - half, cx + half, cy + half};
    b.x1 = std::max(0.0, b.x1);
    b.y1 = std::max(0.0, b.y1);
    b.x2 = std::min(static_cast<double>(kCanvasSize), b.x2);
    b.y2 = std::min(static_cast<double>(kCanvasSize), b.y2);
    return b;
}

inline int anchor_index(const Box& box) {
    for (int i = 0; i < kNumAnchors; ++i)
        if (anchor_box(i) == box) return i;
    throw ArgumentError("box is not an anchor");
}

// ----------------------------- prompt types -----------------------------

struct EntitySpec {
    int category = 0;   // id in [0, kNumCategories)
    int attribute = 0;  // id in [0, kNumAttributes)

    bool valid() const {
        return category >= 0 && category < kNumCategories && attribute >= 0 &&
               attribute < kNumAttributes;
    }

    friend bool operator==(const EntitySpec&, const EntitySpec&) = default;
};

struct RelationSpec {
    int subject = 0;
    int object = 0;
    RelationKind kind = RelationKind::left_of;

    friend bool operator==(const RelationSpec&, const RelationSpec&) = default;
};

// "a red cube" / "an orange sphere"
inline std::string entity_phrase(const EntitySpec& e) {
    const std::string attr = kAttributeNames[e.attribute];
    const char first = attr[0];
    const bool vowel = first == 'a' || first == 'e' || first == 'i' || first == 'o' ||
                       first == 'u';
    return std::string(vowel ? "an " : "a ") + attr + " " + kCategoryNames[e.category];
}

// "red cube" — the bare name used for canvas labels and grounding queries.
inline std::string entity_name(const EntitySpec& e) {
    return std::string(kAttributeNames[e.attribute]) + " " + kCategoryNames[e.category];
}

inline std::string relation_phrase(RelationKind k) {
    switch (k) {
        case RelationKind::left_of: return "to the left of";
        case RelationKind::right_of: return "to the right of";
        case RelationKind::above: return "above";
        case RelationKind::below: return "below";
    }
    throw ArgumentError("invalid relation kind");
}

struct PromptSpec;
inline std::string render_prompt_text(const PromptSpec& spec);

struct PromptSpec {
    std::vector<EntitySpec> entities;
    std::vector<RelationSpec> relations;
    std::string text;  // deterministic rendering of (entities, relations)

    void validate() const {
        if (entities.empty()) throw ArgumentError("prompt needs at least one entity");
        for (const auto& e : entities)
            if (!e.valid()) throw ArgumentError("entity ids out of range");
        const int n = static_cast<int>(entities.size());
        for (const auto& r : relations) {
            if (r.subject < 0 || r.subject >= n || r.object < 0 || r.object >= n)
                throw ArgumentError("relation references invalid entity index");
            if (r.subject == r.object)
                throw ArgumentError("relation subject equals object");
        }
    }

    friend bool operator==(const PromptSpec& a, const PromptSpec& b) {
        return a.entities == b.entities && a.relations == b.relations;
    }
};

inline PromptSpec make_prompt(std::vector<EntitySpec> entities,
                              std::vector<RelationSpec> relations = {}) {
    PromptSpec p;
    p.entities = std::move(entities);
    p.relations = std::move(relations);
    p.validate();
    p.text = render_prompt_text(p);
    return p;
}

// Deterministic natural-language rendering. Each relation becomes a clause
// "<subject> <relation> <object>"; entities untouched by any relation get
// their own clause; clauses join with " and ".
inline std::string render_prompt_text(const PromptSpec& spec) {
    std::vector<bool> mentioned(spec.entities.size(), false);
    std::vector<std::string> clauses;
    for (const auto& r : spec.relations) {
        clauses.push_back(entity_phrase(spec.entities[r.subject]) + " " +
                          relation_phrase(r.kind) + " " +
                          entity_phrase(spec.entities[r.object]));
        mentioned[r.subject] = true;
        mentioned[r.object] = true;
    }
    for (size_t i = 0; i < spec.entities.size(); ++i)
        if (!mentioned[i]) clauses.push_back(entity_phrase(spec.entities[i]));
    std::string out;
    for (size_t i = 0; i < clauses.size(); ++i) {
        if (i > 0) out += " and ";
        out += clauses[i];
    }
    return out;
}

// ----------------------------- chain / scene -----------------------------

struct ObjectInstance {
    EntitySpec entity;
    Box box;

    friend bool operator==(const ObjectInstance&, const ObjectInstance&) = default;
};

// The reasoning chain: ordered planned objects, one per prompt entity.
struct ReasoningChain {
    std::vector<ObjectInstance> planned;
};

// The symbolic "image": realized objects. May deviate from the plan.
struct Scene {
    std::vector<ObjectInstance> placed;
};

// GoT-style text form of a chain: object phrases with their coordinates.
inline std::string chain_to_text(const ReasoningChain& chain) {
    std::string out;
    char buf[96];
    for (size_t i = 0; i < chain.planned.size(); ++i) {
        const auto& o = chain.planned[i];
        if (i > 0) out += ", ";
        std::snprintf(buf, sizeof(buf), " with coordinates (%g,%g),(%g,%g)", o.box.x1,
                      o.box.y1, o.box.x2, o.box.y2);
        out += entity_phrase(o.entity) + buf;
    }
    return out;
}

// ----------------------------- trajectory -----------------------------

enum class StepKind : int { attribute = 0, plan = 1, render = 2 };

inline StepKind step_kind_at(int step_index) {
    return static_cast<StepKind>(step_index % kStepsPerEntity);
}

struct DecisionStep {
    int distribution_id = 0;  // row id: category / plan context / planned anchor
    int action = 0;
    double logp_old = 0;  // under the sampling policy, at sampling temperature
    double logp_cur = 0;  // under the current policy, temperature 1
    double logp_ref = 0;  // under the reference policy, temperature 1

    friend bool operator==(const DecisionStep&, const DecisionStep&) = default;
};

struct Trajectory {
    PromptSpec prompt;
    std::vector<DecisionStep> steps;
    ReasoningChain chain;
    Scene scene;

    double sum_logp_old() const {
        double s = 0;
        for (const auto& st : steps) s += st.logp_old;
        return s;
    }
    double sum_logp_cur() const {
        double s = 0;
        for (const auto& st : steps) s += st.logp_cur;
        return s;
    }
    double sum_logp_ref() const {
        double s = 0;
        for (const auto& st : steps) s += st.logp_ref;
        return s;
    }
};

// Decodes raw decision steps into (chain, scene). Entity k's attribute is
// step 3k's action, its planned box anchor(step 3k+1) and its realized box
// anchor(step 3k+2); categories come from the prompt.
inline std::pair<ReasoningChain, Scene> decode_trajectory(
    const std::vector<DecisionStep>& steps, const PromptSpec& prompt) {
    const int n = static_cast<int>(prompt.entities.size());
    if (static_cast<int>(steps.size()) != kStepsPerEntity * n)
        throw DecodeError("expected " + std::to_string(kStepsPerEntity * n) +
                          " steps, got " + std::to_string(steps.size()));
    ReasoningChain chain;
    Scene scene;
    for (int k = 0; k < n; ++k) {
        const int attr = steps[3 * k].action;
        const int plan_a = steps[3 * k + 1].action;
        const int rend_a = steps[3 * k + 2].action;
        if (attr < 0 || attr >= kNumAttributes)
            throw DecodeError("attribute action out of range");
        if (plan_a < 0 || plan_a >= kNumAnchors || rend_a < 0 || rend_a >= kNumAnchors)
            throw DecodeError("anchor action out of range");
        EntitySpec ent{prompt.entities[k].category, attr};
        chain.planned.push_back({ent, anchor_box(plan_a)});
        scene.placed.push_back({ent, anchor_box(rend_a)});
    }
    return {std::move(chain), std::move(scene)};
}

// ----------------------------- rewards -----------------------------

struct RewardVector {
    double pi = 0, sem = 0, spa = 0, ri = 0, hps = 0;
    double total = 0;

    double pr() const { return (sem + spa) / 2.0; }
};

// ----------------------------- JSON forms -----------------------------
// Canonical serialization: snake_case fields, boxes as [x1, y1, x2, y2].

inline void to_json(json& j, const Box& b) { j = json::array({b.x1, b.y1, b.x2, b.y2}); }

inline void from_json(const json& j, Box& b) {
    if (!j.is_array() || j.size() != 4) throw ParseError("box must be [x1,y1,x2,y2]");
    b.x1 = j[0].get<double>();
    b.y1 = j[1].get<double>();
    b.x2 = j[2].get<double>();
    b.y2 = j[3].get<double>();
}

inline void to_json(json& j, const EntitySpec& e) {
    j = json{{"category", e.category}, {"attribute", e.attribute}};
}

inline void from_json(const json& j, EntitySpec& e) {
    j.at("category").get_to(e.category);
    j.at("attribute").get_to(e.attribute);
}

inline void to_json(json& j, const RelationSpec& r) {
    j = json{{"subject", r.subject},
             {"object", r.object},
             {"kind", relation_kind_name(r.kind)}};
}

inline void from_json(const json& j, RelationSpec& r) {
    j.at("subject").get_to(r.subject);
    j.at("object").get_to(r.object);
    r.kind = relation_kind_from_name(j.at("kind").get<std::string>());
}

inline void to_json(json& j, const PromptSpec& p) {
    j = json{{"entities", p.entities}, {"relations", p.relations}, {"text", p.text}};
}

inline void from_json(const json& j, PromptSpec& p) {
    j.at("entities").get_to(p.entities);
    j.at("relations").get_to(p.relations);
    p.validate();
    p.text = render_prompt_text(p);
}

inline void to_json(json& j, const ObjectInstance& o) {
    j = json{{"entity", o.entity}, {"box", o.box}};
}

inline void from_json(const json& j, ObjectInstance& o) {
    j.at("entity").get_to(o.entity);
    j.at("box").get_to(o.box);
}

inline void to_json(json& j, const ReasoningChain& c) { j = json{{"planned", c.planned}}; }

inline void from_json(const json& j, ReasoningChain& c) { j.at("planned").get_to(c.planned); }

inline void to_json(json& j, const Scene& s) { j = json{{"placed", s.placed}}; }

inline void from_json(const json& j, Scene& s) { j.at("placed").get_to(s.placed); }

inline void to_json(json& j, const RewardVector& r) {
    j = json{{"r_pi", r.pi},   {"r_sem", r.sem},   {"r_spa", r.spa}, {"r_ri", r.ri},
             {"r_hps", r.hps}, {"r_pr", r.pr()},   {"r_total", r.total}};
}

inline void from_json(const json& j, RewardVector& r) {
    j.at("r_pi").get_to(r.pi);
    j.at("r_sem").get_to(r.sem);
    j.at("r_spa").get_to(r.spa);
    j.at("r_ri").get_to(r.ri);
    j.at("r_hps").get_to(r.hps);
    j.at("r_total").get_to(r.total);
}

}  // namespace planrl
