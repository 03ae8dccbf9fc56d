// The dual-stage multi-dimensional reward: oracle scorers for the four
// alignment components, an overlap proxy for the quality term, and the
// product/sum composition with ablation modes.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "planrl/core.hpp"
#include "planrl/geometry.hpp"

namespace planrl {

enum class RewardMode : int { oracle = 0, external_judge = 1, disabled = 2 };

inline const char* reward_mode_name(RewardMode m) {
    switch (m) {
        case RewardMode::oracle: return "oracle";
        case RewardMode::external_judge: return "external-judge";
        case RewardMode::disabled: return "disabled";
    }
    throw ArgumentError("invalid reward mode");
}

inline RewardMode reward_mode_from_name(const std::string& s) {
    if (s == "oracle") return RewardMode::oracle;
    if (s == "external-judge") return RewardMode::external_judge;
    if (s == "disabled") return RewardMode::disabled;
    throw ConfigError("unknown reward mode: " + s);
}

enum class Composition : int { product = 0, sum = 1 };
enum class SpaEval : int { rendered = 0, text = 1 };

struct RewardConfig {
    RewardMode pi = RewardMode::oracle;
    RewardMode sem = RewardMode::oracle;
    RewardMode spa = RewardMode::oracle;
    RewardMode ri = RewardMode::oracle;
    RewardMode hps = RewardMode::oracle;
    Composition composition = Composition::product;
    SpaEval spa_eval = SpaEval::rendered;
    // Stub for the CLIP / detector-based reward row; selecting it always
    // fails: those require external models.
    bool conventional = false;
    RenderConfig render;

    bool enabled(RewardMode m) const { return m != RewardMode::disabled; }

    void validate() const {
        if (conventional)
            throw ConfigError("conventional rewards require external models and are not "
                              "available in this build");
        if (!enabled(pi) && !enabled(sem) && !enabled(spa) && !enabled(ri) && !enabled(hps))
            throw ConfigError("at least one reward component must be enabled");
    }
};

// -------- oracle components --------

namespace detail {

// Multiset containment: fraction of wanted (category, attribute) pairs that
// can be matched against distinct objects in `have`.
inline double present_fraction(const std::vector<EntitySpec>& wanted,
                               const std::vector<ObjectInstance>& have) {
    std::vector<bool> used(have.size(), false);
    int found = 0;
    for (const auto& w : wanted) {
        for (size_t j = 0; j < have.size(); ++j) {
            if (!used[j] && have[j].entity == w) {
                used[j] = true;
                ++found;
                break;
            }
        }
    }
    return wanted.empty() ? 1.0 : static_cast<double>(found) / wanted.size();
}

inline double relations_satisfied_fraction(const PromptSpec& prompt,
                                           const std::vector<Box>& boxes) {
    if (prompt.relations.empty()) return 1.0;  // vacuous
    int ok = 0;
    for (const auto& r : prompt.relations)
        if (relation_satisfied(r.kind, boxes[r.subject], boxes[r.object])) ++ok;
    return static_cast<double>(ok) / prompt.relations.size();
}

inline std::vector<Box> planned_boxes(const ReasoningChain& chain) {
    std::vector<Box> out;
    out.reserve(chain.planned.size());
    for (const auto& o : chain.planned) out.push_back(o.box);
    return out;
}

inline std::vector<Box> placed_boxes(const Scene& scene) {
    std::vector<Box> out;
    out.reserve(scene.placed.size());
    for (const auto& o : scene.placed) out.push_back(o.box);
    return out;
}

}  // namespace detail

// Four-dimension rubric (completeness, faithfulness, consistency, clarity),
// each in [0,1], averaged — the 0-10 judge rubric divided by 10.
inline double reward_sem(const PromptSpec& prompt, const ReasoningChain& chain) {
    const double completeness = detail::present_fraction(prompt.entities, chain.planned);

    const size_t n = std::min(chain.planned.size(), prompt.entities.size());
    int contradictions = 0;
    for (size_t k = 0; k < n; ++k)
        if (chain.planned[k].entity.attribute != prompt.entities[k].attribute)
            ++contradictions;
    const double faithfulness =
        chain.planned.empty()
            ? 0.0
            : 1.0 - static_cast<double>(contradictions) / chain.planned.size();

    int valid_boxes = 0;
    for (const auto& o : chain.planned)
        if (o.box.valid()) ++valid_boxes;
    const double consistency =
        chain.planned.empty() ? 0.0
                              : static_cast<double>(valid_boxes) / chain.planned.size();

    const double clarity = 1.0;  // structured chains are always well-formed
    return (completeness + faithfulness + consistency + clarity) / 4.0;
}

// Fraction of prompt relations the planned boxes satisfy. Rendered mode goes
// through the rasterizer and box recovery; for the oracle the two routes
// agree, but rendered mode exercises the full canvas path.
inline double reward_spa(const PromptSpec& prompt, const ReasoningChain& chain,
                         SpaEval eval = SpaEval::text, const RenderConfig& render = {}) {
    if (prompt.relations.empty()) return 1.0;
    std::vector<Box> boxes;
    if (eval == SpaEval::text) {
        boxes = detail::planned_boxes(chain);
    } else {
        thread_local Canvas canvas;
        render_layout_into(chain, render, canvas);
        std::vector<EntitySpec> entities;
        entities.reserve(chain.planned.size());
        for (const auto& o : chain.planned) entities.push_back(o.entity);
        boxes = recover_planned_boxes(canvas, entities, render);
    }
    return detail::relations_satisfied_fraction(prompt, boxes);
}

inline double reward_ri(const ReasoningChain& chain, const Scene& scene) {
    return ground_objects(chain, scene).mean_iou;
}

// Deterministic stand-in for the 0-10 prompt-image rubric: 10 when all
// entities and relations are right, 5+2s for right entities with partial
// relations, floor(4p) otherwise.
inline double reward_pi(const PromptSpec& prompt, const Scene& scene) {
    const double p = detail::present_fraction(prompt.entities, scene.placed);
    const double s =
        detail::relations_satisfied_fraction(prompt, detail::placed_boxes(scene));
    double score10;
    if (p == 1.0 && s == 1.0) {
        score10 = 10.0;
    } else if (p == 1.0) {
        score10 = std::clamp(5.0 + 2.0 * s, 5.0, 7.0);
    } else {
        score10 = std::clamp(std::floor(4.0 * p), 0.0, 4.0);
    }
    return score10 / 10.0;
}

// Quality proxy: 1 - (sum of pairwise intersection areas / sum of box
// areas), clamped to [0,1]. Penalizes stacking everything in one spot.
inline double reward_hps_proxy(const Scene& scene) {
    double overlap = 0, total_area = 0;
    const auto& objs = scene.placed;
    for (size_t i = 0; i < objs.size(); ++i) {
        total_area += objs[i].box.area();
        for (size_t j = i + 1; j < objs.size(); ++j) {
            const Box& a = objs[i].box;
            const Box& b = objs[j].box;
            const double iw = std::min(a.x2, b.x2) - std::max(a.x1, b.x1);
            const double ih = std::min(a.y2, b.y2) - std::max(a.y1, b.y1);
            if (iw > 0 && ih > 0) overlap += iw * ih;
        }
    }
    if (total_area <= 0) return 1.0;
    const double penalty = std::clamp(overlap / total_area, 0.0, 1.0);
    return 1.0 - penalty;
}

// -------- composition --------

// Product mode follows the total-reward identity: r_pi * r_pr * r_ri * r_hps
// with r_pr = (r_sem + r_spa)/2 formed first. Disabled components drop out
// (neutral 1 for the product, excluded from the sum-mode mean).
inline double compose(const RewardVector& r, const RewardConfig& config) {
    config.validate();
    auto check = [](double v, const char* name) {
        if (!(v >= 0.0 && v <= 1.0))
            throw ArgumentError(std::string("reward component out of [0,1]: ") + name);
        return v;
    };

    std::vector<double> pr_parts;
    if (config.enabled(config.sem)) pr_parts.push_back(check(r.sem, "r_sem"));
    if (config.enabled(config.spa)) pr_parts.push_back(check(r.spa, "r_spa"));

    std::vector<double> factors;
    if (config.enabled(config.pi)) factors.push_back(check(r.pi, "r_pi"));
    if (!pr_parts.empty()) {
        double pr = 0;
        for (double v : pr_parts) pr += v;
        factors.push_back(pr / pr_parts.size());
    }
    if (config.enabled(config.ri)) factors.push_back(check(r.ri, "r_ri"));
    if (config.enabled(config.hps)) factors.push_back(check(r.hps, "r_hps"));

    if (config.composition == Composition::product) {
        double total = 1.0;
        for (double v : factors) total *= v;
        return total;
    }
    double total = 0;
    for (double v : factors) total += v;
    return total / factors.size();
}

// External-judge scorers, wired in by the harness when judge mode is on.
struct ExternalJudgeHooks {
    std::function<double(const PromptSpec&, const ReasoningChain&)> sem;
    std::function<double(const PromptSpec&, const ReasoningChain&, const RenderConfig&)> spa;
    std::function<double(const PromptSpec&, const Scene&)> pi;
    std::function<double(const ReasoningChain&, const Scene&)> ri;
};

// Full reward vector for one trajectory. Disabled components record the
// neutral 1; judge-mode components defer to the hooks.
inline RewardVector score_trajectory(const PromptSpec& prompt, const Trajectory& traj,
                                     const RewardConfig& config,
                                     const ExternalJudgeHooks* hooks = nullptr) {
    config.validate();
    auto need_hook = [&](const char* which) -> const ExternalJudgeHooks& {
        if (!hooks)
            throw ConfigError(std::string("judge mode requires judge hooks for ") + which);
        return *hooks;
    };

    RewardVector r;
    r.sem = config.sem == RewardMode::disabled ? 1.0
            : config.sem == RewardMode::oracle
                ? reward_sem(prompt, traj.chain)
                : need_hook("r_sem").sem(prompt, traj.chain);
    r.spa = config.spa == RewardMode::disabled ? 1.0
            : config.spa == RewardMode::oracle
                ? reward_spa(prompt, traj.chain, config.spa_eval, config.render)
                : need_hook("r_spa").spa(prompt, traj.chain, config.render);
    r.ri = config.ri == RewardMode::disabled ? 1.0
           : config.ri == RewardMode::oracle
               ? reward_ri(traj.chain, traj.scene)
               : need_hook("r_ri").ri(traj.chain, traj.scene);
    r.pi = config.pi == RewardMode::disabled ? 1.0
           : config.pi == RewardMode::oracle
               ? reward_pi(prompt, traj.scene)
               : need_hook("r_pi").pi(prompt, traj.scene);
    if (config.hps == RewardMode::external_judge)
        throw ConfigError("r_hps has no external judge; use oracle or disabled");
    r.hps = config.hps == RewardMode::disabled ? 1.0 : reward_hps_proxy(traj.scene);
    r.total = compose(r, config);
    return r;
}

// -------- config JSON --------

inline void to_json(json& j, const RewardConfig& c) {
    j = json{{"pi", reward_mode_name(c.pi)},
             {"sem", reward_mode_name(c.sem)},
             {"spa", reward_mode_name(c.spa)},
             {"ri", reward_mode_name(c.ri)},
             {"hps", reward_mode_name(c.hps)},
             {"composition", c.composition == Composition::product ? "product" : "sum"},
             {"spa_eval", c.spa_eval == SpaEval::rendered ? "rendered" : "text"},
             {"conventional", c.conventional},
             {"render_scale", c.render.scale}};
}

inline void from_json(const json& j, RewardConfig& c) {
    c.pi = reward_mode_from_name(j.value("pi", "oracle"));
    c.sem = reward_mode_from_name(j.value("sem", "oracle"));
    c.spa = reward_mode_from_name(j.value("spa", "oracle"));
    c.ri = reward_mode_from_name(j.value("ri", "oracle"));
    c.hps = reward_mode_from_name(j.value("hps", "oracle"));
    const std::string comp = j.value("composition", "product");
    if (comp == "product") c.composition = Composition::product;
    else if (comp == "sum") c.composition = Composition::sum;
    else throw ConfigError("unknown composition: " + comp);
    const std::string spa_eval = j.value("spa_eval", "rendered");
    if (spa_eval == "rendered") c.spa_eval = SpaEval::rendered;
    else if (spa_eval == "text") c.spa_eval = SpaEval::text;
    else throw ConfigError("unknown spa_eval: " + spa_eval);
    c.conventional = j.value("conventional", false);
    c.render.scale = j.value("render_scale", 4);
}

}  // namespace planrl
