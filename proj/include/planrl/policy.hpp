// Tabular log-linear policy over trajectories: exact categorical
// distributions per decision step, seeded sampling, exact log-probs and
// analytic gradients of log pi.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "planrl/core.hpp"

namespace planrl {

// Relation context for the plan step: 0 when the entity appears in no
// relation, otherwise 1 + role*4 + kind where role is subject(0)/object(1)
// of the entity's first relation.
inline constexpr int kNumPlanContexts = 9;

inline int plan_context(const PromptSpec& prompt, int entity_index) {
    for (const auto& r : prompt.relations) {
        if (r.subject == entity_index)
            return 1 + 0 * kNumRelationKinds + static_cast<int>(r.kind);
        if (r.object == entity_index)
            return 1 + 1 * kNumRelationKinds + static_cast<int>(r.kind);
    }
    return 0;
}

// The three dense parameter tables. Also reused as the gradient container.
struct PolicyTables {
    std::array<std::array<double, kNumAttributes>, kNumCategories> attr{};
    std::array<std::array<double, kNumAnchors>, kNumPlanContexts> plan{};
    std::array<std::array<double, kNumAnchors>, kNumAnchors> rend{};

    void fill(double v) {
        for (auto& row : attr) row.fill(v);
        for (auto& row : plan) row.fill(v);
        for (auto& row : rend) row.fill(v);
    }

    bool finite() const {
        for (const auto& row : attr)
            for (double v : row)
                if (!std::isfinite(v)) return false;
        for (const auto& row : plan)
            for (double v : row)
                if (!std::isfinite(v)) return false;
        for (const auto& row : rend)
            for (double v : row)
                if (!std::isfinite(v)) return false;
        return true;
    }

    PolicyTables& add_scaled(const PolicyTables& g, double scale) {
        for (int r = 0; r < kNumCategories; ++r)
            for (int c = 0; c < kNumAttributes; ++c) attr[r][c] += scale * g.attr[r][c];
        for (int r = 0; r < kNumPlanContexts; ++r)
            for (int c = 0; c < kNumAnchors; ++c) plan[r][c] += scale * g.plan[r][c];
        for (int r = 0; r < kNumAnchors; ++r)
            for (int c = 0; c < kNumAnchors; ++c) rend[r][c] += scale * g.rend[r][c];
        return *this;
    }

    friend bool operator==(const PolicyTables&, const PolicyTables&) = default;
};

struct SamplerConfig {
    double text_temperature = 1.0;   // attribute and plan steps
    double image_temperature = 1.0;  // render steps
    uint64_t rng_seed = 0;

    void validate() const {
        if (text_temperature <= 0 || image_temperature <= 0)
            throw ConfigError("temperatures must be strictly positive");
    }
};

// Deterministic RNG stream. Draws are reduced to uniform doubles in [0,1)
// through a fixed bit recipe so sampling is identical across platforms.
class Rng {
  public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    double next_uniform() { return (gen_() >> 11) * 0x1.0p-53; }

    uint64_t next_u64() { return gen_(); }

    std::string state() const {
        std::ostringstream os;
        os << gen_;
        return os.str();
    }

    void restore(const std::string& s) {
        std::istringstream is(s);
        is >> gen_;
        if (is.fail()) throw ParseError("bad rng state string");
    }

  private:
    std::mt19937_64 gen_;
};

// -------- categorical helpers --------

inline std::vector<double> softmax(const std::vector<double>& logits,
                                   double temperature = 1.0) {
    std::vector<double> p(logits.size());
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v / temperature);
    double z = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp(logits[i] / temperature - mx);
        z += p[i];
    }
    for (double& v : p) v /= z;
    return p;
}

inline double log_softmax_at(const std::vector<double>& logits, int action,
                             double temperature = 1.0) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v / temperature);
    double z = 0;
    for (double v : logits) z += std::exp(v / temperature - mx);
    return logits[action] / temperature - mx - std::log(z);
}

inline int sample_categorical(const std::vector<double>& probs, Rng& rng) {
    const double u = rng.next_uniform();
    double acc = 0;
    for (size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(probs.size()) - 1;
}

inline int argmax_index(const std::vector<double>& v) {
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

// -------- per-step distributions --------

// Logit row for a decision step. For render steps planned_anchor selects the
// row of the render table.
inline std::vector<double> step_logits(const PolicyTables& params,
                                       const PromptSpec& prompt, int entity_index,
                                       StepKind kind, int planned_anchor = -1) {
    switch (kind) {
        case StepKind::attribute: {
            const auto& row = params.attr[prompt.entities[entity_index].category];
            return {row.begin(), row.end()};
        }
        case StepKind::plan: {
            const auto& row = params.plan[plan_context(prompt, entity_index)];
            return {row.begin(), row.end()};
        }
        case StepKind::render: {
            if (planned_anchor < 0 || planned_anchor >= kNumAnchors)
                throw ArgumentError("render step requires a planned anchor");
            const auto& row = params.rend[planned_anchor];
            return {row.begin(), row.end()};
        }
    }
    throw ArgumentError("invalid step kind");
}

inline int distribution_id_for(const PromptSpec& prompt, int entity_index, StepKind kind,
                               int planned_anchor) {
    switch (kind) {
        case StepKind::attribute: return prompt.entities[entity_index].category;
        case StepKind::plan: return plan_context(prompt, entity_index);
        case StepKind::render: return planned_anchor;
    }
    throw ArgumentError("invalid step kind");
}

inline double step_temperature(StepKind kind, const SamplerConfig& cfg) {
    return kind == StepKind::render ? cfg.image_temperature : cfg.text_temperature;
}

// -------- whole-trajectory quantities --------

// Sum over steps of log softmax(logits/T)[action]. With the default config
// (both temperatures 1) this is log pi(o|q) of the untempered policy.
inline double log_prob(const PolicyTables& params, const Trajectory& traj,
                       const SamplerConfig& temps = {}) {
    temps.validate();
    double total = 0;
    const int n = static_cast<int>(traj.prompt.entities.size());
    for (int k = 0; k < n; ++k) {
        const int plan_a = traj.steps[3 * k + 1].action;
        for (int s = 0; s < kStepsPerEntity; ++s) {
            const StepKind kind = static_cast<StepKind>(s);
            const auto logits = step_logits(params, traj.prompt, k, kind,
                                            kind == StepKind::render ? plan_a : -1);
            total += log_softmax_at(logits, traj.steps[3 * k + s].action,
                                    step_temperature(kind, temps));
        }
    }
    return total;
}

// Draws one trajectory from params_old at the configured temperatures and
// records log-probs under all three policies (old at sampling temperature,
// current and reference at temperature 1).
inline Trajectory sample_trajectory(const PolicyTables& params_old,
                                    const PolicyTables& params_ref,
                                    const PolicyTables& params_current,
                                    const PromptSpec& prompt, const SamplerConfig& cfg,
                                    Rng& rng) {
    cfg.validate();
    Trajectory traj;
    traj.prompt = prompt;
    const int n = static_cast<int>(prompt.entities.size());
    int planned_anchor = -1;
    for (int k = 0; k < n; ++k) {
        for (int s = 0; s < kStepsPerEntity; ++s) {
            const StepKind kind = static_cast<StepKind>(s);
            const int row_arg = kind == StepKind::render ? planned_anchor : -1;
            const auto logits_old = step_logits(params_old, prompt, k, kind, row_arg);
            const double temp = step_temperature(kind, cfg);
            const int action = sample_categorical(softmax(logits_old, temp), rng);

            DecisionStep step;
            step.distribution_id = distribution_id_for(prompt, k, kind, row_arg);
            step.action = action;
            step.logp_old = log_softmax_at(logits_old, action, temp);
            step.logp_cur = log_softmax_at(
                step_logits(params_current, prompt, k, kind, row_arg), action);
            step.logp_ref = log_softmax_at(
                step_logits(params_ref, prompt, k, kind, row_arg), action);
            traj.steps.push_back(step);

            if (kind == StepKind::plan) planned_anchor = action;
        }
    }
    auto decoded = decode_trajectory(traj.steps, prompt);
    traj.chain = std::move(decoded.first);
    traj.scene = std::move(decoded.second);
    return traj;
}

inline Trajectory sample_trajectory(const PolicyTables& params_old,
                                    const PolicyTables& params_ref,
                                    const PolicyTables& params_current,
                                    const PromptSpec& prompt, const SamplerConfig& cfg) {
    Rng rng(cfg.rng_seed);
    return sample_trajectory(params_old, params_ref, params_current, prompt, cfg, rng);
}

// Argmax decode at temperature 1; ties break toward the lowest index.
inline Trajectory greedy_trajectory(const PolicyTables& params, const PromptSpec& prompt) {
    Trajectory traj;
    traj.prompt = prompt;
    const int n = static_cast<int>(prompt.entities.size());
    int planned_anchor = -1;
    for (int k = 0; k < n; ++k) {
        for (int s = 0; s < kStepsPerEntity; ++s) {
            const StepKind kind = static_cast<StepKind>(s);
            const int row_arg = kind == StepKind::render ? planned_anchor : -1;
            const auto logits = step_logits(params, prompt, k, kind, row_arg);
            const int action = argmax_index(logits);

            DecisionStep step;
            step.distribution_id = distribution_id_for(prompt, k, kind, row_arg);
            step.action = action;
            step.logp_old = log_softmax_at(logits, action);
            step.logp_cur = step.logp_old;
            step.logp_ref = step.logp_old;
            traj.steps.push_back(step);

            if (kind == StepKind::plan) planned_anchor = action;
        }
    }
    auto decoded = decode_trajectory(traj.steps, prompt);
    traj.chain = std::move(decoded.first);
    traj.scene = std::move(decoded.second);
    return traj;
}

// Gradient of log pi(trajectory) at temperature 1: per visited row,
// one-hot(action) - softmax(row). Untouched rows stay zero.
inline void accumulate_grad_log_prob(const PolicyTables& params, const Trajectory& traj,
                                     PolicyTables& grad, double scale = 1.0) {
    const int n = static_cast<int>(traj.prompt.entities.size());
    for (int k = 0; k < n; ++k) {
        const int plan_a = traj.steps[3 * k + 1].action;
        for (int s = 0; s < kStepsPerEntity; ++s) {
            const StepKind kind = static_cast<StepKind>(s);
            const int row_arg = kind == StepKind::render ? plan_a : -1;
            const auto logits = step_logits(params, traj.prompt, k, kind, row_arg);
            const auto p = softmax(logits);
            const int action = traj.steps[3 * k + s].action;

            auto add_row = [&](auto& row) {
                for (size_t j = 0; j < p.size(); ++j) row[j] -= scale * p[j];
                row[action] += scale;
            };
            switch (kind) {
                case StepKind::attribute:
                    add_row(grad.attr[traj.prompt.entities[k].category]);
                    break;
                case StepKind::plan:
                    add_row(grad.plan[plan_context(traj.prompt, k)]);
                    break;
                case StepKind::render:
                    add_row(grad.rend[plan_a]);
                    break;
            }
        }
    }
}

inline PolicyTables grad_log_prob(const PolicyTables& params, const Trajectory& traj) {
    PolicyTables grad;
    accumulate_grad_log_prob(params, traj, grad);
    return grad;
}

// -------- parameter JSON --------

inline void to_json(json& j, const PolicyTables& t) {
    j = json{{"theta_attr", t.attr}, {"theta_plan", t.plan}, {"theta_rend", t.rend}};
}

inline void from_json(const json& j, PolicyTables& t) {
    j.at("theta_attr").get_to(t.attr);
    j.at("theta_plan").get_to(t.plan);
    j.at("theta_rend").get_to(t.rend);
}

}  // namespace planrl
