// Group-relative policy optimization: in-group advantage normalization,
// clipped surrogate with exact-KL penalty, and the ascent update rule.
#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "planrl/core.hpp"
#include "planrl/policy.hpp"

namespace planrl {

enum class LrScheduleKind : int { constant = 0, cosine = 1 };

inline const char* lr_schedule_name(LrScheduleKind k) {
    return k == LrScheduleKind::constant ? "constant" : "cosine";
}

inline LrScheduleKind lr_schedule_from_name(const std::string& s) {
    if (s == "constant") return LrScheduleKind::constant;
    if (s == "cosine") return LrScheduleKind::cosine;
    throw ConfigError("unknown lr schedule: " + s);
}

struct GrpoConfig {
    int group_size = 16;
    double clip_epsilon = 0.2;
    double kl_beta = 0.04;
    // Tuned for the tabular policy; the value reported for 7B-scale training
    // (1e-5) stalls these tables and is kept as the "paper" profile in the
    // sample configs.
    double learning_rate = 0.5;
    LrScheduleKind schedule = LrScheduleKind::cosine;
    double std_floor = 1e-8;
    bool sample_std = false;        // Bessel-corrected std instead of population
    bool token_level_ratio = false; // per-step ratios instead of one per sequence
    int inner_epochs = 1;

    void validate() const {
        if (group_size < 2) throw ConfigError("group_size must be >= 2");
        if (clip_epsilon <= 0 || clip_epsilon >= 1)
            throw ConfigError("clip_epsilon must lie in (0,1)");
        if (kl_beta < 0) throw ConfigError("kl_beta must be >= 0");
        if (inner_epochs < 1) throw ConfigError("inner_epochs must be >= 1");
    }
};

struct GroupBatch {
    PromptSpec prompt;
    std::vector<Trajectory> trajectories;
    std::vector<RewardVector> rewards;
    std::vector<double> advantages;
};

// A_i = (r_i - mean) / std over the group, population std by default.
// Below std_floor the group is degenerate and all advantages are zero.
inline std::vector<double> compute_advantages(const std::vector<double>& rewards,
                                              double std_floor = 1e-8,
                                              bool sample_std = false) {
    const size_t n = rewards.size();
    if (n < 2) throw ArgumentError("advantage groups need at least 2 rewards");
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= sample_std ? n - 1 : n;
    const double std = std::sqrt(var);
    std::vector<double> adv(n, 0.0);
    if (std < std_floor) return adv;
    for (size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / std;
    return adv;
}

// exp(log pi_theta(o) - log pi_old(o)), sequence level.
inline double sequence_ratio(const Trajectory& traj) {
    return std::exp(traj.sum_logp_cur() - traj.sum_logp_old());
}

inline double clipped_term(double ratio, double advantage, double epsilon) {
    const double clipped = std::clamp(ratio, 1.0 - epsilon, 1.0 + epsilon);
    return std::min(ratio * advantage, clipped * advantage);
}

namespace detail {

inline double log_sum_exp(const std::vector<double>& logits) {
    double mx = -std::numeric_limits<double>::infinity();
    for (double v : logits) mx = std::max(mx, v);
    double z = 0;
    for (double v : logits) z += std::exp(v - mx);
    return mx + std::log(z);
}

}  // namespace detail

// Exact KL(softmax(p_logits) || softmax(q_logits)).
inline double kl_categorical(const std::vector<double>& p_logits,
                             const std::vector<double>& q_logits) {
    const double lse_p = detail::log_sum_exp(p_logits);
    const double lse_q = detail::log_sum_exp(q_logits);
    double kl = 0;
    for (size_t i = 0; i < p_logits.size(); ++i) {
        const double lp = p_logits[i] - lse_p;
        const double lq = q_logits[i] - lse_q;
        kl += std::exp(lp) * (lp - lq);
    }
    return kl;
}

// Sum of exact categorical KLs over the trajectory's visited decision
// contexts (one per step, repeats counted).
inline double exact_kl(const PolicyTables& params_current, const PolicyTables& params_ref,
                       const Trajectory& traj) {
    double total = 0;
    const int n = static_cast<int>(traj.prompt.entities.size());
    for (int k = 0; k < n; ++k) {
        const int plan_a = traj.steps[3 * k + 1].action;
        for (int s = 0; s < kStepsPerEntity; ++s) {
            const StepKind kind = static_cast<StepKind>(s);
            const int row_arg = kind == StepKind::render ? plan_a : -1;
            total += kl_categorical(step_logits(params_current, traj.prompt, k, kind, row_arg),
                                    step_logits(params_ref, traj.prompt, k, kind, row_arg));
        }
    }
    return total;
}

struct GrpoStepResult {
    double objective = 0;
    PolicyTables gradient;
    double mean_kl = 0;
    double clip_fraction = 0;
};

namespace detail {

// d KL(p||q) / d p_logits_j = p_j * ((log p_j - log q_j) - KL)
inline void accumulate_kl_grad_rows(const PolicyTables& cur, const PolicyTables& ref,
                                    const Trajectory& traj, double scale,
                                    PolicyTables& grad) {
    const int n = static_cast<int>(traj.prompt.entities.size());
    for (int k = 0; k < n; ++k) {
        const int plan_a = traj.steps[3 * k + 1].action;
        for (int s = 0; s < kStepsPerEntity; ++s) {
            const StepKind kind = static_cast<StepKind>(s);
            const int row_arg = kind == StepKind::render ? plan_a : -1;
            const auto pl = step_logits(cur, traj.prompt, k, kind, row_arg);
            const auto ql = step_logits(ref, traj.prompt, k, kind, row_arg);
            const double lse_p = log_sum_exp(pl);
            const double lse_q = log_sum_exp(ql);
            std::vector<double> diff(pl.size()), p(pl.size());
            double kl = 0;
            for (size_t j = 0; j < pl.size(); ++j) {
                const double lp = pl[j] - lse_p;
                diff[j] = lp - (ql[j] - lse_q);
                p[j] = std::exp(lp);
                kl += p[j] * diff[j];
            }
            auto add_row = [&](auto& row) {
                for (size_t j = 0; j < p.size(); ++j)
                    row[j] += scale * p[j] * (diff[j] - kl);
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

}  // namespace detail

// J = (1/G) sum_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i) - beta (1/G) sum_i KL_i,
// with the gradient of the ascent direction. Current log-probs are
// recomputed from params_current; old log-probs come from the stored steps.
// The clipped branch carries zero gradient; ties go to the unclipped branch.
inline GrpoStepResult grpo_objective_and_gradient(const GroupBatch& batch,
                                                  const GrpoConfig& config,
                                                  const PolicyTables& params_current,
                                                  const PolicyTables& params_ref) {
    config.validate();
    const size_t g = batch.trajectories.size();
    if (g < 2 || batch.rewards.size() != g || batch.advantages.size() != g)
        throw ConfigError("group batch arrays must agree and hold >= 2 trajectories");

    GrpoStepResult out;
    const double inv_g = 1.0 / static_cast<double>(g);
    int clipped_count = 0;

    for (size_t i = 0; i < g; ++i) {
        const Trajectory& traj = batch.trajectories[i];
        const double adv = batch.advantages[i];

        if (!config.token_level_ratio) {
            const double logp_cur = log_prob(params_current, traj);
            const double ratio = std::exp(logp_cur - traj.sum_logp_old());
            const double unclipped = ratio * adv;
            const double clipped =
                std::clamp(ratio, 1.0 - config.clip_epsilon, 1.0 + config.clip_epsilon) *
                adv;
            out.objective += inv_g * std::min(unclipped, clipped);
            if (unclipped <= clipped) {
                accumulate_grad_log_prob(params_current, traj, out.gradient,
                                         inv_g * ratio * adv);
            } else {
                ++clipped_count;
            }
        } else {
            // Per-step ratios, averaged within the trajectory.
            const int steps = static_cast<int>(traj.steps.size());
            const double inv_steps = 1.0 / steps;
            bool any_clipped = false;
            const int n = static_cast<int>(traj.prompt.entities.size());
            for (int k = 0; k < n; ++k) {
                const int plan_a = traj.steps[3 * k + 1].action;
                for (int s = 0; s < kStepsPerEntity; ++s) {
                    const StepKind kind = static_cast<StepKind>(s);
                    const int row_arg = kind == StepKind::render ? plan_a : -1;
                    const auto logits =
                        step_logits(params_current, traj.prompt, k, kind, row_arg);
                    const int action = traj.steps[3 * k + s].action;
                    const double lc = log_softmax_at(logits, action);
                    const double ratio = std::exp(lc - traj.steps[3 * k + s].logp_old);
                    const double unclipped = ratio * adv;
                    const double clipped = std::clamp(ratio, 1.0 - config.clip_epsilon,
                                                      1.0 + config.clip_epsilon) *
                                           adv;
                    out.objective += inv_g * inv_steps * std::min(unclipped, clipped);
                    if (unclipped <= clipped) {
                        const double scale = inv_g * inv_steps * ratio * adv;
                        const auto p = softmax(logits);
                        auto add_row = [&](auto& row) {
                            for (size_t j = 0; j < p.size(); ++j) row[j] -= scale * p[j];
                            row[action] += scale;
                        };
                        switch (kind) {
                            case StepKind::attribute:
                                add_row(out.gradient.attr[traj.prompt.entities[k].category]);
                                break;
                            case StepKind::plan:
                                add_row(out.gradient.plan[plan_context(traj.prompt, k)]);
                                break;
                            case StepKind::render:
                                add_row(out.gradient.rend[plan_a]);
                                break;
                        }
                    } else {
                        any_clipped = true;
                    }
                }
            }
            if (any_clipped) ++clipped_count;
        }

        if (config.kl_beta > 0) {
            const double kl = exact_kl(params_current, params_ref, traj);
            out.objective -= config.kl_beta * inv_g * kl;
            out.mean_kl += inv_g * kl;
            detail::accumulate_kl_grad_rows(params_current, params_ref, traj,
                                            -config.kl_beta * inv_g, out.gradient);
        } else {
            out.mean_kl += inv_g * exact_kl(params_current, params_ref, traj);
        }
    }
    out.clip_fraction = static_cast<double>(clipped_count) * inv_g;
    return out;
}

struct LrSchedule {
    LrScheduleKind kind = LrScheduleKind::constant;
    double base_lr = 0.05;
    int total_steps = 1;

    // Cosine half period over total_steps: at(0)=base, at(total)=0.
    double at(int step) const {
        if (kind == LrScheduleKind::constant) return base_lr;
        const double frac = static_cast<double>(step) / total_steps;
        return base_lr * 0.5 * (1.0 + std::cos(M_PI * frac));
    }
};

// theta <- theta + lr * grad (gradient ascent on J).
inline void apply_update(PolicyTables& params, const PolicyTables& gradient, double lr) {
    params.add_scaled(gradient, lr);
    if (!params.finite())
        throw Error("non-finite parameters after update (lr=" + std::to_string(lr) + ")");
}

inline void apply_update(PolicyTables& params, const PolicyTables& gradient,
                         const LrSchedule& schedule, int step) {
    apply_update(params, gradient, schedule.at(step));
}

}  // namespace planrl
