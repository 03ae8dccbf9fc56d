// Orchestration: synthetic task generation, the SFT and GRPO training
// stages, evaluation, ablation presets, checkpoints and run logs.
#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "planrl/core.hpp"
#include "planrl/grpo.hpp"
#include "planrl/policy.hpp"
#include "planrl/rewards.hpp"

namespace planrl {

enum class Stage : int { sft = 0, grpo = 1 };

struct TaskCounts {
    int color_binding = 0;  // 2 entities, distinct attributes, no relation
    int spatial = 0;        // 2 entities, 1 relation
    int complex_scenes = 0; // 3 entities, 2 relations
};

struct RunConfig {
    TaskCounts tasks{8, 8, 4};
    Stage stage = Stage::grpo;
    GrpoConfig grpo;
    RewardConfig rewards;
    SamplerConfig sampler;
    int batch_size = 8;
    int total_steps = 1000;
    int checkpoint_every = 100;
    int eval_every = 0;  // 0 disables in-run eval snapshots
    bool log_reward_breakdown = false;  // per-trajectory reward records
    int sft_steps = 200;
    double sft_lr = 0.1;
    std::string checkpoint_path;
    std::string log_path;
    uint64_t seed = 0;

    void validate() const {
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (total_steps < 1) throw ConfigError("total_steps must be >= 1");
        grpo.validate();
        rewards.validate();
        sampler.validate();
    }
};

// ----------------------------- run log -----------------------------

// Append-only JSONL, flushed per record. Training steps must be strictly
// increasing.
class RunLog {
  public:
    RunLog() = default;
    explicit RunLog(const std::string& path, bool append = false) { open(path, append); }

    void open(const std::string& path, bool append = false) {
        if (path.empty()) return;
        out_.open(path, append ? std::ios::app : std::ios::trunc);
        if (!out_) throw ConfigError("cannot open run log: " + path);
    }

    bool enabled() const { return out_.is_open(); }

    void append(const ordered_json& record) {
        if (!out_.is_open()) return;
        if (record.value("type", "train") == "train" && record.contains("step")) {
            const int step = record["step"].get<int>();
            if (step <= last_train_step_)
                throw Error("run log steps must be strictly increasing");
            last_train_step_ = step;
        }
        out_ << record.dump() << "\n";
        out_.flush();
    }

    void set_last_step(int step) { last_train_step_ = step; }

  private:
    std::ofstream out_;
    int last_train_step_ = 0;
};

// ----------------------------- checkpoints -----------------------------

struct Checkpoint {
    int version = 1;
    int step = 0;
    PolicyTables params;
    PolicyTables reference;
    std::string rng_state;
    std::vector<int> task_order;
    int task_cursor = 0;
};

inline void to_json(json& j, const Checkpoint& c) {
    j = json{{"version", c.version},       {"step", c.step},
             {"rng_state", c.rng_state},   {"task_order", c.task_order},
             {"task_cursor", c.task_cursor}, {"params", c.params},
             {"reference", c.reference}};
}

inline void from_json(const json& j, Checkpoint& c) {
    j.at("version").get_to(c.version);
    if (c.version != 1)
        throw ConfigError("unsupported checkpoint version " + std::to_string(c.version));
    j.at("step").get_to(c.step);
    j.at("rng_state").get_to(c.rng_state);
    j.at("task_order").get_to(c.task_order);
    j.at("task_cursor").get_to(c.task_cursor);
    j.at("params").get_to(c.params);
    j.at("reference").get_to(c.reference);
}

// Write-then-rename so a crash never leaves a torn checkpoint.
inline void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw ConfigError("cannot write checkpoint: " + tmp);
        out << json(checkpoint).dump() << "\n";
    }
    std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    json j;
    in >> j;
    return j.get<Checkpoint>();
}

// ----------------------------- task generation -----------------------------

namespace detail {

inline int rand_below(Rng& rng, int n) {
    const int v = static_cast<int>(rng.next_uniform() * n);
    return std::min(v, n - 1);
}

}  // namespace detail

// Deterministic synthetic prompt set; no duplicates within one set. Each
// set fixes one attribute per category (its palette) and every prompt draws
// distinct categories, so a set never binds one category to two colors —
// the attribute table is conditioned on the category alone, and a
// conflicting set would make attribute binding unlearnable by construction.
inline std::vector<PromptSpec> generate_tasks(const TaskCounts& counts, uint64_t seed) {
    if (counts.color_binding < 0 || counts.spatial < 0 || counts.complex_scenes < 0)
        throw ArgumentError("task counts must be >= 0");
    Rng rng(seed);
    std::vector<PromptSpec> out;
    std::set<std::string> seen;

    std::array<int, kNumCategories> palette;
    for (auto& a : palette) a = detail::rand_below(rng, kNumAttributes);
    while (palette[1] == palette[0]) palette[1] = detail::rand_below(rng, kNumAttributes);

    auto draw_entities = [&](int n) {
        std::vector<int> cats;
        while (static_cast<int>(cats.size()) < n) {
            const int c = detail::rand_below(rng, kNumCategories);
            if (std::find(cats.begin(), cats.end(), c) == cats.end()) cats.push_back(c);
        }
        std::vector<EntitySpec> ents;
        for (const int c : cats) ents.push_back({c, palette[c]});
        return ents;
    };

    auto emit = [&](auto make, int count, const char* what) {
        int attempts = 0;
        for (int i = 0; i < count;) {
            if (++attempts > 1000 * (count + 1))
                throw Error(std::string("cannot generate enough distinct ") + what +
                            " prompts");
            PromptSpec p = make();
            if (!seen.insert(p.text).second) continue;
            out.push_back(std::move(p));
            ++i;
        }
    };

    emit(
        [&] {
            auto ents = draw_entities(2);
            while (ents[0].attribute == ents[1].attribute) ents = draw_entities(2);
            return make_prompt(std::move(ents));
        },
        counts.color_binding, "color-binding");

    emit(
        [&] {
            const bool flip = rng.next_uniform() < 0.5;
            RelationSpec rel{flip ? 1 : 0, flip ? 0 : 1,
                             static_cast<RelationKind>(
                                 detail::rand_below(rng, kNumRelationKinds))};
            return make_prompt(draw_entities(2), {rel});
        },
        counts.spatial, "spatial");

    emit(
        [&] {
            // Relations over the chain pairs (0,1) and (1,2): always jointly
            // satisfiable on this anchor grid.
            std::vector<RelationSpec> rels;
            for (const auto& [u, v] : {std::pair{0, 1}, std::pair{1, 2}}) {
                const bool flip = rng.next_uniform() < 0.5;
                rels.push_back({flip ? v : u, flip ? u : v,
                                static_cast<RelationKind>(
                                    detail::rand_below(rng, kNumRelationKinds))});
            }
            return make_prompt(draw_entities(3), std::move(rels));
        },
        counts.complex_scenes, "complex");

    return out;
}

inline std::string task_category(const PromptSpec& prompt) {
    if (prompt.relations.empty()) return "color_binding";
    if (prompt.relations.size() == 1) return "spatial";
    return "complex";
}

// ----------------------------- oracle planner -----------------------------

namespace detail {

inline bool boxes_disjoint(const Box& a, const Box& b) {
    return std::min(a.x2, b.x2) <= std::max(a.x1, b.x1) ||
           std::min(a.y2, b.y2) <= std::max(a.y1, b.y1);
}

}  // namespace detail

// Lexicographically first anchor assignment that satisfies every relation
// with pairwise disjoint boxes; plan and realization coincide. Such gold
// trajectories score r_total = 1 under the oracle rewards.
inline Trajectory plan_oracle(const PromptSpec& prompt) {
    prompt.validate();
    const int n = static_cast<int>(prompt.entities.size());
    std::vector<int> assignment(n, 0);
    while (true) {
        bool ok = true;
        for (int i = 0; i < n && ok; ++i)
            for (int j = i + 1; j < n && ok; ++j)
                ok = detail::boxes_disjoint(anchor_box(assignment[i]),
                                            anchor_box(assignment[j]));
        for (const auto& r : prompt.relations) {
            if (!ok) break;
            ok = relation_satisfied(r.kind, anchor_box(assignment[r.subject]),
                                    anchor_box(assignment[r.object]));
        }
        if (ok) break;
        int pos = n - 1;
        while (pos >= 0 && ++assignment[pos] == kNumAnchors) assignment[pos--] = 0;
        if (pos < 0) throw Error("no satisfying layout exists for prompt: " + prompt.text);
    }

    Trajectory traj;
    traj.prompt = prompt;
    for (int k = 0; k < n; ++k) {
        const int ctx = plan_context(prompt, k);
        traj.steps.push_back({prompt.entities[k].category, prompt.entities[k].attribute,
                              0.0, 0.0, 0.0});
        traj.steps.push_back({ctx, assignment[k], 0.0, 0.0, 0.0});
        traj.steps.push_back({assignment[k], assignment[k], 0.0, 0.0, 0.0});
    }
    auto decoded = decode_trajectory(traj.steps, prompt);
    traj.chain = std::move(decoded.first);
    traj.scene = std::move(decoded.second);
    return traj;
}

struct Demo {
    PromptSpec prompt;
    Trajectory gold;
};

inline std::vector<Demo> make_demo_set(const std::vector<PromptSpec>& tasks) {
    std::vector<Demo> demos;
    demos.reserve(tasks.size());
    for (const auto& t : tasks) demos.push_back({t, plan_oracle(t)});
    return demos;
}

// ----------------------------- SFT stage -----------------------------

// Maximum likelihood on the gold trajectories: full-batch gradient ascent on
// their mean log-prob.
inline PolicyTables sft_train(PolicyTables params, const std::vector<Demo>& demos,
                              int steps, double lr, RunLog* log = nullptr) {
    if (demos.empty()) throw ArgumentError("sft_train needs at least one demo");
    const double inv_n = 1.0 / static_cast<double>(demos.size());
    for (int step = 1; step <= steps; ++step) {
        PolicyTables grad;
        double mean_logp = 0;
        for (const auto& demo : demos) {
            accumulate_grad_log_prob(params, demo.gold, grad, inv_n);
            mean_logp += inv_n * log_prob(params, demo.gold);
        }
        if (!std::isfinite(mean_logp)) throw Error("sft diverged: non-finite NLL");
        apply_update(params, grad, lr);
        if (log)
            log->append(ordered_json{{"type", "train"},
                                     {"stage", "sft"},
                                     {"step", step},
                                     {"lr", lr},
                                     {"mean_nll", -mean_logp}});
    }
    return params;
}

// ----------------------------- evaluation -----------------------------

struct ComponentMeans {
    double pi = 0, sem = 0, spa = 0, ri = 0, hps = 0, pr = 0, total = 0;
    int count = 0;

    void add(const RewardVector& r) {
        pi += r.pi;
        sem += r.sem;
        spa += r.spa;
        ri += r.ri;
        hps += r.hps;
        pr += r.pr();
        total += r.total;
        ++count;
    }

    ComponentMeans finalized() const {
        ComponentMeans m = *this;
        if (count > 0) {
            m.pi /= count;
            m.sem /= count;
            m.spa /= count;
            m.ri /= count;
            m.hps /= count;
            m.pr /= count;
            m.total /= count;
        }
        return m;
    }
};

inline void to_json(json& j, const ComponentMeans& m) {
    j = json{{"r_pi", m.pi},   {"r_sem", m.sem},     {"r_spa", m.spa},
             {"r_ri", m.ri},   {"r_hps", m.hps},     {"r_pr", m.pr},
             {"r_total", m.total}, {"count", m.count}};
}

struct EvalReport {
    std::map<std::string, ComponentMeans> greedy;   // per category plus "overall"
    std::map<std::string, ComponentMeans> sampled;
    int num_samples = 0;
    uint64_t seed = 0;
};

inline void to_json(json& j, const EvalReport& r) {
    j = json{{"greedy", r.greedy},
             {"sampled", r.sampled},
             {"num_samples", r.num_samples},
             {"seed", r.seed}};
}

// Greedy (argmax) and sampled reward means per task category. Deterministic
// given (params, tasks, seed).
inline EvalReport evaluate(const PolicyTables& params, const std::vector<PromptSpec>& tasks,
                           const RewardConfig& reward_config, int num_samples,
                           uint64_t seed, const SamplerConfig& sampler = {},
                           const ExternalJudgeHooks* hooks = nullptr) {
    EvalReport report;
    report.num_samples = num_samples;
    report.seed = seed;
    std::map<std::string, ComponentMeans> greedy_acc, sampled_acc;
    Rng rng(seed);
    for (const auto& prompt : tasks) {
        const std::string cat = task_category(prompt);
        const Trajectory greedy = greedy_trajectory(params, prompt);
        const RewardVector greward = score_trajectory(prompt, greedy, reward_config, hooks);
        greedy_acc[cat].add(greward);
        greedy_acc["overall"].add(greward);
        for (int s = 0; s < num_samples; ++s) {
            const Trajectory traj =
                sample_trajectory(params, params, params, prompt, sampler, rng);
            const RewardVector r = score_trajectory(prompt, traj, reward_config, hooks);
            sampled_acc[cat].add(r);
            sampled_acc["overall"].add(r);
        }
    }
    for (const auto& [k, v] : greedy_acc) report.greedy[k] = v.finalized();
    for (const auto& [k, v] : sampled_acc) report.sampled[k] = v.finalized();
    return report;
}

// ----------------------------- GRPO stage -----------------------------

namespace detail {

inline void shuffle_order(std::vector<int>& order, Rng& rng) {
    for (size_t i = order.size(); i > 1; --i)
        std::swap(order[i - 1], order[rand_below(rng, static_cast<int>(i))]);
}

struct ComponentStats {
    std::vector<double> values;

    void add(double v) { values.push_back(v); }
    double mean() const {
        return values.empty()
                   ? 0
                   : std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    }
    double stddev() const {
        if (values.empty()) return 0;
        const double m = mean();
        double var = 0;
        for (double v : values) var += (v - m) * (v - m);
        return std::sqrt(var / values.size());
    }
};

}  // namespace detail

// One GRPO run. Per step: draw batch_size prompts from the seeded cycle,
// sample a group per prompt from the step-start snapshot, score, normalize
// advantages per group, take one ascent update on the equal-weight group
// average. pi_ref stays frozen at stage start (or at the resumed
// checkpoint's reference). stop_after_step > 0 interrupts the run after
// that step completes, leaving a resumable checkpoint.
inline PolicyTables grpo_train(PolicyTables params, const RunConfig& config,
                               const std::vector<PromptSpec>& tasks,
                               const ExternalJudgeHooks* hooks = nullptr,
                               const std::string& resume_from = "",
                               int stop_after_step = 0) {
    config.validate();
    if (tasks.empty()) throw ArgumentError("grpo_train needs a non-empty task set");

    PolicyTables reference = params;
    Rng rng(config.seed);
    std::vector<int> order(tasks.size());
    std::iota(order.begin(), order.end(), 0);
    size_t cursor = order.size();  // forces a shuffle on first draw
    int start_step = 0;

    if (!resume_from.empty()) {
        const Checkpoint cp = load_checkpoint(resume_from);
        params = cp.params;
        reference = cp.reference;
        rng.restore(cp.rng_state);
        order = cp.task_order;
        cursor = static_cast<size_t>(cp.task_cursor);
        start_step = cp.step;
        if (order.size() != tasks.size())
            throw ConfigError("checkpoint task order does not match the task set");
    }

    RunLog log(config.log_path, /*append=*/!resume_from.empty());
    log.set_last_step(start_step);
    const LrSchedule schedule{config.grpo.schedule, config.grpo.learning_rate,
                              config.total_steps};

    auto write_checkpoint = [&](int completed, const std::string& rng_state,
                                const std::vector<int>& ord, size_t cur,
                                const PolicyTables& p) {
        if (config.checkpoint_path.empty()) return;
        Checkpoint cp;
        cp.step = completed;
        cp.params = p;
        cp.reference = reference;
        cp.rng_state = rng_state;
        cp.task_order = ord;
        cp.task_cursor = static_cast<int>(cur);
        save_checkpoint(config.checkpoint_path, cp);
    };

    const int end_step = stop_after_step > 0 ? std::min(stop_after_step, config.total_steps)
                                             : config.total_steps;
    for (int step = start_step; step < end_step; ++step) {
        // Snapshot of the resumable state at the step boundary.
        const std::string rng_state_at_step = rng.state();
        const std::vector<int> order_at_step = order;
        const size_t cursor_at_step = cursor;

        std::vector<int> batch;
        for (int b = 0; b < config.batch_size; ++b) {
            if (cursor >= order.size()) {
                detail::shuffle_order(order, rng);
                cursor = 0;
            }
            batch.push_back(order[cursor++]);
        }

        const PolicyTables old_params = params;
        std::vector<GroupBatch> groups;
        groups.reserve(batch.size());
        try {
            for (const int idx : batch) {
                GroupBatch group;
                group.prompt = tasks[idx];
                std::vector<double> totals;
                for (int i = 0; i < config.grpo.group_size; ++i) {
                    Trajectory traj = sample_trajectory(old_params, reference, params,
                                                        group.prompt, config.sampler, rng);
                    RewardVector r =
                        score_trajectory(group.prompt, traj, config.rewards, hooks);
                    totals.push_back(r.total);
                    group.trajectories.push_back(std::move(traj));
                    group.rewards.push_back(r);
                }
                group.advantages = compute_advantages(totals, config.grpo.std_floor,
                                                      config.grpo.sample_std);
                groups.push_back(std::move(group));
            }
        } catch (const JudgeUnavailableError&) {
            write_checkpoint(step, rng_state_at_step, order_at_step, cursor_at_step,
                             old_params);
            throw;
        }

        const double lr = schedule.at(step);
        double objective = 0, mean_kl = 0, clip_fraction = 0;
        const double inv_groups = 1.0 / static_cast<double>(groups.size());
        for (int epoch = 0; epoch < config.grpo.inner_epochs; ++epoch) {
            PolicyTables grad;
            objective = mean_kl = clip_fraction = 0;
            for (const auto& group : groups) {
                const GrpoStepResult res =
                    grpo_objective_and_gradient(group, config.grpo, params, reference);
                objective += inv_groups * res.objective;
                mean_kl += inv_groups * res.mean_kl;
                clip_fraction += inv_groups * res.clip_fraction;
                grad.add_scaled(res.gradient, inv_groups);
            }
            apply_update(params, grad, lr);
        }

        detail::ComponentStats pi, sem, spa, ri, hps, pr, total;
        for (const auto& group : groups) {
            for (const auto& r : group.rewards) {
                pi.add(r.pi);
                sem.add(r.sem);
                spa.add(r.spa);
                ri.add(r.ri);
                hps.add(r.hps);
                pr.add(r.pr());
                total.add(r.total);
            }
        }
        ordered_json record{{"type", "train"},
                            {"stage", "grpo"},
                            {"step", step + 1},
                            {"lr", lr},
                            {"objective", objective},
                            {"kl_mean", mean_kl},
                            {"clip_fraction", clip_fraction}};
        auto put = [&](const char* name, const detail::ComponentStats& s) {
            record[std::string(name) + "_mean"] = s.mean();
            record[std::string(name) + "_std"] = s.stddev();
        };
        put("r_pi", pi);
        put("r_sem", sem);
        put("r_spa", spa);
        put("r_ri", ri);
        put("r_hps", hps);
        put("r_pr", pr);
        put("r_total", total);
        log.append(record);

        if (config.log_reward_breakdown) {
            for (size_t g = 0; g < groups.size(); ++g) {
                ordered_json breakdown{{"type", "rewards"},
                                       {"step", step + 1},
                                       {"prompt", groups[g].prompt.text},
                                       {"rewards", json(groups[g].rewards)}};
                log.append(breakdown);
            }
        }

        if (config.eval_every > 0 && (step + 1) % config.eval_every == 0) {
            const EvalReport snapshot =
                evaluate(params, tasks, config.rewards, 0,
                         config.seed ^ static_cast<uint64_t>(step + 1), config.sampler,
                         hooks);
            log.append(ordered_json{{"type", "eval"},
                                    {"step", step + 1},
                                    {"greedy_overall", json(snapshot.greedy.at("overall"))}});
        }

        const bool last = step + 1 == end_step;
        if (config.checkpoint_every > 0 &&
            ((step + 1) % config.checkpoint_every == 0 || last)) {
            write_checkpoint(step + 1, rng.state(), order, cursor, params);
        }
    }
    return params;
}

// ----------------------------- curve utility -----------------------------

// Affine map sending the first value to 0 and the last to 1.
inline std::vector<double> normalize_curve(const std::vector<double>& values) {
    if (values.size() < 2) throw ArgumentError("normalize_curve needs >= 2 values");
    const double first = values.front();
    const double last = values.back();
    if (first == last) throw ArgumentError("normalize_curve: degenerate range");
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back((v - first) / (last - first));
    return out;
}

// ----------------------------- ablation presets -----------------------------

inline const std::vector<std::string>& ablation_preset_names() {
    static const std::vector<std::string> names = {
        "full",    "w_pr",  "w_ri",  "w_pi",     "w_pr_pi",     "w_pr_ri",
        "w_ri_pi", "w_sem", "w_spa", "sum",      "text_spa",    "conventional"};
    return names;
}

// Reward-config row for one ablation preset. The single- and pairwise-reward
// rows enable exactly those components; "sum" and "text_spa" keep all
// components and flip one training knob.
inline RewardConfig apply_ablation_preset(RewardConfig base, const std::string& preset) {
    auto only = [&](bool sem, bool spa, bool ri, bool pi) {
        base.sem = sem ? RewardMode::oracle : RewardMode::disabled;
        base.spa = spa ? RewardMode::oracle : RewardMode::disabled;
        base.ri = ri ? RewardMode::oracle : RewardMode::disabled;
        base.pi = pi ? RewardMode::oracle : RewardMode::disabled;
        base.hps = RewardMode::disabled;
    };
    if (preset == "full") return base;
    if (preset == "w_pr") only(true, true, false, false);
    else if (preset == "w_ri") only(false, false, true, false);
    else if (preset == "w_pi") only(false, false, false, true);
    else if (preset == "w_pr_pi") only(true, true, false, true);
    else if (preset == "w_pr_ri") only(true, true, true, false);
    else if (preset == "w_ri_pi") only(false, false, true, true);
    else if (preset == "w_sem") only(true, false, true, true);
    else if (preset == "w_spa") only(false, true, true, true);
    else if (preset == "sum") base.composition = Composition::sum;
    else if (preset == "text_spa") base.spa_eval = SpaEval::text;
    else if (preset == "conventional") base.conventional = true;
    else throw ConfigError("unknown ablation preset: " + preset);
    return base;
}

struct AblationResult {
    std::string preset;
    EvalReport report;
};

inline void to_json(json& j, const AblationResult& r) {
    j = json{{"preset", r.preset}, {"report", r.report}};
}

// Runs grpo_train once per preset from the same starting params and seed,
// then evaluates each run under the full oracle reward.
inline std::vector<AblationResult> ablate(const RunConfig& base,
                                          const std::vector<std::string>& presets,
                                          const PolicyTables& start_params,
                                          const std::vector<PromptSpec>& tasks,
                                          int eval_samples = 0) {
    std::vector<AblationResult> results;
    for (const auto& preset : presets) {
        RunConfig config = base;
        config.rewards = apply_ablation_preset(base.rewards, preset);
        if (!base.log_path.empty()) config.log_path = base.log_path + "." + preset;
        if (!base.checkpoint_path.empty())
            config.checkpoint_path = base.checkpoint_path + "." + preset;
        const PolicyTables trained = grpo_train(start_params, config, tasks);
        RewardConfig full_oracle;  // evaluation always reports every component
        results.push_back(
            {preset, evaluate(trained, tasks, full_oracle, eval_samples, base.seed)});
    }
    return results;
}

// ----------------------------- config JSON -----------------------------

inline void to_json(json& j, const TaskCounts& t) {
    j = json{{"color_binding", t.color_binding},
             {"spatial", t.spatial},
             {"complex", t.complex_scenes}};
}

inline void from_json(const json& j, TaskCounts& t) {
    t.color_binding = j.value("color_binding", 0);
    t.spatial = j.value("spatial", 0);
    t.complex_scenes = j.value("complex", 0);
}

inline void to_json(json& j, const GrpoConfig& c) {
    j = json{{"group_size", c.group_size},
             {"clip_epsilon", c.clip_epsilon},
             {"kl_beta", c.kl_beta},
             {"learning_rate", c.learning_rate},
             {"schedule", lr_schedule_name(c.schedule)},
             {"std_floor", c.std_floor},
             {"sample_std", c.sample_std},
             {"token_level_ratio", c.token_level_ratio},
             {"inner_epochs", c.inner_epochs}};
}

inline void from_json(const json& j, GrpoConfig& c) {
    c.group_size = j.value("group_size", 16);
    c.clip_epsilon = j.value("clip_epsilon", 0.2);
    c.kl_beta = j.value("kl_beta", 0.04);
    c.learning_rate = j.value("learning_rate", 0.5);
    c.schedule = lr_schedule_from_name(j.value("schedule", "cosine"));
    c.std_floor = j.value("std_floor", 1e-8);
    c.sample_std = j.value("sample_std", false);
    c.token_level_ratio = j.value("token_level_ratio", false);
    c.inner_epochs = j.value("inner_epochs", 1);
}

inline void to_json(json& j, const SamplerConfig& c) {
    j = json{{"text_temperature", c.text_temperature},
             {"image_temperature", c.image_temperature},
             {"rng_seed", c.rng_seed}};
}

inline void from_json(const json& j, SamplerConfig& c) {
    c.text_temperature = j.value("text_temperature", 1.0);
    c.image_temperature = j.value("image_temperature", 1.0);
    c.rng_seed = j.value("rng_seed", uint64_t{0});
}

inline void to_json(json& j, const RunConfig& c) {
    j = json{{"tasks", c.tasks},
             {"stage", c.stage == Stage::sft ? "sft" : "grpo"},
             {"grpo", c.grpo},
             {"rewards", c.rewards},
             {"sampler", c.sampler},
             {"batch_size", c.batch_size},
             {"total_steps", c.total_steps},
             {"checkpoint_every", c.checkpoint_every},
             {"eval_every", c.eval_every},
             {"log_reward_breakdown", c.log_reward_breakdown},
             {"sft_steps", c.sft_steps},
             {"sft_lr", c.sft_lr},
             {"checkpoint_path", c.checkpoint_path},
             {"log_path", c.log_path},
             {"seed", c.seed}};
}

inline void from_json(const json& j, RunConfig& c) {
    if (j.contains("tasks")) j.at("tasks").get_to(c.tasks);
    const std::string stage = j.value("stage", "grpo");
    if (stage == "sft") c.stage = Stage::sft;
    else if (stage == "grpo") c.stage = Stage::grpo;
    else throw ConfigError("unknown stage: " + stage);
    if (j.contains("grpo")) j.at("grpo").get_to(c.grpo);
    if (j.contains("rewards")) j.at("rewards").get_to(c.rewards);
    if (j.contains("sampler")) j.at("sampler").get_to(c.sampler);
    c.batch_size = j.value("batch_size", 8);
    c.total_steps = j.value("total_steps", 1000);
    c.checkpoint_every = j.value("checkpoint_every", 100);
    c.eval_every = j.value("eval_every", 0);
    c.log_reward_breakdown = j.value("log_reward_breakdown", false);
    c.sft_steps = j.value("sft_steps", 200);
    c.sft_lr = j.value("sft_lr", 0.1);
    c.checkpoint_path = j.value("checkpoint_path", "");
    c.log_path = j.value("log_path", "");
    c.seed = j.value("seed", uint64_t{0});
}

}  // namespace planrl
