// planrl command line: task generation, SFT and GRPO training, evaluation,
// ablations, judge calibration and reward-curve export.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "planrl/harness.hpp"
#include "planrl/judge.hpp"

using namespace planrl;

namespace {

std::vector<PromptSpec> load_tasks(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open task file: " + path);
    std::vector<PromptSpec> tasks;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        tasks.push_back(json::parse(line).get<PromptSpec>());
    }
    if (tasks.empty()) throw ConfigError("task file is empty: " + path);
    return tasks;
}

void write_tasks(const std::vector<PromptSpec>& tasks, std::ostream& out) {
    for (const auto& t : tasks) out << json(t).dump() << "\n";
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    json j;
    in >> j;
    return j.get<RunConfig>();
}

std::vector<PromptSpec> tasks_for(const RunConfig& config, const std::string& task_file) {
    return task_file.empty() ? generate_tasks(config.tasks, config.seed)
                             : load_tasks(task_file);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw ConfigError("cannot write file: " + path);
    out << text;
}

void emit(const json& j, const std::string& out_path) {
    if (out_path.empty()) std::cout << j.dump(2) << std::endl;
    else write_text(out_path, j.dump(2) + "\n");
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

// A judge that echoes the oracle score for each prepared request.
JudgeClient loopback_client(const std::vector<CalibrationSample>& samples,
                            const EndpointConfig& cfg) {
    auto table = std::make_shared<std::map<std::string, std::string>>();
    for (const auto& s : samples) {
        const int score = static_cast<int>(std::lround(s.oracle_score10));
        (*table)[request_hash(build_request_body(s.request, cfg.model))] =
            "{\"score\": " + std::to_string(score) + "}";
    }
    return JudgeClient(cfg, [table](const std::string& body) -> std::string {
        const auto it = table->find(request_hash(body));
        if (it == table->end()) throw JudgeUnavailableError("loopback miss");
        return it->second;
    });
}

std::vector<CalibrationSample> build_calibration_samples(
    const std::vector<PromptSpec>& tasks, const std::vector<std::string>& kinds,
    const PolicyTables& params, int per_prompt, uint64_t seed) {
    std::vector<CalibrationSample> samples;
    Rng rng(seed);
    for (const auto& prompt : tasks) {
        for (int i = 0; i < per_prompt; ++i) {
            const Trajectory traj =
                sample_trajectory(params, params, params, prompt, {}, rng);
            for (const auto& kind : kinds) {
                CalibrationSample sample;
                if (kind == "sem") {
                    sample.request.kind = JudgeKind::sem;
                    sample.request.prompt_text = render_judge_prompt(
                        JudgeKind::sem, {.prompt_text = prompt.text,
                                         .chain_text = chain_to_text(traj.chain)});
                    sample.oracle_score10 = 10.0 * reward_sem(prompt, traj.chain);
                } else if (kind == "spa") {
                    const Canvas canvas = render_layout(traj.chain);
                    sample.request.kind = JudgeKind::spa;
                    sample.request.prompt_text =
                        render_judge_prompt(JudgeKind::spa, {.prompt_text = prompt.text});
                    sample.request.image_png = export_png(canvas);
                    sample.request.image_width = canvas.width;
                    sample.request.image_height = canvas.height;
                    sample.oracle_score10 =
                        10.0 * reward_spa(prompt, traj.chain, SpaEval::rendered);
                } else if (kind == "pi") {
                    ReasoningChain as_chain;
                    as_chain.planned = traj.scene.placed;
                    const Canvas canvas = render_layout(as_chain);
                    sample.request.kind = JudgeKind::pi;
                    sample.request.prompt_text =
                        render_judge_prompt(JudgeKind::pi, {.prompt_text = prompt.text});
                    sample.request.image_png = export_png(canvas);
                    sample.request.image_width = canvas.width;
                    sample.request.image_height = canvas.height;
                    sample.oracle_score10 = 10.0 * reward_pi(prompt, traj.scene);
                } else {
                    throw ConfigError("unknown calibration kind: " + kind);
                }
                samples.push_back(std::move(sample));
            }
        }
    }
    return samples;
}

std::string svg_chart(const std::vector<int>& steps, const std::vector<double>& values,
                      const std::string& title) {
    const int width = 640, height = 320, margin = 40;
    double lo = values[0], hi = values[0];
    for (double v : values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi == lo) hi = lo + 1;
    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width << "' height='"
        << height << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << margin << "' y='20' font-size='14'>" << title << "</text>\n";
    svg << "<polyline fill='none' stroke='black' stroke-width='1.5' points='";
    for (size_t i = 0; i < values.size(); ++i) {
        const double x =
            margin + (width - 2.0 * margin) * i / std::max<size_t>(values.size() - 1, 1);
        const double y =
            height - margin - (height - 2.0 * margin) * (values[i] - lo) / (hi - lo);
        svg << x << "," << y << " ";
    }
    svg << "'/>\n";
    svg << "<text x='" << margin << "' y='" << height - 8 << "' font-size='11'>step "
        << steps.front() << "</text>\n";
    svg << "<text x='" << width - margin - 60 << "' y='" << height - 8
        << "' font-size='11'>step " << steps.back() << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"desk-scale layout-planning policy trained with group-relative RL"};
    app.require_subcommand(1);

    // ---- gen-tasks ----
    auto* gen = app.add_subcommand("gen-tasks", "generate a synthetic prompt set");
    int n_color = 8, n_spatial = 8, n_complex = 4;
    uint64_t gen_seed = 0;
    std::string gen_out;
    gen->add_option("--color-binding", n_color, "number of color-binding prompts");
    gen->add_option("--spatial", n_spatial, "number of spatial prompts");
    gen->add_option("--complex", n_complex, "number of complex prompts");
    gen->add_option("--seed", gen_seed, "generation seed");
    gen->add_option("--out", gen_out, "output JSONL path (default stdout)");

    // ---- sft ----
    auto* sft = app.add_subcommand("sft", "supervised stage on oracle demonstrations");
    std::string sft_tasks, sft_out = "sft.ckpt", sft_log;
    int sft_steps = 200;
    double sft_lr = 0.1;
    uint64_t sft_seed = 0;
    sft->add_option("--tasks", sft_tasks, "task JSONL (default: generated)");
    sft->add_option("--steps", sft_steps, "SFT steps");
    sft->add_option("--lr", sft_lr, "SFT learning rate");
    sft->add_option("--seed", sft_seed, "task-generation seed when --tasks is absent");
    sft->add_option("--out", sft_out, "checkpoint output path");
    sft->add_option("--log", sft_log, "per-step NLL log (JSONL)");

    // ---- train ----
    auto* train = app.add_subcommand("train", "GRPO stage");
    std::string train_config, train_tasks, train_init, train_resume;
    train->add_option("--config", train_config, "run config JSON")->required();
    train->add_option("--tasks", train_tasks, "task JSONL (default: generated)");
    train->add_option("--init", train_init, "starting checkpoint (e.g. the SFT output)");
    train->add_option("--resume", train_resume, "resume from a mid-run checkpoint");

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "greedy + sampled reward report");
    std::string eval_ckpt, eval_tasks, eval_out;
    int eval_samples = 8;
    uint64_t eval_seed = 0;
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint to evaluate")->required();
    eval->add_option("--tasks", eval_tasks, "task JSONL")->required();
    eval->add_option("--samples", eval_samples, "samples per prompt");
    eval->add_option("--seed", eval_seed, "sampling seed");
    eval->add_option("--out", eval_out, "report path (default stdout)");

    // ---- ablate ----
    auto* abl = app.add_subcommand("ablate", "run reward-design presets");
    std::string abl_config, abl_tasks, abl_init, abl_out, abl_presets = "full,w_ri,w_pi";
    abl->add_option("--config", abl_config, "base run config JSON")->required();
    abl->add_option("--tasks", abl_tasks, "task JSONL (default: generated)");
    abl->add_option("--init", abl_init, "shared starting checkpoint");
    abl->add_option("--presets", abl_presets, "comma-separated preset names");
    abl->add_option("--out", abl_out, "comparison table path (default stdout)");

    // ---- judge-calibrate ----
    auto* cal = app.add_subcommand("judge-calibrate",
                                   "correlate judge scores with the oracle");
    std::string cal_tasks, cal_ckpt, cal_replay, cal_record, cal_out,
        cal_kinds = "sem,spa,pi";
    int cal_per_prompt = 2;
    uint64_t cal_seed = 0;
    bool cal_loopback = false;
    cal->add_option("--tasks", cal_tasks, "task JSONL (default: generated)");
    cal->add_option("--checkpoint", cal_ckpt, "policy used to sample trajectories");
    cal->add_option("--per-prompt", cal_per_prompt, "trajectories per prompt");
    cal->add_option("--seed", cal_seed, "sampling seed");
    cal->add_option("--kinds", cal_kinds, "judge kinds: sem,spa,pi");
    cal->add_option("--replay", cal_replay, "replay fixture instead of a live endpoint");
    cal->add_option("--record", cal_record, "record live responses into a fixture");
    cal->add_flag("--loopback", cal_loopback, "echo the oracle (self-test)");
    cal->add_option("--out", cal_out, "report path (default stdout)");

    // ---- plot ----
    auto* plot = app.add_subcommand("plot", "export a reward curve as CSV + SVG");
    std::string plot_log, plot_metric = "r_total_mean", plot_csv = "curve.csv",
                plot_svg = "curve.svg";
    plot->add_option("--log", plot_log, "run log JSONL")->required();
    plot->add_option("--metric", plot_metric, "record field to plot");
    plot->add_option("--csv", plot_csv, "CSV output path");
    plot->add_option("--svg", plot_svg, "SVG output path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            const auto tasks = generate_tasks({n_color, n_spatial, n_complex}, gen_seed);
            if (gen_out.empty()) {
                write_tasks(tasks, std::cout);
            } else {
                std::ofstream out(gen_out, std::ios::trunc);
                if (!out) throw ConfigError("cannot write " + gen_out);
                write_tasks(tasks, out);
            }
        } else if (*sft) {
            const auto tasks = sft_tasks.empty() ? generate_tasks({8, 8, 4}, sft_seed)
                                                 : load_tasks(sft_tasks);
            const auto demos = make_demo_set(tasks);
            RunLog log(sft_log);
            const PolicyTables trained =
                sft_train(PolicyTables{}, demos, sft_steps, sft_lr, &log);
            Checkpoint cp;
            cp.params = trained;
            cp.reference = trained;
            cp.rng_state = Rng(sft_seed).state();
            save_checkpoint(sft_out, cp);
            std::cerr << "sft: " << demos.size() << " demos, " << sft_steps
                      << " steps -> " << sft_out << "\n";
        } else if (*train) {
            const RunConfig config = load_run_config(train_config);
            const auto tasks = tasks_for(config, train_tasks);
            PolicyTables params;
            if (!train_init.empty()) params = load_checkpoint(train_init).params;
            ExternalJudgeHooks hooks;
            const bool judge_mode = config.rewards.pi == RewardMode::external_judge ||
                                    config.rewards.sem == RewardMode::external_judge ||
                                    config.rewards.spa == RewardMode::external_judge ||
                                    config.rewards.ri == RewardMode::external_judge;
            std::shared_ptr<JudgeClient> client;
            if (judge_mode) {
                client = std::make_shared<JudgeClient>(JudgeClient::from_env());
                hooks = make_judge_hooks(
                    client, [](const std::string& w) { std::cerr << w << "\n"; });
            }
            grpo_train(params, config, tasks, judge_mode ? &hooks : nullptr, train_resume);
            std::cerr << "train: " << config.total_steps << " steps done";
            if (!config.checkpoint_path.empty())
                std::cerr << " -> " << config.checkpoint_path;
            std::cerr << "\n";
        } else if (*eval) {
            const auto tasks = load_tasks(eval_tasks);
            const PolicyTables params = load_checkpoint(eval_ckpt).params;
            const EvalReport report =
                evaluate(params, tasks, RewardConfig{}, eval_samples, eval_seed);
            emit(json(report), eval_out);
        } else if (*abl) {
            const RunConfig config = load_run_config(abl_config);
            const auto tasks = tasks_for(config, abl_tasks);
            PolicyTables params;
            if (!abl_init.empty()) params = load_checkpoint(abl_init).params;
            const auto results = ablate(config, split_csv(abl_presets), params, tasks);
            json table = json::array();
            for (const auto& r : results) {
                json row{{"preset", r.preset}};
                row["greedy_overall"] = r.report.greedy.at("overall");
                table.push_back(row);
            }
            emit(json{{"results", results}, {"summary", table}}, abl_out);
        } else if (*cal) {
            const auto tasks =
                cal_tasks.empty() ? generate_tasks({4, 4, 2}, cal_seed) : load_tasks(cal_tasks);
            PolicyTables params;
            if (!cal_ckpt.empty()) params = load_checkpoint(cal_ckpt).params;
            const auto samples = build_calibration_samples(
                tasks, split_csv(cal_kinds), params, cal_per_prompt, cal_seed);
            EndpointConfig endpoint = EndpointConfig::from_env();
            std::optional<JudgeClient> client;
            if (cal_loopback) {
                client = loopback_client(samples, endpoint);
            } else if (!cal_replay.empty()) {
                client = JudgeClient::replay(cal_replay, endpoint);
            } else {
                JudgeTransport transport = make_http_transport(endpoint);
                if (!cal_record.empty())
                    transport = make_recording_transport(std::move(transport), cal_record);
                client = JudgeClient(endpoint, std::move(transport));
            }
            const auto report = calibrate_judge(
                samples, *client, [](const std::string& w) { std::cerr << w << "\n"; });
            emit(json(report), cal_out);
        } else if (*plot) {
            std::ifstream in(plot_log);
            if (!in) throw ConfigError("cannot open log: " + plot_log);
            std::vector<int> steps;
            std::vector<double> values;
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                const json j = json::parse(line);
                if (j.value("type", "train") != "train" || !j.contains(plot_metric))
                    continue;
                steps.push_back(j["step"].get<int>());
                values.push_back(j[plot_metric].get<double>());
            }
            if (values.size() < 2) throw ConfigError("log holds fewer than 2 points");
            std::vector<double> normalized;
            bool degenerate = values.front() == values.back();
            if (!degenerate) normalized = normalize_curve(values);
            else std::cerr << "plot: first and last values are equal; omitting the "
                              "normalized column\n";
            std::ostringstream csv;
            csv << "step," << plot_metric << (degenerate ? "\n" : ",normalized\n");
            for (size_t i = 0; i < values.size(); ++i) {
                csv << steps[i] << "," << values[i];
                if (!degenerate) csv << "," << normalized[i];
                csv << "\n";
            }
            write_text(plot_csv, csv.str());
            write_text(plot_svg, svg_chart(steps, values, plot_metric));
            std::cerr << "plot: " << values.size() << " points -> " << plot_csv << ", "
                      << plot_svg << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
