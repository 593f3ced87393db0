// End-to-end acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance [--work DIR] [--only 1,2,...] [--reuse]
//
// Criteria 6-9 train federated models from scratch under DIR (about 20
// minutes on one core); --reuse keeps finished runs from a previous invocation.

#include "fdrl/abrenv.hpp"
#include "fdrl/agents.hpp"
#include "fdrl/baselines.hpp"
#include "fdrl/experiment.hpp"
#include "fdrl/fedserver.hpp"
#include "fdrl/neural.hpp"
#include "fdrl/simcore.hpp"
#include "test_support.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

using namespace fdrl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char *f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string slurp(const fs::path &path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<double> random_vec(Rng &rng, std::size_t n, double scale = 1.0) {
    std::vector<double> v(n);
    for (auto &x : v) x = uniform(rng, -scale, scale);
    return v;
}

MlpSpec random_spec(Rng &rng, std::size_t in, std::size_t out, OutputHead head) {
    MlpSpec spec{in, {}, out, Activation::Tanh, head};
    const auto layers = 1 + uniform_index(rng, 3);
    for (std::size_t i = 0; i < layers; ++i) spec.hidden.push_back(3 + uniform_index(rng, 8));
    return spec;
}

// ---------------------------------------------------------------------------
// 1. Numerical core

Verdict numerical_core() {
    using fdrl::testing::gradient_check;
    constexpr double kTol = 1e-4;
    Rng rng = make_rng(2024, "acceptance-gradients");
    double worst_td = 0.0, worst_actor = 0.0, worst_critic = 0.0, worst_ppo = 0.0;
    std::size_t clipped_samples = 0;
    for (int net = 0; net < 50; ++net) {
        const auto in = 2 + uniform_index(rng, 7);
        const auto actions = 2 + uniform_index(rng, 6);

        const auto q_spec = random_spec(rng, in, actions, OutputHead::Linear);
        Mlp q(q_spec, rng);
        const Mlp q_target(q_spec, rng);
        std::vector<Transition> items;
        for (int i = 0; i < 8; ++i)
            items.push_back({random_vec(rng, in), uniform_index(rng, actions), uniform(rng, -2, 2),
                             random_vec(rng, in), uniform01(rng) < 0.25});
        std::vector<const Transition *> batch;
        for (const auto &t : items) batch.push_back(&t);
        std::vector<double> g(q.parameter_count(), 0.0), scratch(q.parameter_count());
        td_loss(q, q_target, batch, 0.9, g);
        worst_td = std::max(worst_td, gradient_check(q.parameters(), g, [&] {
                                return td_loss(q, q_target, batch, 0.9, scratch);
                            }));

        Mlp actor(random_spec(rng, in, actions, OutputHead::Softmax), rng);
        PolicyBatch pb;
        for (int i = 0; i < 6; ++i) {
            pb.states.push_back(random_vec(rng, in));
            pb.actions.push_back(uniform_index(rng, actions));
            pb.advantages.push_back(uniform(rng, -2, 2));
        }
        for (std::size_t i = 0; i < pb.states.size(); ++i) {
            // Ratios spread over both sides of the clip range, away from its kinks.
            const double log_p = std::log(actor.forward(pb.states[i])[pb.actions[i]]);
            double shift, ratio;
            do {
                shift = uniform(rng, -0.5, 0.5);
                ratio = std::exp(-shift);
            } while (std::abs(ratio - 0.8) < 0.01 || std::abs(ratio - 1.2) < 0.01);
            clipped_samples += ratio < 0.8 || ratio > 1.2;
            pb.old_log_probs.push_back(log_p + shift);
        }
        std::vector<double> ga(actor.parameter_count(), 0.0), sa(actor.parameter_count());
        policy_gradient_loss(actor, pb, 0.0, ga);
        worst_actor = std::max(worst_actor, gradient_check(actor.parameters(), ga, [&] {
                                   return policy_gradient_loss(actor, pb, 0.0, sa);
                               }));
        std::fill(ga.begin(), ga.end(), 0.0);
        ppo_surrogate_loss(actor, pb, 0.2, 0.0, ga);
        worst_ppo = std::max(worst_ppo, gradient_check(actor.parameters(), ga, [&] {
                                 return ppo_surrogate_loss(actor, pb, 0.2, 0.0, sa);
                             }));

        Mlp critic(random_spec(rng, in, 1, OutputHead::Linear), rng);
        const auto returns = random_vec(rng, pb.states.size(), 3.0);
        std::vector<double> gc(critic.parameter_count(), 0.0), sc(critic.parameter_count());
        value_loss(critic, pb.states, returns, 0.5, gc);
        worst_critic = std::max(worst_critic, gradient_check(critic.parameters(), gc, [&] {
                                    return value_loss(critic, pb.states, returns, 0.5, sc);
                                }));
    }

    double worst_softmax = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        Mlp net(random_spec(rng, 22, 7, OutputHead::Softmax), rng);
        const auto p = net.forward(random_vec(rng, 22, 3.0));
        worst_softmax = std::max(worst_softmax, std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0));
        const auto logits = random_vec(rng, 7, 40.0);
        const auto s = softmax(logits);
        worst_softmax = std::max(worst_softmax, std::abs(std::accumulate(s.begin(), s.end(), 0.0) - 1.0));
    }

    // First Adam step: m_hat = g and v_hat = g^2, so w1 = w0 - lr * g / (|g| + eps).
    double worst_adam = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + uniform_index(rng, 50);
        auto w = random_vec(rng, n, 3.0);
        const auto w0 = w;
        const auto grad = random_vec(rng, n, 5.0);
        const double lr = uniform(rng, 1e-5, 1e-2);
        AdamState adam(n, lr);
        adam_step(adam, w, grad);
        for (std::size_t i = 0; i < n; ++i) {
            const double expected = w0[i] - lr * grad[i] / (std::abs(grad[i]) + 1e-8);
            worst_adam = std::max(worst_adam, std::abs(w[i] - expected));
        }
    }

    const bool pass = worst_td < kTol && worst_actor < kTol && worst_critic < kTol && worst_ppo < kTol &&
                      worst_softmax <= 1e-12 && worst_adam <= 1e-15 && clipped_samples > 0;
    return {pass, "max FD rel err td " + fmt("%.1e", worst_td) + ", a2c actor " + fmt("%.1e", worst_actor) +
                      ", critic " + fmt("%.1e", worst_critic) + ", ppo " + fmt("%.1e", worst_ppo) +
                      " (tol 1e-4, 50 nets); softmax |sum-1| " + fmt("%.1e", worst_softmax) +
                      " (tol 1e-12); adam step err " + fmt("%.1e", worst_adam)};
}

// ---------------------------------------------------------------------------
// 2. Simulator invariants

struct EpisodeRecord {
    std::vector<StepOutcome> outcomes;
    double elapsed = 0.0;
};

Verdict simulator_invariants() {
    const auto corpus = generate_corpus({25, 320.0, 10.0, 1.0}, 77);
    std::vector<VideoManifest> manifests;
    for (std::uint64_t s = 1; s <= 4; ++s) manifests.push_back(default_manifest(s));

    const auto run = [&](std::uint64_t episode) {
        Rng rng = make_rng(99, "acceptance-episodes", episode);
        const auto &trace = corpus.traces[uniform_index(rng, corpus.traces.size())];
        const auto &manifest = manifests[uniform_index(rng, manifests.size())];
        const ClientEnvConfig env{trace.group(), uniform(rng, 0.0, 0.2), 20.0};
        Player player(manifest, trace, env, uniform(rng, 0.0, trace.duration_s()));
        EpisodeRecord rec;
        std::size_t violations = 0;
        // The clock advances by d then by the wait each chunk; summing in that
        // order is the exact float identity, separate sums differ by rounding.
        double clock = 0.0, sum_d = 0.0, sum_wait = 0.0;
        while (!player.state().done()) {
            const double before = player.state().buffer_s;
            const auto o = player.download_chunk(uniform_index(rng, manifest.num_levels()));
            violations += o.rebuffer_s != std::max(0.0, o.download_time_s - before);
            violations += !(o.new_buffer_s >= 0.0 && o.new_buffer_s <= 20.0);
            violations += !(player.state().buffer_s >= 0.0 && player.state().buffer_s <= 20.0);
            clock += o.download_time_s;
            clock += o.wait_s;
            sum_d += o.download_time_s;
            sum_wait += o.wait_s;
            rec.outcomes.push_back(o);
        }
        rec.elapsed = player.state().elapsed_s;
        return std::make_tuple(rec, violations, clock, sum_d + sum_wait);
    };

    std::size_t violations = 0, time_mismatches = 0, nondeterministic = 0, steps = 0;
    double worst_split_sum = 0.0;
    for (std::uint64_t ep = 0; ep < 1000; ++ep) {
        const auto [rec, v, total, split_sum] = run(ep);
        violations += v;
        time_mismatches += rec.elapsed != total;
        worst_split_sum = std::max(worst_split_sum, std::abs(rec.elapsed - split_sum) / rec.elapsed);
        steps += rec.outcomes.size();
        if (ep % 10 == 0) {
            const auto [again, v2, t2, s2] = run(ep);
            nondeterministic += again.outcomes.size() != rec.outcomes.size() || again.elapsed != rec.elapsed;
            for (std::size_t i = 0; i < std::min(again.outcomes.size(), rec.outcomes.size()); ++i) {
                const auto &a = again.outcomes[i], &b = rec.outcomes[i];
                nondeterministic += a.download_time_s != b.download_time_s || a.rebuffer_s != b.rebuffer_s ||
                                    a.new_buffer_s != b.new_buffer_s || a.wait_s != b.wait_s;
            }
        }
    }
    return {violations == 0 && time_mismatches == 0 && nondeterministic == 0,
            "1000 episodes / " + std::to_string(steps) + " chunks: " + std::to_string(violations) +
                " buffer/rebuffer violations, " + std::to_string(time_mismatches) + " time mismatches, " +
                std::to_string(nondeterministic) + " replay mismatches; (sum d) + (sum wait) within " +
                fmt("%.0e", worst_split_sum) + " relative"};
}

// ---------------------------------------------------------------------------
// 3. Reward oracle

Verdict reward_oracle() {
    const double kbps[] = {700, 900, 2000, 3000, 5000, 6000, 8000};
    const auto q = [&](std::size_t l) { return std::log(kbps[l] / 700.0); };
    const auto manifest = default_manifest(3);
    const auto corpus = generate_corpus({10, 320.0, 10.0, 1.0}, 31);
    std::vector<const BandwidthTrace *> pool;
    for (const auto &t : corpus.traces) pool.push_back(&t);
    AbrEnv env(manifest, {TraceGroup::LteLow, 0.05, 20.0}, pool);
    Rng rng = make_rng(5, "acceptance-reward");

    std::size_t steps = 0, mismatches = 0;
    while (steps < 10000) {
        env.reset(rng);
        std::optional<std::size_t> prev;
        bool done = false;
        while (!done && steps < 10000) {
            const auto level = uniform_index(rng, 7);
            const auto step = env.step(level);
            const auto p = prev.value_or(level);
            const double expected = q(level) - 2.6 * std::abs(q(p) - q(level)) - 1.0 * env.last_outcome().rebuffer_s;
            mismatches += step.reward != expected;
            prev = level;
            done = step.done();
            ++steps;
        }
    }
    const double q700 = utility(700, manifest.ladder());
    return {mismatches == 0 && q700 == 0.0, std::to_string(steps) + " steps, " + std::to_string(mismatches) +
                                                " differ from the closed form (exact compare); q(700) = " +
                                                fmt("%g", q700)};
}

// ---------------------------------------------------------------------------
// 4. FedAvg exactness

Verdict fedavg_exactness() {
    Rng rng = make_rng(8, "acceptance-fedavg");
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto k = 1 + uniform_index(rng, 20);
        const auto n = 1 + uniform_index(rng, 5000);
        std::vector<WeightVector> vs(k);
        for (auto &v : vs) v = {random_vec(rng, n, 10.0), "h"};
        const auto avg = average_weights(vs);
        for (std::size_t i = 0; i < n; ++i) {
            long double sum = 0.0L;
            for (const auto &v : vs) sum += v.values[i];
            worst = std::max(worst, std::abs(avg.values[i] - static_cast<double>(sum / k)));
        }
    }
    const WeightVector one{random_vec(rng, 1000, 10.0), "h"};
    const bool identity = average_weights(std::vector<WeightVector>{one}) == one;
    auto neg = one;
    for (auto &x : neg.values) x = -x;
    const auto cancel = average_weights(std::vector<WeightVector>{one, neg});
    const bool cancels = std::all_of(cancel.values.begin(), cancel.values.end(), [](double x) { return x == 0.0; });
    return {worst <= 1e-12 && identity && cancels, "max |avg - mean| " + fmt("%.1e", worst) +
                                                       " over 100 random sets (tol 1e-12); K=1 identity " +
                                                       (identity ? "holds" : "fails") + "; v,-v cancel " +
                                                       (cancels ? "to 0" : "fails")};
}

// ---------------------------------------------------------------------------
// 5. Agent sanity oracles

Verdict agent_sanity() {
    std::vector<double> dqn, a2c, ppo;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        dqn.push_back(fdrl::testing::dqn_mdp_error(seed));
        a2c.push_back(fdrl::testing::bandit_best_arm_probability(Algo::A2c, seed));
        ppo.push_back(fdrl::testing::bandit_best_arm_probability(Algo::Ppo, seed));
    }
    const double dqn_worst = *std::max_element(dqn.begin(), dqn.end());
    const double a2c_med = median(a2c), ppo_med = median(ppo);
    return {dqn_worst < 0.05 && a2c_med > 0.95 && ppo_med > 0.95,
            "DQN max|Q-Q*| worst of 5 seeds " + fmt("%.4f", dqn_worst) + " (tol 0.05); median pi(best arm) A2C " +
                fmt("%.4f", a2c_med) + ", PPO " + fmt("%.4f", ppo_med) + " (need > 0.95)"};
}

// ---------------------------------------------------------------------------
// Shared scenario for 6-9: 20 clients, 100 synthetic traces per group, T=100.

struct Scenario {
    fs::path root;
    TraceCorpus corpus;
    VideoManifest manifest;
    fs::path traces, manifest_path;
};

Scenario make_scenario(const fs::path &root) {
    Scenario s{root, {}, default_manifest(1), root / "traces", root / "manifest.txt"};
    if (!fs::exists(s.traces / "split.csv")) {
        GenTracesOptions gen;
        gen.corpus.per_group_count = 100;
        gen.seed = 1;
        gen_traces(gen, s.traces);
    }
    save_manifest(s.manifest, s.manifest_path);
    s.corpus = load_trace_dir(s.traces);
    s.manifest = load_manifest(s.manifest_path);
    return s;
}

ExperimentConfig scenario_config(const Scenario &s, Algo algo, std::size_t k, std::size_t e) {
    ExperimentConfig c;
    c.manifest_path = s.manifest_path;
    c.traces_path = s.traces;
    c.seeds = {1, 2, 3};
    c.fed.num_clients = 20;
    c.fed.clients_per_round = k;
    c.fed.local_episodes = e;
    c.fed.rounds = 100;
    c.fed.algo = algo;
    return c;
}

std::vector<EvalRow> eval_models(const Scenario &s, const ExperimentConfig &config,
                                 const std::vector<fs::path> &models) {
    EvalRequest request;
    request.fed = config.fed;
    request.models = models;
    return evaluate_policies(request, s.corpus, s.manifest);
}

const EvalRow &row_named(const std::vector<EvalRow> &rows, const std::string &name) {
    for (const auto &r : rows)
        if (r.policy == name) return r;
    throw std::runtime_error("no eval row " + name);
}

struct DqnOutcome {
    ExperimentConfig config;
    fs::path dir;
    std::vector<EvalRow> table; // baselines plus the DQN row over all seeds
    std::vector<double> per_seed;
};

DqnOutcome run_dqn(const Scenario &s) {
    DqnOutcome out;
    out.config = scenario_config(s, Algo::Dqn, 5, 5);
    out.dir = s.root / "dqn_K5_E5";
    const auto runs = train(out.config, out.dir);
    std::vector<fs::path> models;
    for (const auto &r : runs) {
        models.push_back(r.dir / "best.json");
        const auto rows = eval_models(s, out.config, {r.dir / "best.json"});
        out.per_seed.push_back(rows.back().reward_mean);
    }
    out.table = eval_models(s, out.config, models);
    std::ofstream csv(out.dir / "eval.csv");
    write_eval_csv(out.table, csv);
    return out;
}

// 6. Ordering against the baselines
Verdict end_to_end_ordering(const DqnOutcome &d) {
    const double thr = row_named(d.table, "THGHPUT").reward_mean;
    const double bola = row_named(d.table, "BOLA").reward_mean;
    const double constant = row_named(d.table, "CONSTANT").reward_mean;
    const double dqn = d.table.back().reward_mean;
    std::size_t wins = 0;
    std::string seeds;
    for (const double r : d.per_seed) {
        wins += r > thr && r > bola;
        seeds += (seeds.empty() ? "" : ", ") + fmt("%.3f", r);
    }
    const bool ordinal = dqn > bola && bola > constant && thr > constant;
    return {wins >= 2 && ordinal, "DQN best-model reward per seed [" + seeds + "], mean " + fmt("%.3f", dqn) +
                                      "; THGHPUT " + fmt("%.3f", thr) + ", BOLA " + fmt("%.3f", bola) +
                                      ", CONSTANT " + fmt("%.3f", constant) + "; beats both in " +
                                      std::to_string(wins) + "/3 seeds; DQN>BOLA>CONSTANT, THGHPUT>CONSTANT " +
                                      (ordinal ? "hold" : "violated")};
}

// 7. Convergence-rate ordering over the standard (K, E) grid, trained with A2C.
Verdict convergence_ordering(const Scenario &s) {
    constexpr std::size_t kWindow = 20, kRounds = 100;
    std::map<std::pair<std::size_t, std::size_t>, std::vector<std::vector<double>>> smoothed;
    for (const auto &[k, e] : kStandardGrid) {
        const auto config = scenario_config(s, Algo::A2c, k, e);
        const auto dir = s.root / ("a2c_K" + std::to_string(k) + "_E" + std::to_string(e));
        for (const auto &run : train(config, dir)) {
            std::vector<double> series;
            for (const auto &log : run.result.logs) series.push_back(log.global_mean);
            smoothed[{k, e}].push_back(running_average(series, kWindow));
        }
    }
    std::vector<double> finals;
    for (const auto &run : smoothed[{20, 10}]) finals.push_back(run.back());
    const double final_reward = median(finals);
    const double threshold = final_reward - 0.2 * std::abs(final_reward); // 80% of a positive final reward

    std::map<std::pair<std::size_t, std::size_t>, double> rounds;
    std::string cells;
    for (const auto &[cell, runs] : smoothed) {
        std::vector<double> hits;
        for (const auto &run : runs) {
            std::size_t t = 0;
            while (t < run.size() && run[t] < threshold) ++t;
            hits.push_back(static_cast<double>(t < run.size() ? t + 1 : kRounds + 1));
        }
        rounds[cell] = median(hits);
        cells += " K" + std::to_string(cell.first) + "E" + std::to_string(cell.second) + "=" +
                 (rounds[cell] > kRounds ? std::string("never") : fmt("%g", rounds[cell]));
    }
    // Non-increasing in K at E=10 and in E at K=10.
    const std::pair<std::size_t, std::size_t> chain[][2] = {
        {{5, 10}, {10, 10}}, {{10, 10}, {20, 10}}, {{10, 5}, {10, 10}}, {{10, 10}, {10, 20}}};
    std::size_t inversions = 0;
    for (const auto &[a, b] : chain) inversions += rounds[b] > rounds[a];
    return {inversions <= 1, "threshold " + fmt("%.3f", threshold) + " (80% of K20E10 final " +
                                 fmt("%.3f", final_reward) + "); median rounds-to-threshold:" + cells + "; " +
                                 std::to_string(inversions) + " inversion(s) (allowed 1)"};
}

// 8. Group difficulty
Verdict group_ordering(const DqnOutcome &d) {
    bool pass = true;
    std::string detail;
    for (const auto &row : d.table) {
        const auto &g = row.group_mean; // fcc_high, fcc_low, lte_high, lte_low
        const bool ok = g[0] > g[1] && g[2] > g[3];
        pass = pass && ok;
        detail += row.policy + " " + fmt("%.2f", g[0]) + ">" + fmt("%.2f", g[1]) + "," + fmt("%.2f", g[2]) + ">" +
                  fmt("%.2f", g[3]) + (ok ? "" : " (violated)") + "; ";
    }
    const auto &c = row_named(d.table, "CONSTANT").group_mean;
    const bool strongly_negative = c[1] < -1.0 && c[3] < -1.0;
    return {pass && strongly_negative,
            detail + "CONSTANT low groups < -1.0: " + (strongly_negative ? "yes" : "no")};
}

// 9. Reproducibility: retrain seed 1 of the DQN run and one A2C grid cell from
// their saved configs and compare every artifact byte for byte.
Verdict reproducibility(const Scenario &s, const DqnOutcome &d) {
    std::size_t compared = 0, differing = 0;
    const auto compare = [&](const fs::path &a, const fs::path &b) {
        ++compared;
        differing += !fs::exists(a) || slurp(a) != slurp(b);
    };

    auto dqn = load_config(d.dir / "config.json");
    dqn.seeds = {1};
    const auto rerun = s.root / "rerun_dqn";
    fs::remove_all(rerun);
    train(dqn, rerun);
    for (const auto *f : {"seed_1/round_log.csv", "seed_1/best.json", "seed_1/final.json"})
        compare(d.dir / f, rerun / f);
    {
        std::ofstream a(rerun / "eval_original.csv"), b(rerun / "eval_rerun.csv");
        write_eval_csv(eval_models(s, dqn, {d.dir / "seed_1/best.json"}), a);
        write_eval_csv(eval_models(s, dqn, {rerun / "seed_1/best.json"}), b);
    }
    compare(rerun / "eval_original.csv", rerun / "eval_rerun.csv");

    const auto grid_dir = s.root / "a2c_K5_E10";
    const auto a2c = load_config(grid_dir / "config.json");
    const auto rerun_a2c = s.root / "rerun_a2c";
    fs::remove_all(rerun_a2c);
    train(a2c, rerun_a2c);
    for (const auto seed : a2c.seeds)
        for (const auto *f : {"round_log.csv", "best.json", "final.json"}) {
            const auto rel = fs::path("seed_" + std::to_string(seed)) / f;
            compare(grid_dir / rel, rerun_a2c / rel);
        }
    return {differing == 0 && compared > 0,
            std::to_string(compared) + " artifacts compared (round logs, checkpoints, eval table), " +
                std::to_string(differing) + " differ"};
}

} // namespace

int main(int argc, char **argv) {
    CLI::App app{"Acceptance suite"};
    fs::path work = fs::temp_directory_path() / "fdrl_acceptance";
    std::vector<int> only;
    bool reuse = false;
    app.add_option("--work", work, "Working directory for traces and training runs");
    app.add_option("--only", only, "Run only these criteria")->delimiter(',');
    app.add_flag("--reuse", reuse, "Keep finished runs from a previous invocation");
    CLI11_PARSE(app, argc, argv);

    const auto wanted = [&](int n) { return only.empty() || std::find(only.begin(), only.end(), n) != only.end(); };
    if (!reuse) fs::remove_all(work);
    fs::create_directories(work);

    int failures = 0;
    const auto report = [&](int n, const char *name, double limit_s, const std::function<Verdict()> &check) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v;
        try {
            v = check();
        } catch (const std::exception &e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (limit_s > 0.0 && secs > limit_s) {
            v.pass = false;
            v.detail += "; runtime over " + fmt("%g", limit_s) + " s";
        }
        failures += !v.pass;
        std::cout << "CRITERION " << n << ' ' << (v.pass ? "PASS" : "FAIL") << " [" << name << "] " << v.detail
                  << " (" << fmt("%.1f", secs) << " s)" << std::endl;
    };

    if (wanted(1)) report(1, "numerical core", 60, numerical_core);
    if (wanted(2)) report(2, "simulator invariants", 60, simulator_invariants);
    if (wanted(3)) report(3, "reward oracle", 60, reward_oracle);
    if (wanted(4)) report(4, "fedavg exactness", 60, fedavg_exactness);
    if (wanted(5)) report(5, "agent sanity", 300, agent_sanity);

    if (wanted(6) || wanted(7) || wanted(8) || wanted(9)) {
        std::optional<Scenario> scenario;
        std::optional<DqnOutcome> dqn;
        std::string setup_error;
        try {
            scenario = make_scenario(work);
        } catch (const std::exception &e) {
            setup_error = e.what();
        }
        const auto need_dqn = [&]() -> const DqnOutcome & {
            if (!scenario) throw std::runtime_error("scenario setup failed: " + setup_error);
            if (!dqn) dqn = run_dqn(*scenario);
            return *dqn;
        };
        if (wanted(6)) report(6, "end-to-end ordering", 0, [&] { return end_to_end_ordering(need_dqn()); });
        if (wanted(7))
            report(7, "convergence ordering", 0, [&] {
                if (!scenario) throw std::runtime_error("scenario setup failed: " + setup_error);
                return convergence_ordering(*scenario);
            });
        if (wanted(8)) report(8, "group ordering", 0, [&] { return group_ordering(need_dqn()); });
        if (wanted(9))
            report(9, "reproducibility", 0, [&] {
                const auto &d = need_dqn();
                if (!fs::exists(scenario->root / "a2c_K5_E10/config.json"))
                    train(scenario_config(*scenario, Algo::A2c, 5, 10), scenario->root / "a2c_K5_E10");
                return reproducibility(*scenario, d);
            });
    }

    std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " CRITERIA FAILED") << std::endl;
    return failures == 0 ? 0 : 1;
}
