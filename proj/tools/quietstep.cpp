// Copyright (c) 2026 The QuietStep Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// quietstep command-line entry point: train, eval, pareto, audio, serve.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "quietstep/audio.hpp"
#include "quietstep/checkpoint.hpp"
#include "quietstep/config.hpp"
#include "quietstep/experiment.hpp"
#include "quietstep/records.hpp"
#include "quietstep/report.hpp"
#include "quietstep/steer.hpp"
#include "quietstep/steer_server.hpp"

#ifndef QUIETSTEP_VERSION
#define QUIETSTEP_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using namespace quietstep;

namespace {

std::atomic<bool> g_interrupted{false};

fs::path default_out() {
  if (const char* env = std::getenv("QUIETSTEP_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

ExperimentConfig load_with_overrides(const std::string& path, const std::vector<std::string>& sets) {
  ExperimentConfig cfg = path.empty() ? ExperimentConfig{} : load_config(path);
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error(Errc::config_parse, "--set expects key=value, got '" + kv + "'");
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  cfg.validate();
  return cfg;
}

Segment parse_segment(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw Error(Errc::invalid_params, "segment must be start:end, got '" + text + "'");
  try {
    return {std::stod(text.substr(0, colon)), std::stod(text.substr(colon + 1))};
  } catch (const std::exception&) {
    throw Error(Errc::invalid_params, "segment must be start:end in seconds, got '" + text + "'");
  }
}

struct TrainArgs {
  std::string config, mode = "cncp", out, manifest;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

int cmd_train(const TrainArgs& a) {
  ExperimentConfig cfg;
  std::vector<MethodSpec> methods;
  if (!a.manifest.empty()) {
    auto [c, m] = manifest_run(nlohmann::json::parse(read_text(a.manifest)));
    cfg = c;
    methods.push_back(m);
  } else {
    cfg = load_with_overrides(a.config, a.sets);
    const auto m = parse_method(a.mode);
    if (m.name == "oracle_safe" && !m.fixed_epsilon) {
      // One independent policy per evaluation budget.
      for (double e : cfg.eval.epsilons) {
        auto me = m;
        me.fixed_epsilon = e;
        methods.push_back(me);
      }
    } else {
      methods.push_back(m);
    }
  }
  if (a.seed) cfg.trainer.seed = *a.seed;
  const fs::path out = a.out.empty() ? default_out() : fs::path(a.out);

  for (const auto& m : methods) {
    const auto dir = out / (m.tag() + "_s" + std::to_string(cfg.trainer.seed));
    std::cerr << "train " << m.tag() << " seed " << cfg.trainer.seed << " -> " << dir.string() << "\n";
    const auto t0 = std::chrono::steady_clock::now();
    const int iters = cfg.trainer.iterations;
    train_run(cfg, m, dir, QUIETSTEP_VERSION, [&](const IterationMetrics& im) {
      if (a.quiet) return;
      if (im.iteration % 50 != 0 && im.iteration != iters) return;
      double lam = 0.0, cost = 0.0, err = 0.0;
      for (const auto& l : im.levels) {
        lam += l.lambda;
        cost += l.mean_cost;
        err += l.mean_tracking_error;
      }
      const double n = static_cast<double>(im.levels.size());
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::fprintf(stderr, "  iter %5d  steps %9lld  cost %.4f  track err %.4f  mean lambda %.4f  (%.0f s)\n",
                   im.iteration, im.env_steps, cost / n, err / n, lam / n, secs);
    });
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& config, const std::vector<std::string>& sets,
             const std::string& out) {
  const auto ck = load_checkpoint<float>(checkpoint);
  const auto cfg = load_with_overrides(config, sets);
  const auto records = evaluate_checkpoint(ck, cfg.eval);
  const fs::path path = out.empty() ? fs::path(checkpoint).parent_path() / "eval.jsonl" : fs::path(out);
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  write_eval_log(path, records);
  std::cerr << records.size() << " records -> " << path.string() << "\n";
  return 0;
}

int cmd_pareto(const std::vector<std::string>& logs, const std::string& json_out) {
  std::vector<EvalRecord> records;
  for (const auto& p : logs) {
    const auto recs = eval_records(read_log(fs::path(p)));
    records.insert(records.end(), recs.begin(), recs.end());
  }
  const auto rep = build_report(records);
  std::cout << report_to_text(rep);
  if (!json_out.empty()) {
    std::ofstream f(json_out);
    if (!f) throw Error(Errc::io, "cannot write " + json_out);
    f << report_to_json(rep).dump(2) << '\n';
  }
  return 0;
}

int cmd_audio(const std::string& wav, const std::vector<std::string>& segs, const std::string& noise,
              double pa_per_unit) {
  const auto clip = read_wav(wav);
  Calibration cal;
  cal.pa_per_unit = pa_per_unit;
  std::vector<Segment> segments;
  for (const auto& s : segs) segments.push_back(parse_segment(s));
  if (segments.empty()) segments.push_back({0.0, clip.duration_s()});
  std::optional<Segment> env;
  if (!noise.empty()) env = parse_segment(noise);

  const auto level = [&](double r) -> std::string {
    try {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f", spl_db(r, cal));
      return buf;
    } catch (const Error& e) {
      if (e.code() == Errc::undefined_level) return "undefined";
      throw;
    }
  };
  // Tab-separated; "undefined" marks a level that has no dB value (silence).
  std::cout << "start_s\tend_s\trms\tdb_spl\tnoise_subtracted_db\n";
  const double env_rms = env ? rms(clip, *env) : 0.0;
  for (const auto& s : segments) {
    const double r = rms(clip, s);
    std::string sub = "-";
    if (env) {
      if (s.start_s < env->end_s && env->start_s < s.end_s) {
        throw Error(Errc::out_of_range, "segment overlaps the noise segment");
      }
      sub = level(subtract_noise(r, env_rms));
    }
    std::printf("%.4f\t%.4f\t%.8g\t%s\t%s\n", s.start_s, s.end_s, r, level(r).c_str(), sub.c_str());
  }
  return 0;
}

struct ServeArgs {
  std::string checkpoint, bind = "127.0.0.1:8765";
  std::uint64_t seed = 0;
  double epsilon = 1.0, tick_rate = 50.0;
  std::optional<double> v_target;
  bool no_pacing = false;
};

int cmd_serve(const ServeArgs& a) {
  const auto ck = load_checkpoint<float>(a.checkpoint);
  SteerOptions opts;
  opts.seed = a.seed;
  opts.initial_epsilon = a.epsilon;
  opts.initial_v_target = a.v_target;
  opts.tick_rate_hz = a.tick_rate;
  opts.pacing = !a.no_pacing;
  SteerSession<float> session(ck.agent, ck.env, ck.cost, opts);
  server::ServerInfo info{file_hash(a.checkpoint), ck.method, QUIETSTEP_VERSION};
  server::SteerServer<float> srv(session, info);
  const auto [host, port] = server::parse_bind(a.bind);
  srv.start(host, port);
  std::cerr << "serving " << ck.method << " on " << host << ":" << srv.port() << " (" << a.tick_rate
            << " Hz, pacing " << (opts.pacing ? "on" : "off") << ")\n";

  std::signal(SIGINT, [](int) { g_interrupted = true; });
  std::signal(SIGTERM, [](int) { g_interrupted = true; });
  std::thread loop([&] { session.run(); });
  while (!g_interrupted && session.status() != SteerStatus::diverged) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  session.stop();
  loop.join();
  srv.stop();
  if (session.status() == SteerStatus::diverged) {
    std::cerr << "control loop stopped: " << session.status_message() << "\n";
    return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quietstep: noise-constrained locomotion policies with adjustable noise budgets"};
  app.set_version_flag("--version", std::string(QUIETSTEP_VERSION));
  app.require_subcommand(1);

  TrainArgs ta;
  std::uint64_t train_seed = 0;
  auto* train = app.add_subcommand("train", "train a policy and write checkpoint, metrics log and manifest");
  train->add_option("--config", ta.config, "experiment config (YAML); defaults when omitted")->check(CLI::ExistingFile);
  train->add_option("--mode", ta.mode, "cncp | conc | rc | ppo | oracle_safe[:eps] | oracle_morl:beta")
      ->capture_default_str();
  auto* seed_opt = train->add_option("--seed", train_seed, "overrides trainer.seed");
  train->add_option("--out", ta.out, "output directory (default $QUIETSTEP_OUT or ./runs)");
  train->add_option("--set", ta.sets, "override a config field, e.g. --set trainer.iterations=100");
  train->add_option("--manifest", ta.manifest, "repeat the run recorded in a manifest.json")
      ->check(CLI::ExistingFile)->excludes("--config");
  train->add_flag("--quiet", ta.quiet, "no progress lines");

  std::string ev_ck, ev_cfg, ev_out;
  std::vector<std::string> ev_sets;
  auto* eval = app.add_subcommand("eval", "deterministic evaluation over the (epsilon, v_target, seed) grid");
  eval->add_option("--checkpoint", ev_ck, "checkpoint.json")->required()->check(CLI::ExistingFile);
  eval->add_option("--config", ev_cfg, "config providing the eval grid")->check(CLI::ExistingFile);
  eval->add_option("--set", ev_sets, "override a config field");
  eval->add_option("--out", ev_out, "eval log (default: eval.jsonl next to the checkpoint)");

  std::vector<std::string> logs;
  std::string pareto_json;
  auto* pareto = app.add_subcommand("pareto", "cost violation, tracking error, hypervolume and sparsity report");
  pareto->add_option("logs", logs, "eval logs")->required()->check(CLI::ExistingFile);
  pareto->add_option("--json", pareto_json, "also write the report as JSON");

  std::string wav, noise;
  std::vector<std::string> segs;
  double pa_per_unit = 1.0;
  auto* audio = app.add_subcommand("audio", "RMS and dB SPL of WAV segments");
  audio->add_option("wav", wav, "PCM WAV file")->required();
  audio->add_option("--segment", segs, "start:end seconds (repeatable; default whole clip)");
  audio->add_option("--noise", noise, "start:end of an ambient-only segment to subtract");
  audio->add_option("--pa-per-unit", pa_per_unit, "pascals per full-scale unit")->capture_default_str();

  ServeArgs sa;
  double serve_vt = 0.0;
  auto* serve = app.add_subcommand("serve", "live steering service (HTTP + WebSocket)");
  serve->add_option("--checkpoint", sa.checkpoint, "checkpoint.json")->required();
  serve->add_option("--bind", sa.bind, "host:port")->capture_default_str();
  serve->add_option("--seed", sa.seed, "rollout seed")->capture_default_str();
  serve->add_option("--epsilon", sa.epsilon, "initial noise budget")->capture_default_str();
  auto* vt_opt = serve->add_option("--v-target", serve_vt, "initial target velocity, m/s");
  serve->add_option("--tick-rate", sa.tick_rate, "simulated ticks per second")->capture_default_str();
  serve->add_flag("--no-pacing", sa.no_pacing, "run as fast as possible instead of real time");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      if (*seed_opt) ta.seed = train_seed;
      return cmd_train(ta);
    }
    if (*eval) return cmd_eval(ev_ck, ev_cfg, ev_sets, ev_out);
    if (*pareto) return cmd_pareto(logs, pareto_json);
    if (*audio) return cmd_audio(wav, segs, noise, pa_per_unit);
    if (*serve) {
      if (*vt_opt) sa.v_target = serve_vt;
      return cmd_serve(sa);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
