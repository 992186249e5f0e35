// physkit command-line entry point. See docs/cli.md.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "physkit/annotate.hpp"
#include "physkit/asset_io.hpp"
#include "physkit/cfm.hpp"
#include "physkit/config.hpp"
#include "physkit/error.hpp"
#include "physkit/fixtures.hpp"
#include "physkit/geometry.hpp"
#include "physkit/kinematics.hpp"
#include "physkit/manifest.hpp"
#include "physkit/metrics.hpp"
#include "physkit/physfeat.hpp"
#include "physkit/pipeline.hpp"
#include "physkit/procgen.hpp"
#include "physkit/rng.hpp"
#include "physkit/service.hpp"
#include "physkit/vlm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace physkit;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitBackend = 3;
constexpr int kExitInternal = 1;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::BackendUnavailable:
    case Errc::RateLimited:
    case Errc::Timeout:
    case Errc::EmbedderUnavailable: return kExitBackend;
    case Errc::Divergence:
    case Errc::IoError: return kExitInternal;
    default: return kExitValidation;
  }
}

struct Globals {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string config_file;
  bool force = false;
  std::string log_level = "info";
  std::string timestamp;
};

RunConfig effective_config(const Globals& g) {
  RunConfig cfg = g.config_file.empty() ? RunConfig{} : load_config(g.config_file);
  if (g.seed_given) apply_seed(cfg, g.seed);
  return cfg;
}

Clock make_clock(const Globals& g) {
  if (g.timestamp.empty()) return utc_now_iso;
  const std::string ts = g.timestamp;
  return [ts] { return ts; };
}

// Runs `body` under a manifest unless an identical earlier run is complete.
int run_job(const Globals& g, const RunConfig& cfg, const std::string& command, const json& options,
            const std::vector<std::string>& inputs, const std::vector<std::string>& outputs,
            const std::function<void()>& body) {
  JobManifest m;
  m.command = command;
  m.inputs = inputs;
  m.config_hash = json_hash(json{{"command", command}, {"options", options}, {"config", config_to_json(cfg)}});
  m.input_hash = hash_inputs(inputs);
  m.seed = cfg.seed;
  m.outputs = outputs;
  const fs::path primary = outputs.front();
  if (!g.force && is_up_to_date(read_manifest(primary), m)) {
    spdlog::info("{}: outputs up to date, skipping (use --force to rerun)", command);
    m.status = "skipped";
    write_manifest(m, primary);
    return kExitOk;
  }
  try {
    body();
  } catch (const Error& e) {
    m.status = "failed";
    m.error = e.what();
    write_manifest(m, primary);
    throw;
  }
  m.status = "ok";
  write_manifest(m, primary);
  return kExitOk;
}

std::vector<std::string> asset_dirs_under(const fs::path& root) {
  std::vector<std::string> out;
  if (!fs::is_directory(root)) throw Error(Errc::MissingFile, root.string());
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory() && fs::exists(e.path() / "asset.json")) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

KinematicConstraint parse_pair(const std::string& text) {
  static const std::regex kPair(R"((\d+):(\d+):([A-Za-z]+))");
  std::smatch m;
  if (!std::regex_match(text, m, kPair)) {
    throw Error(Errc::InvalidArgument, "pair must look like CHILD:PARENT:KIND, got '" + text + "'");
  }
  const auto kind = parse_kind(m[3].str());
  if (!kind || !has_parent_child(*kind)) throw Error(Errc::InvalidArgument, "pair kind must be B, C, D or CB");
  KinematicConstraint c;
  c.kind = *kind;
  c.child_part = std::stoi(m[1]);
  c.parent_part = std::stoi(m[2]);
  return c;
}

ObjectAsset load_any(const fs::path& dir) {
  LoadOptions lo;
  lo.validation.require_normalized = false;
  return load_asset(dir, lo);
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("physkit");
  spdlog::set_default_logger(logger);

  CLI::App app{"physkit: physical asset annotation, kinematics and evaluation tools"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every stochastic step")->each([&](const std::string&) { g.seed_given = true; });
  app.add_option("--config", g.config_file, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_flag("--force", g.force, "Rerun even when the manifest says outputs are current");
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.add_option("--timestamp", g.timestamp, "Fixed timestamp for review-log events (reproducible runs)");

  // normalize
  std::string in_dir, out_path;
  auto* normalize = app.add_subcommand("normalize", "Center and scale an asset into [-1, 1]^3");
  normalize->add_option("input", in_dir, "Asset directory")->required();
  normalize->add_option("--out", out_path, "Output asset directory")->required();

  // merge
  auto* merge = app.add_subcommand("merge", "Absorb tiny parts into their nearest neighbour");
  merge->add_option("input", in_dir, "Asset directory")->required();
  merge->add_option("--out", out_path, "Output asset directory")->required();

  // annotate
  std::string mock_dir, endpoint;
  bool approve = false, estimate_after = false;
  auto* annotate = app.add_subcommand("annotate", "Render part prompts, query the VLM and parse its answer");
  annotate->add_option("input", in_dir, "Asset directory")->required();
  annotate->add_option("--out", out_path, "Output asset directory")->required();
  auto* mock_opt = annotate->add_option("--mock", mock_dir, "Offline responses directory")->check(CLI::ExistingDirectory);
  annotate->add_option("--endpoint", endpoint, "OpenAI-compatible base URL")->excludes(mock_opt);
  annotate->add_flag("--approve", approve, "Record approval immediately (headless review)");
  annotate->add_flag("--estimate", estimate_after, "After approval, estimate and auto-select every joint");

  // estimate
  std::vector<std::string> pairs;
  bool auto_select = false, update_asset = false;
  auto* estimate = app.add_subcommand("estimate", "Generate axis/pivot candidates for movable pairs");
  estimate->add_option("input", in_dir, "Asset directory")->required();
  estimate->add_option("--out", out_path, "Output JSON file")->required();
  estimate->add_option("--pair", pairs, "CHILD:PARENT:KIND (repeatable; default: stubs.json, then constraints)");
  estimate->add_flag("--auto-select", auto_select, "Finalize the top candidate of each pair");
  estimate->add_flag("--update-asset", update_asset, "Write finalized constraints back into the asset")
      ->needs(estimate->get_option("--auto-select"));

  // procgen
  std::string bases_dir, components_dir, mode_text = "cross";
  int limit = -1;
  auto* procgen = app.add_subcommand("procgen", "Compose new assets from bases and donor components");
  procgen->add_option("--bases", bases_dir, "Directory of base assets")->required()->check(CLI::ExistingDirectory);
  procgen->add_option("--components", components_dir, "Directory of donor assets")->required()->check(CLI::ExistingDirectory);
  procgen->add_option("--mode", mode_text, "intra or cross")->check(CLI::IsMember({"intra", "cross"}));
  procgen->add_option("--out", out_path, "Output directory")->required();
  procgen->add_option("--limit", limit, "Stop after this many composed assets");

  // voxelize
  int resolution = -1;
  bool normalize_channels_flag = false;
  std::string embed;
  auto* voxelize_cmd = app.add_subcommand("voxelize", "Per-voxel physical feature grid");
  voxelize_cmd->add_option("input", in_dir, "Asset directory")->required();
  voxelize_cmd->add_option("--out", out_path, "Output .vox file")->required();
  voxelize_cmd->add_option("--resolution", resolution, "Grid resolution (default from config)");
  voxelize_cmd->add_flag("--normalize", normalize_channels_flag, "Store normalized channels");
  voxelize_cmd->add_option("--embed", embed, "'hashing' or an embedder URL; attaches description embeddings");

  // evaluate
  std::string pred_dir, gt_dir, csv_path;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Compare predicted and ground-truth assets");
  evaluate_cmd->add_option("--pred", pred_dir, "Predicted asset (or directory of assets)")->required();
  evaluate_cmd->add_option("--gt", gt_dir, "Ground-truth asset (or directory of assets)")->required();
  evaluate_cmd->add_option("--out", out_path, "Report JSON (default: stdout only)");
  evaluate_cmd->add_option("--csv", csv_path, "Per-asset CSV table");

  // cfm-toy
  std::string ckpt, trace_path;
  int n_samples = 256, sample_steps = -1;
  auto* cfm = app.add_subcommand("cfm-toy", "Flow-matching toy on a 2D Gaussian mixture");
  cfm->require_subcommand(1);
  auto* cfm_train = cfm->add_subcommand("train", "Train a velocity field");
  cfm_train->add_option("--out", ckpt, "Checkpoint file")->required();
  cfm_train->add_option("--trace", trace_path, "Loss trace CSV");
  auto* cfm_sample = cfm->add_subcommand("sample", "Euler-integrate noise to samples");
  cfm_sample->add_option("--checkpoint", ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  cfm_sample->add_option("--n", n_samples, "Number of samples")->check(CLI::PositiveNumber);
  cfm_sample->add_option("--steps", sample_steps, "Euler steps (default from config)");
  cfm_sample->add_option("--out", out_path, "Output CSV")->required();

  // serve
  std::string root_dir, host = "127.0.0.1";
  int port = 8080;
  auto* serve = app.add_subcommand("serve", "HTTP service for the review UI");
  serve->add_option("--root", root_dir, "Directory of asset directories")->required()->check(CLI::ExistingDirectory);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");

  // fixtures
  bool with_oracle = false;
  auto* fixtures_cmd = app.add_subcommand("fixtures", "Write the synthetic fixture assets and scripted VLM answers");
  fixtures_cmd->add_option("--out", out_path, "Output directory")->required();
  fixtures_cmd->add_flag("--oracle-sets", with_oracle, "Also write the procgen oracle bases and donors");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kExitValidation;
  }
  spdlog::set_level(spdlog::level::from_str(g.log_level));

  try {
    const RunConfig cfg = effective_config(g);

    if (*normalize) {
      return run_job(g, cfg, "normalize", json{{"input", in_dir}}, {in_dir}, {out_path}, [&] {
        save_asset(normalize_object(load_any(in_dir)), out_path);
      });
    }
    if (*merge) {
      return run_job(g, cfg, "merge", json{{"input", in_dir}}, {in_dir}, {out_path}, [&] {
        const MergeResult r = merge_tiny_parts(load_asset(in_dir), cfg.merge, cfg.seed);
        save_asset(r.asset, out_path);
        json report{{"absorbed", r.absorbed}, {"isolated", r.isolated}, {"id_map", json::object()}};
        for (const auto& [from, to] : r.id_map) report["id_map"][std::to_string(from)] = to;
        write_text_file(fs::path(out_path) / "merge_report.json", canonical_dump(report));
      });
    }
    if (*annotate) {
      if (mock_dir.empty() && endpoint.empty()) throw Error(Errc::InvalidArgument, "annotate needs --mock or --endpoint");
      if (estimate_after && !approve) throw Error(Errc::InvalidArgument, "--estimate requires --approve");
      const json opts{{"input", in_dir}, {"mock", mock_dir}, {"endpoint", endpoint}, {"approve", approve},
                      {"estimate", estimate_after}, {"timestamp", g.timestamp}};
      std::vector<std::string> inputs{in_dir};
      if (!mock_dir.empty()) inputs.push_back(mock_dir);
      return run_job(g, cfg, "annotate", opts, inputs, {out_path}, [&] {
        const fs::path out(out_path);
        fs::remove_all(out);
        fs::create_directories(out);
        std::unique_ptr<VlmBackend> backend;
        if (!mock_dir.empty()) {
          backend = std::make_unique<MockBackend>(mock_dir);
        } else {
          HttpBackendConfig hc = cfg.vlm_http;
          hc.endpoint = endpoint;
          backend = std::make_unique<HttpBackend>(hc);
        }
        ReviewLog log(out / kReviewLogFile, make_clock(g));
        PipelineOptions po;
        po.config = cfg;
        po.auto_approve = approve;
        po.auto_estimate = estimate_after;
        const PipelineResult r = run_annotation(load_any(in_dir), *backend, log, po);
        write_annotation_outputs(r, out);
        for (int pid : r.prompt.occlusion_warnings) spdlog::warn("part {} is hidden in every prompt view", pid);
      });
    }
    if (*estimate) {
      const json opts{{"input", in_dir}, {"pairs", pairs}, {"auto_select", auto_select}, {"update_asset", update_asset}};
      return run_job(g, cfg, "estimate", opts, {in_dir}, {out_path}, [&] {
        ObjectAsset asset = load_asset(in_dir);
        std::vector<KinematicConstraint> todo;
        for (const auto& p : pairs) todo.push_back(parse_pair(p));
        if (todo.empty()) todo = load_stubs(in_dir);
        if (todo.empty()) {
          for (const auto& c : asset.constraints) {
            if (has_parent_child(c.kind)) todo.push_back(c);
          }
        }
        if (todo.empty()) throw Error(Errc::InvalidArgument, "no movable pairs: pass --pair or provide stubs.json");
        json out;
        if (auto_select) {
          const ObjectAsset estimated = estimate_stubs(asset, todo, cfg.kinematics);
          json cs = json::array();
          for (const auto& stub : todo) cs.push_back(constraint_to_json(*estimated.constraint_for_child(*stub.child_part)));
          out["constraints"] = cs;
          if (update_asset) {
            save_asset(estimated, in_dir);
            auto stubs = load_stubs(in_dir);
            std::erase_if(stubs, [&](const KinematicConstraint& s) {
              return std::any_of(todo.begin(), todo.end(), [&](const auto& t) { return t.child_part == s.child_part; });
            });
            if (fs::exists(fs::path(in_dir) / kStubsFile)) save_stubs(stubs, in_dir);
          }
        } else {
          json ps = json::array();
          for (const auto& stub : todo) {
            const EstimateDetail d =
                estimate_detailed(asset, *stub.child_part, *stub.parent_part, stub.kind, cfg.kinematics);
            json cands = json::array();
            for (const auto& c : d.candidates) cands.push_back(candidate_to_json(c));
            ps.push_back(json{{"child", *stub.child_part},
                              {"parent", *stub.parent_part},
                              {"kind", std::string(to_string(stub.kind))},
                              {"candidates", cands}});
          }
          out["pairs"] = ps;
        }
        write_text_file(out_path, canonical_dump(out));
      });
    }
    if (*procgen) {
      const json opts{{"bases", bases_dir}, {"components", components_dir}, {"mode", mode_text}, {"limit", limit}};
      return run_job(g, cfg, "procgen", opts, {bases_dir, components_dir}, {out_path}, [&] {
        const auto mode = parse_procgen_mode(mode_text);
        std::vector<std::pair<std::string, ObjectAsset>> bases, donors;
        for (const auto& id : asset_dirs_under(bases_dir)) bases.emplace_back(id, load_asset(fs::path(bases_dir) / id));
        for (const auto& id : asset_dirs_under(components_dir)) {
          donors.emplace_back(id, load_asset(fs::path(components_dir) / id));
        }
        std::vector<NamedAsset> nb, nd;
        for (const auto& [id, a] : bases) nb.push_back({id, &a});
        for (const auto& [id, a] : donors) nd.push_back({id, &a});
        auto find = [](const auto& list, const std::string& id) -> const ObjectAsset& {
          for (const auto& [i, a] : list) {
            if (i == id) return a;
          }
          throw Error(Errc::UnknownPart, id);
        };
        const fs::path out(out_path);
        fs::create_directories(out);
        std::string manifest;
        int produced = 0;
        const PlanStats stats = enumerate_plans(
            nb, nd, *mode,
            [&](const GenPlan& plan) {
              if (limit >= 0 && produced >= limit) return;
              const std::string id = plan.base_asset_id + "__" + plan.component_asset_id;
              const ObjectAsset composed =
                  compose(find(bases, plan.base_asset_id), find(donors, plan.component_asset_id), plan);
              save_asset(composed, out / id);
              json line = plan_to_json(plan);
              line["output_id"] = id;
              manifest += line.dump() + "\n";
              ++produced;
            },
            cfg.procgen);
        write_text_file(out / "plans.jsonl", manifest);
        spdlog::info("procgen: {} pairs considered, {} compatible, {} written", stats.considered, stats.produced,
                     produced);
      });
    }
    if (*voxelize_cmd) {
      const json opts{{"input", in_dir}, {"resolution", resolution}, {"normalize", normalize_channels_flag},
                      {"embed", embed}};
      return run_job(g, cfg, "voxelize", opts, {in_dir}, {out_path}, [&] {
        const ObjectAsset asset = load_asset(in_dir);
        VoxelizeOptions vo = cfg.voxel;
        if (resolution > 0) vo.resolution = resolution;
        VoxelGrid grid = voxelize(asset, vo);
        if (!embed.empty()) {
          std::unique_ptr<TextEmbedder> embedder;
          if (embed == "hashing") embedder = std::make_unique<HashingEmbedder>();
          else embedder = std::make_unique<HttpEmbedder>(embed);
          attach_semantics(grid, asset, *embedder);
        }
        if (normalize_channels_flag) grid = normalize_channels(std::move(grid));
        write_voxels(grid, out_path);
        spdlog::info("voxelize: {} occupied voxels at resolution {}", grid.size(), grid.resolution);
      });
    }
    if (*evaluate_cmd) {
      std::vector<std::pair<std::string, std::pair<fs::path, fs::path>>> jobs;
      if (fs::exists(fs::path(pred_dir) / "asset.json")) {
        jobs.push_back({fs::path(gt_dir).filename().string(), {pred_dir, gt_dir}});
      } else {
        for (const auto& id : asset_dirs_under(gt_dir)) {
          if (!fs::exists(fs::path(pred_dir) / id / "asset.json")) throw Error(Errc::MissingFile, (fs::path(pred_dir) / id).string());
          jobs.push_back({id, {fs::path(pred_dir) / id, fs::path(gt_dir) / id}});
        }
      }
      auto body = [&] {
        std::vector<std::pair<std::string, MetricReport>> rows;
        json all = json::object();
        for (const auto& [id, paths] : jobs) {
          const MetricReport r = evaluate(load_asset(paths.first), load_asset(paths.second), cfg.eval);
          rows.emplace_back(id, r);
          all[id] = report_to_json(r);
        }
        const json doc = jobs.size() == 1 ? report_to_json(rows.front().second) : all;
        std::cout << doc.dump(2) << "\n";
        if (!out_path.empty()) write_text_file(out_path, canonical_dump(doc));
        if (!csv_path.empty()) write_text_file(csv_path, reports_to_csv(rows));
      };
      if (out_path.empty()) {
        body();
        return kExitOk;
      }
      return run_job(g, cfg, "evaluate", json{{"pred", pred_dir}, {"gt", gt_dir}, {"csv", csv_path}},
                     {pred_dir, gt_dir}, {out_path}, body);
    }
    if (*cfm_train) {
      return run_job(g, cfg, "cfm-toy train", json{{"trace", trace_path}}, {}, {ckpt}, [&] {
        const CfmToyConfig& t = cfg.cfm_toy;
        const auto data = sample_mixture(t.mixture, t.data_points, derive_seed(t.train.seed, 7));
        std::unique_ptr<FieldModel> model;
        if (t.model == "linear") model = std::make_unique<LinearField>(t.mixture.dim);
        else model = std::make_unique<MlpField>(t.mixture.dim, t.hidden);
        init_params(*model, derive_seed(t.train.seed, 8));
        try {
          const TrainResult r = train(*model, data, t.train);
          if (!trace_path.empty()) write_text_file(trace_path, trace_to_csv(r.trace));
          spdlog::info("cfm-toy: loss {:.4f} -> {:.4f} (smoothed)", r.initial_loss(), r.final_smoothed());
        } catch (const DivergenceError& e) {
          if (!trace_path.empty()) write_text_file(trace_path, trace_to_csv(e.trace()));
          throw;
        }
        save_checkpoint(*model, ckpt);
      });
    }
    if (*cfm_sample) {
      return run_job(g, cfg, "cfm-toy sample", json{{"n", n_samples}, {"steps", sample_steps}}, {ckpt}, {out_path}, [&] {
        const auto model = load_checkpoint(ckpt);
        const int steps = sample_steps > 0 ? sample_steps : cfg.cfm_toy.sample_steps;
        Rng rng(derive_seed(cfg.seed, 9));
        std::string csv;
        for (int d = 0; d < model->dim(); ++d) csv += (d ? ",x" : "x") + std::to_string(d);
        csv += "\n";
        std::vector<double> eps(model->dim());
        for (int i = 0; i < n_samples; ++i) {
          for (double& e : eps) e = rng.normal();
          const auto x = euler_sample(*model, eps, steps);
          for (int d = 0; d < model->dim(); ++d) csv += fmt::format("{}{:.9g}", d ? "," : "", x[d]);
          csv += "\n";
        }
        write_text_file(out_path, csv);
      });
    }
    if (*serve) {
      ServiceOptions so;
      so.root = root_dir;
      so.config = cfg;
      so.clock = make_clock(g);
      static ReviewService* running = nullptr;
      ReviewService service(so);
      running = &service;
      std::signal(SIGINT, [](int) {
        if (running) running->stop();
      });
      spdlog::info("serving {} on http://{}:{}", root_dir, host, port);
      if (!service.listen(host, port)) throw Error(Errc::IoError, fmt::format("cannot listen on {}:{}", host, port));
      return kExitOk;
    }
    if (*fixtures_cmd) {
      return run_job(g, cfg, "fixtures", json{{"oracle_sets", with_oracle}}, {}, {out_path}, [&] {
        const fs::path out(out_path);
        for (const auto& name : fixtures::fixture_names()) {
          const fixtures::Fixture f = fixtures::by_name(name);
          save_asset(f.asset, out / "assets" / name);
          // Scripted answer for the pipeline's merged view of the asset.
          const MergeResult merged = merge_tiny_parts(normalize_object(f.asset), cfg.merge, cfg.seed);
          const fs::path mock = out / "mock" / name;
          fs::create_directories(mock);
          write_text_file(mock / "default.json", canonical_dump(raw_to_json(raw_from_asset(merged.asset))));
        }
        if (with_oracle) {
          const auto bases = fixtures::oracle_base_specs();
          const auto donors = fixtures::oracle_donor_specs();
          for (std::size_t i = 0; i < bases.size(); ++i) {
            save_asset(fixtures::make_base(bases[i]), out / "oracle_bases" / fmt::format("base_{:02}", i));
          }
          for (std::size_t i = 0; i < donors.size(); ++i) {
            save_asset(fixtures::make_donor(donors[i]), out / "oracle_donors" / fmt::format("donor_{:02}", i));
          }
        }
      });
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    spdlog::error("internal error: {}", e.what());
    return kExitInternal;
  }
  return kExitOk;
}
