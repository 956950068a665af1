/* Copyright 2026 The DVG Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "dvg/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <map>

#include "dvg/binary_io.hpp"
#include "dvg/checkpoint.hpp"
#include "dvg/dual_vae.hpp"
#include "dvg/error.hpp"

namespace dvg::cli {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void say(const StageOptions& o, const std::string& line) {
  if (o.progress) *o.progress << line << std::endl;
}

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void write_log(const ExperimentConfig& config, Stage stage, double wall, json summary,
               json steps = json::array()) {
  json log;
  log["stage"] = stage_name(stage);
  log["config_hash"] = hex(stage_hash(config, stage));
  log["wall_seconds"] = wall;
  log["config"] = to_json(config);
  log["summary"] = std::move(summary);
  log["steps"] = std::move(steps);
  io::write_file(RunPaths{config.output_dir}.log(stage), log.dump(1) + "\n");
}

std::optional<std::uint64_t> expect(const ExperimentConfig& config, Stage stage, const StageOptions& o) {
  if (o.force) return std::nullopt;
  return stage_hash(config, stage);
}

synth::PairedDataset load_split(const fs::path& dir, const ExperimentConfig& config, Stage stage,
                                const StageOptions& o) {
  synth::PairedDataset data = synth::load_dataset(dir);
  const std::string want = hex(stage_hash(config, stage));
  if (!o.force && data.config_hash != want) {
    throw LineageError(dir.string() + ": produced by config " + data.config_hash +
                       ", current config is " + want);
  }
  return data;
}

ckpt::Checkpoint load_kind(const fs::path& path, const char* kind, const ExperimentConfig& config,
                           Stage stage, const StageOptions& o) {
  ckpt::Checkpoint c = ckpt::load_checkpoint(path.string(), expect(config, stage, o));
  if (c.kind != kind) {
    throw FormatError(path.string() + ": holds a '" + c.kind + "' checkpoint, expected '" + kind + "'");
  }
  return c;
}

bool complete(const ckpt::Checkpoint& c) {
  return json::parse(c.meta.empty() ? "{}" : c.meta).value("complete", false);
}

// The stored weights with the given training-time dropout.
hfr::Recognizer load_fip_model(const ExperimentConfig& config, const StageOptions& o, double dropout = 0.0) {
  RandomSource scratch(0);
  hfr::Recognizer model(config.recognizer_spec(dropout), scratch);
  const auto c = load_kind(RunPaths{config.output_dir}.fip(), "fip", config, Stage::kFip, o);
  c.restore_parameters(model.parameters());
  return model;
}

vae::GeneratorBundle load_generator(const ExperimentConfig& config, const StageOptions& o) {
  const auto c = load_kind(RunPaths{config.output_dir}.dvg(), "dvg", config, Stage::kDvg, o);
  if (!complete(c)) throw MissingArtifactError(RunPaths{config.output_dir}.dvg().string() + ": training did not finish");
  RandomSource scratch(0);
  vae::GeneratorBundle bundle(config.generator_spec(), scratch, config.weights);
  c.restore_parameters(bundle.parameters());
  return bundle;
}

double mean_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  double s = 0.0;
  for (std::size_t i = begin; i < end; ++i) s += v[i];
  return s / static_cast<double>(end - begin);
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void synth_data(const ExperimentConfig& config, const StageOptions& o) {
  Stopwatch clock;
  synth::BuildConfig b = config.data;
  b.seed = config.seed;
  const RunPaths paths{config.output_dir};
  const auto built = synth::build_dataset(b, paths.root / "data", hex(stage_hash(config, Stage::kData)));
  say(o, "synth-data: " + std::to_string(built.train.size()) + " train pairs, " +
             std::to_string(built.test.size()) + " test pairs");
  write_log(config, Stage::kData, clock.seconds(),
            {{"train_pairs", built.train.size()}, {"test_pairs", built.test.size()}});
}

void pretrain_fip(const ExperimentConfig& config, const StageOptions& o) {
  Stopwatch clock;
  const RunPaths paths{config.output_dir};
  const auto train = load_split(paths.train(), config, Stage::kData, o);
  say(o, "pretrain-fip: " + std::to_string(config.fip.steps) + " steps");
  const hfr::FipResult r =
      hfr::pretrain_fip(train, config.recognizer_spec(config.fip_dropout), config.fip, RandomSource(config.seed).derive("fip"));
  ckpt::Checkpoint c;
  c.kind = "fip";
  c.config_hash = stage_hash(config, Stage::kFip);
  c.step = config.fip.steps;
  const json summary = {{"heldout_top1_v", r.heldout_top1_v}, {"heldout_top1_n", r.heldout_top1_n}};
  c.meta = json{{"complete", true}, {"summary", summary}}.dump();
  c.add_parameters(r.model.parameters());
  ckpt::save_checkpoint(paths.fip().string(), c);
  say(o, "pretrain-fip: held-out top-1 V " + std::to_string(r.heldout_top1_v) + ", N " +
             std::to_string(r.heldout_top1_n));
  write_log(config, Stage::kFip, clock.seconds(), summary);
}

void train_dvg(const ExperimentConfig& config, const StageOptions& o) {
  Stopwatch clock;
  const RunPaths paths{config.output_dir};
  const auto train = load_split(paths.train(), config, Stage::kData, o);
  const hfr::Recognizer fip_model = load_fip_model(config, o);
  const FrozenTrunk fip = fip_model.freeze();

  const RandomSource stream = RandomSource(config.seed).derive("dvg");
  RandomSource init = stream.derive("init");
  vae::DvgTrainer trainer(vae::GeneratorBundle(config.generator_spec(), init, config.weights), fip, train,
                          config.dvg, stream.derive("train"));
  const std::uint64_t hash = stage_hash(config, Stage::kDvg);

  std::size_t resumed_from = 0;
  if (o.resume && fs::exists(paths.dvg())) {
    const auto c = load_kind(paths.dvg(), "dvg", config, Stage::kDvg, o);
    c.restore_parameters(trainer.bundle().parameters());
    trainer.generator_optimizer() = Optimizer(c.optimizer("generator"));
    trainer.discriminator_optimizer() = Optimizer(c.optimizer("discriminator"));
    trainer.rng() = c.rng("train");
    trainer.set_step_index(c.step);
    resumed_from = c.step;
    say(o, "train-dvg: resuming at step " + std::to_string(c.step));
  }

  auto save = [&](bool done) {
    ckpt::Checkpoint c;
    c.kind = "dvg";
    c.config_hash = hash;
    c.step = trainer.step_index();
    c.meta = json{{"complete", done}}.dump();
    c.add_parameters(trainer.bundle().parameters());
    c.optimizers.emplace_back("generator", trainer.generator_optimizer().state());
    c.optimizers.emplace_back("discriminator", trainer.discriminator_optimizer().state());
    c.rngs.emplace_back("train", trainer.rng());
    ckpt::save_checkpoint(paths.dvg().string(), c);
  };

  json steps = json::array();
  while (!trainer.done()) {
    const vae::DvgStepLog l = trainer.step();
    const std::size_t s = trainer.step_index();
    steps.push_back({{"step", s},         {"rec", l.rec},         {"kl", l.kl},
                     {"adv_gen", l.adv_gen}, {"adv_disc", l.adv_disc}, {"dist", l.dist},
                     {"ip_pair", l.ip_pair}, {"ip_rec", l.ip_rec},   {"div", l.div},
                     {"div_ratio", l.div_ratio}, {"total", l.total}});
    if (s % config.checkpoint_every == 0 && !trainer.done()) save(false);
    if (s % 500 == 0) say(o, "train-dvg: step " + std::to_string(s) + " total " + std::to_string(l.total));
    if (o.stop_after && s >= *o.stop_after && !trainer.done()) {
      save(false);
      say(o, "train-dvg: stopped at step " + std::to_string(s));
      return;
    }
  }
  save(true);
  write_log(config, Stage::kDvg, clock.seconds(), {{"steps", trainer.step_index()}, {"resumed_from", resumed_from}},
            std::move(steps));
}

void generate(const ExperimentConfig& config, const StageOptions& o) {
  Stopwatch clock;
  if (config.pool_size == 0) throw ConfigError("pool.size is 0, nothing to generate");
  const RunPaths paths{config.output_dir};
  const vae::GeneratorBundle bundle = load_generator(config, o);
  RandomSource rng = RandomSource(config.seed).derive("pool");
  synth::PairedDataset pool = vae::sample_pairs(bundle, config.pool_size, rng);
  pool.config_hash = hex(stage_hash(config, Stage::kPool));
  synth::save_split(pool, paths.pool());
  say(o, "generate: " + std::to_string(pool.size()) + " pairs");
  write_log(config, Stage::kPool, clock.seconds(), {{"pairs", pool.size()}});
}

void train_hfr(const ExperimentConfig& config, const StageOptions& o) {
  Stopwatch clock;
  const RunPaths paths{config.output_dir};
  const auto train = load_split(paths.train(), config, Stage::kData, o);
  std::optional<synth::PairedDataset> pool;
  if (!config.is_baseline()) pool = load_split(paths.pool(), config, Stage::kPool, o);

  const RandomSource stream = RandomSource(config.seed).derive("hfr");
  hfr::Recognizer model;
  if (config.hfr_init == "fip") {
    model = load_fip_model(config, o, config.hfr_dropout);
  } else {
    RandomSource init = stream.derive("init");
    model = hfr::Recognizer(config.recognizer_spec(config.hfr_dropout), init);
  }
  hfr::HfrTrainer trainer(std::move(model), train, pool ? &*pool : nullptr, config.hfr, stream.derive("train"));
  const std::uint64_t hash = stage_hash(config, Stage::kHfr);

  std::size_t resumed_from = 0;
  if (o.resume && fs::exists(paths.hfr())) {
    const auto c = load_kind(paths.hfr(), "hfr", config, Stage::kHfr, o);
    c.restore_parameters(trainer.model().parameters());
    trainer.optimizer() = Optimizer(c.optimizer("sgd"));
    trainer.real_rng() = c.rng("real");
    trainer.pool_rng() = c.rng("pool");
    trainer.set_step_index(c.step);
    resumed_from = c.step;
    say(o, "train-hfr: resuming at step " + std::to_string(c.step));
  }

  auto save = [&](bool done) {
    ckpt::Checkpoint c;
    c.kind = "hfr";
    c.config_hash = hash;
    c.step = trainer.step_index();
    c.meta = json{{"complete", done}, {"label", config.is_baseline() ? "baseline" : "dvg"}}.dump();
    c.add_parameters(trainer.model().parameters());
    c.optimizers.emplace_back("sgd", trainer.optimizer().state());
    c.rngs.emplace_back("real", trainer.real_rng());
    c.rngs.emplace_back("pool", trainer.pool_rng());
    ckpt::save_checkpoint(paths.hfr().string(), c);
  };

  json steps = json::array();
  std::vector<double> pair_losses;
  while (!trainer.done()) {
    const hfr::HfrStepLog l = trainer.step();
    const std::size_t s = trainer.step_index();
    json row = {{"step", s}, {"cls", l.cls}, {"total", l.total}, {"lr", l.lr}};
    if (l.has_pair) {
      row["pair"] = l.pair;
      pair_losses.push_back(l.pair);
    }
    steps.push_back(std::move(row));
    if (s % config.checkpoint_every == 0 && !trainer.done()) save(false);
    if (s % 500 == 0) say(o, "train-hfr: step " + std::to_string(s) + " total " + std::to_string(l.total));
    if (o.stop_after && s >= *o.stop_after && !trainer.done()) {
      save(false);
      say(o, "train-hfr: stopped at step " + std::to_string(s));
      return;
    }
  }
  save(true);
  json summary = {{"steps", trainer.step_index()}, {"resumed_from", resumed_from}};
  if (!pair_losses.empty()) {
    const std::size_t tenth = std::max<std::size_t>(1, pair_losses.size() / 10);
    summary["pair_first_tenth"] = mean_of(pair_losses, 0, tenth);
    summary["pair_last_tenth"] = mean_of(pair_losses, pair_losses.size() - tenth, pair_losses.size());
  }
  write_log(config, Stage::kHfr, clock.seconds(), std::move(summary), std::move(steps));
}

void write_feature_dump(const fs::path& base, const Tensor& features, const std::string& source) {
  if (features.rank() != 2) throw ShapeError("feature dump needs a rank-2 tensor");
  io::Writer w;
  for (double v : features.data()) w.f32(static_cast<float>(v));
  fs::path bin = base, side = base;
  bin += ".f32";
  side += ".json";
  io::write_file(bin, w.buffer().data(), w.size());
  const json meta = {{"count", features.rows()}, {"dim", features.cols()}, {"source", source}};
  io::write_file(side, meta.dump(2) + "\n");
}

double mismatched_pair_distance(const Tensor& features_n, const Tensor& features_v,
                                const std::vector<std::uint32_t>& identity, RandomSource& rng) {
  const std::size_t n = features_n.rows();
  if (n == 0 || identity.size() != n || features_v.rows() != n) {
    throw ShapeError("mismatched_pair_distance: inconsistent inputs");
  }
  if (std::all_of(identity.begin(), identity.end(), [&](std::uint32_t id) { return id == identity[0]; })) {
    throw ConfigError("mismatched pairs need at least two identities");
  }
  std::vector<std::size_t> other(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t k;
    do {
      k = rng.below(n);
    } while (identity[k] == identity[i]);
    other[i] = k;
  }
  return metrics::mean_pair_distance(features_n, features_v.gather_rows(other));
}

Evaluation evaluate_recognizer(const hfr::Recognizer& recognizer, const FeatureExtractor& fip,
                               const synth::PairedDataset& train, const synth::PairedDataset& test,
                               const synth::PairedDataset* pool, std::size_t roc_points, RandomSource rng) {
  Evaluation e;
  e.label = pool ? "dvg" : "baseline";
  e.pool_size = pool ? pool->size() : 0;

  std::vector<std::size_t> gallery_rows, probe_rows;
  std::vector<std::uint32_t> gallery_ids, probe_ids;
  for (std::uint32_t id : test.identities()) {
    const auto rows = test.indices_of(id);
    gallery_rows.push_back(rows.front());
    gallery_ids.push_back(id);
    for (std::size_t k = 1; k < rows.size(); ++k) {
      probe_rows.push_back(rows[k]);
      probe_ids.push_back(id);
    }
  }
  if (probe_rows.empty()) throw ConfigError("evaluation needs at least 2 samples per test identity");
  const Tensor gallery = recognizer.extract_features(test.v_images.gather_rows(gallery_rows));
  const Tensor probe = recognizer.extract_features(test.n_images.gather_rows(probe_rows));
  e.rank1 = metrics::rank1(gallery, gallery_ids, probe, probe_ids);
  e.gallery_features = gallery;
  e.probe_features = probe;
  const metrics::ScoreSet scores = metrics::score_pairs(gallery, gallery_ids, probe, probe_ids);
  auto vr = [&](double far) -> std::optional<double> {
    if (static_cast<double>(scores.impostor.size()) * far < 1.0) return std::nullopt;
    return metrics::vr_at_far(scores, far);
  };
  e.vr_far_1pct = vr(0.01);
  e.vr_far_01pct = vr(0.001);
  e.roc = metrics::roc_curve(scores, roc_points);

  const Tensor fn = fip.embed(test.n_images);
  const Tensor fv = fip.embed(test.v_images);
  e.md_real = metrics::mean_pair_distance(fn, fv);
  e.md_mismatched = mismatched_pair_distance(fn, fv, test.identity, rng);

  if (pool) {
    const Tensor pn = fip.embed(pool->n_images);
    const Tensor pv = fip.embed(pool->v_images);
    e.md = metrics::mean_pair_distance(pn, pv);
    e.fid_n = metrics::frechet_distance(metrics::feature_stats(pn), metrics::feature_stats(fip.embed(train.n_images)));
    e.fid_v = metrics::frechet_distance(metrics::feature_stats(pv), metrics::feature_stats(fip.embed(train.v_images)));
    e.fid_mean = 0.5 * (*e.fid_n + *e.fid_v);
  }
  return e;
}

json metrics_json(const Evaluation& e, std::uint64_t config_hash) {
  json j;
  j["label"] = e.label;
  j["config_hash"] = hex(config_hash);
  j["pool_size"] = e.pool_size;
  j["md"] = optional_number(e.md);
  j["md_real"] = e.md_real;
  j["md_mismatched"] = e.md_mismatched;
  j["fid_n"] = optional_number(e.fid_n);
  j["fid_v"] = optional_number(e.fid_v);
  j["fid_mean"] = optional_number(e.fid_mean);
  j["rank1"] = e.rank1;
  j["vr_at_far_1pct"] = optional_number(e.vr_far_1pct);
  j["vr_at_far_0.1pct"] = optional_number(e.vr_far_01pct);
  return j;
}

void evaluate(const ExperimentConfig& config, const StageOptions& o) {
  Stopwatch clock;
  const RunPaths paths{config.output_dir};
  if (!fs::exists(paths.hfr())) throw MissingArtifactError("missing artifact: " + paths.hfr().string());
  const auto c = load_kind(paths.hfr(), "hfr", config, Stage::kHfr, o);
  if (!complete(c)) throw MissingArtifactError(paths.hfr().string() + ": training did not finish");
  RandomSource scratch(0);
  hfr::Recognizer model(config.recognizer_spec(config.hfr_dropout), scratch);
  c.restore_parameters(model.parameters());

  const auto train = load_split(paths.train(), config, Stage::kData, o);
  const auto test = load_split(paths.test(), config, Stage::kData, o);
  const hfr::Recognizer fip_model = load_fip_model(config, o);
  std::optional<synth::PairedDataset> pool;
  if (!config.is_baseline()) pool = load_split(paths.pool(), config, Stage::kPool, o);

  const Evaluation e = evaluate_recognizer(model, fip_model.freeze(), train, test, pool ? &*pool : nullptr,
                                           config.roc_points, RandomSource(config.seed).derive("eval"));
  const json m = metrics_json(e, stage_hash(config, Stage::kEval));
  io::write_file(paths.metrics(), m.dump(2) + "\n");
  io::write_file(paths.roc(), metrics::roc_csv(e.roc));
  write_feature_dump(paths.features() / "gallery_v", e.gallery_features, "test/gallery/V");
  write_feature_dump(paths.features() / "probe_n", e.probe_features, "test/probe/N");
  say(o, "evaluate: rank-1 " + std::to_string(e.rank1));
  write_log(config, Stage::kEval, clock.seconds(), m);
}

void run_pipeline(const ExperimentConfig& config, const StageOptions& o) {
  synth_data(config, o);
  pretrain_fip(config, o);
  if (!config.is_baseline()) {
    train_dvg(config, o);
    generate(config, o);
  }
  train_hfr(config, o);
  evaluate(config, o);
}

std::string report(const std::vector<fs::path>& run_dirs) {
  struct Row {
    std::string run;
    json m;
  };
  std::vector<Row> rows;
  for (const fs::path& dir : run_dirs) {
    const fs::path file = RunPaths{dir}.metrics();
    if (!fs::exists(file)) continue;
    rows.push_back({dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string(),
                    json::parse(io::read_text(file))});
  }
  if (rows.empty()) throw MissingArtifactError("no completed evaluation among the given run directories");

  auto num = [](const json& v, const char* fmt, double scale = 1.0) {
    if (v.is_null()) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, fmt, v.get<double>() * scale);
    return std::string(buf);
  };
  std::string out = "| run | method | pool | MD | FID | Rank-1 (%) | VR@FAR=1% (%) | VR@FAR=0.1% (%) |\n";
  out += "|---|---|---|---|---|---|---|---|\n";
  for (const Row& r : rows) {
    out += "| " + r.run + " | " + r.m.at("label").get<std::string>() + " | " +
           std::to_string(r.m.at("pool_size").get<std::size_t>()) + " | " + num(r.m.at("md"), "%.3f") + " | " +
           num(r.m.at("fid_mean"), "%.3f") + " | " + num(r.m.at("rank1"), "%.1f", 100.0) + " | " +
           num(r.m.at("vr_at_far_1pct"), "%.1f", 100.0) + " | " + num(r.m.at("vr_at_far_0.1pct"), "%.1f", 100.0) +
           " |\n";
  }

  std::vector<const Row*> sweep;
  for (const Row& r : rows) {
    if (r.m.at("label") == "dvg") sweep.push_back(&r);
  }
  std::stable_sort(sweep.begin(), sweep.end(), [](const Row* a, const Row* b) {
    return a->m.at("pool_size").get<std::size_t>() < b->m.at("pool_size").get<std::size_t>();
  });
  if (!sweep.empty()) {
    out += "\n| pool | run | Rank-1 (%) |\n|---|---|---|\n";
    for (const Row* r : sweep) {
      out += "| " + std::to_string(r->m.at("pool_size").get<std::size_t>()) + " | " + r->run + " | " +
             num(r->m.at("rank1"), "%.1f", 100.0) + " |\n";
    }
  }
  return out;
}

}  // namespace dvg::cli
