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

#include "dvg/config.hpp"

#include "dvg/binary_io.hpp"
#include "dvg/error.hpp"
#include "dvg/hash.hpp"

namespace dvg::cli {

using json = nlohmann::ordered_json;

namespace {

json model_json(const ExperimentConfig& c) {
  return {{"latent_dim", c.latent_dim},
          {"encoder_hidden", c.encoder_hidden},
          {"decoder_hidden", c.decoder_hidden},
          {"disc_hidden", c.disc_hidden},
          {"recognizer_hidden", c.recognizer_hidden},
          {"feature_dim", c.feature_dim}};
}

std::string kind_of(const json& j) {
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number_integer()) return "integer";
  if (j.is_number()) return "number";
  if (j.is_boolean()) return "boolean";
  if (j.is_string()) return "string";
  if (j.is_array()) return "array";
  if (j.is_object()) return "object";
  return "null";
}

bool fits(const json& slot, const json& value) {
  if (slot.is_number_unsigned()) return value.is_number_unsigned();
  if (slot.is_number()) return value.is_number();
  if (slot.is_boolean()) return value.is_boolean();
  if (slot.is_string()) return value.is_string();
  if (slot.is_array()) {
    for (const auto& v : value) {
      if (!v.is_number_unsigned()) return false;
    }
    return value.is_array();
  }
  return false;
}

void assign(json& slot, const json& value, const std::string& key) {
  if (!fits(slot, value)) {
    throw ConfigError("config key '" + key + "' expects a " + kind_of(slot) + ", got " + value.dump());
  }
  // Keep integer slots integral and float slots floating so dumps stay stable.
  if (slot.is_number_float()) {
    slot = value.get<double>();
  } else {
    slot = value;
  }
}

void merge(json& base, const json& over, const std::string& prefix) {
  if (!over.is_object()) {
    throw ConfigError("config " + (prefix.empty() ? std::string("root") : "'" + prefix + "'") +
                      " must be a JSON object");
  }
  for (auto it = over.begin(); it != over.end(); ++it) {
    const std::string key = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge(slot, it.value(), key);
    } else {
      assign(slot, it.value(), key);
    }
  }
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ConfigError("invalid config: " + what);
}

std::uint64_t hash_text(std::uint64_t h, const std::string& text) { return fnv1a64(text, h); }

}  // namespace

vae::GeneratorSpec ExperimentConfig::generator_spec() const {
  vae::GeneratorSpec s;
  s.pixels = synth::kImagePixels;
  s.latent_dim = latent_dim;
  s.encoder_hidden = encoder_hidden;
  s.decoder_hidden = decoder_hidden;
  s.disc_hidden = disc_hidden;
  return s;
}

hfr::RecognizerSpec ExperimentConfig::recognizer_spec(double dropout) const {
  hfr::RecognizerSpec s;
  s.input_dim = synth::kImagePixels;
  s.hidden = recognizer_hidden;
  s.embedding_dim = feature_dim;
  s.dropout = dropout;
  s.classes = data.train_identities;
  return s;
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["checkpoint_every"] = c.checkpoint_every;
  j["data"] = {{"train_identities", c.data.train_identities},
               {"test_identities", c.data.test_identities},
               {"samples_per_identity", c.data.samples_per_identity}};
  j["model"] = model_json(c);
  j["fip"] = {{"steps", c.fip.steps},
              {"batch", c.fip.batch},
              {"lr", c.fip.lr},
              {"lr_late", c.fip.lr_late},
              {"decay_fraction", c.fip.decay_fraction},
              {"holdout_per_identity", c.fip.holdout_per_identity},
              {"dropout", c.fip_dropout},
              {"gate", c.fip.gate},
              {"shift_augment", c.fip.shift_augment},
              {"photometric_augment", c.fip.photometric_augment}};
  j["dvg"] = {{"steps", c.dvg.steps},
              {"batch", c.dvg.batch},
              {"lr", c.dvg.adam.lr},
              {"beta1", c.dvg.adam.beta1},
              {"beta2", c.dvg.adam.beta2},
              {"adversarial", c.dvg.adversarial},
              {"lambda_dist", c.weights.dist},
              {"lambda_ip_pair", c.weights.ip_pair},
              {"lambda_ip_rec", c.weights.ip_rec},
              {"lambda_div", c.weights.div},
              {"div_eps", c.dvg.diversity.eps},
              {"div_clip", c.dvg.diversity.clip}};
  j["pool"] = {{"size", c.pool_size}};
  j["hfr"] = {{"steps", c.hfr.steps},
              {"batch", c.hfr.batch},
              {"lr", c.hfr.lr},
              {"lr_late", c.hfr.lr_late},
              {"decay_fraction", c.hfr.decay_fraction},
              {"momentum", c.hfr.momentum},
              {"weight_decay", c.hfr.weight_decay},
              {"alpha1", c.hfr.alpha1},
              {"dropout", c.hfr_dropout},
              {"init", c.hfr_init}};
  j["eval"] = {{"roc_points", c.roc_points}};
  return j;
}

ExperimentConfig from_json(const json& j) {
  ExperimentConfig c;
  c.seed = j.at("seed").get<std::uint64_t>();
  c.output_dir = j.at("output_dir").get<std::string>();
  c.checkpoint_every = j.at("checkpoint_every").get<std::size_t>();
  const json& d = j.at("data");
  c.data.train_identities = d.at("train_identities").get<std::size_t>();
  c.data.test_identities = d.at("test_identities").get<std::size_t>();
  c.data.samples_per_identity = d.at("samples_per_identity").get<std::size_t>();
  c.data.seed = c.seed;
  const json& m = j.at("model");
  c.latent_dim = m.at("latent_dim").get<std::size_t>();
  c.encoder_hidden = m.at("encoder_hidden").get<std::vector<std::size_t>>();
  c.decoder_hidden = m.at("decoder_hidden").get<std::vector<std::size_t>>();
  c.disc_hidden = m.at("disc_hidden").get<std::vector<std::size_t>>();
  c.recognizer_hidden = m.at("recognizer_hidden").get<std::vector<std::size_t>>();
  c.feature_dim = m.at("feature_dim").get<std::size_t>();
  const json& f = j.at("fip");
  c.fip.steps = f.at("steps").get<std::size_t>();
  c.fip.batch = f.at("batch").get<std::size_t>();
  c.fip.lr = f.at("lr").get<double>();
  c.fip.lr_late = f.at("lr_late").get<double>();
  c.fip.decay_fraction = f.at("decay_fraction").get<double>();
  c.fip.holdout_per_identity = f.at("holdout_per_identity").get<std::size_t>();
  c.fip_dropout = f.at("dropout").get<double>();
  c.fip.gate = f.at("gate").get<double>();
  c.fip.shift_augment = f.at("shift_augment").get<std::size_t>();
  c.fip.photometric_augment = f.at("photometric_augment").get<double>();
  const json& g = j.at("dvg");
  c.dvg.steps = g.at("steps").get<std::size_t>();
  c.dvg.batch = g.at("batch").get<std::size_t>();
  c.dvg.adam.lr = g.at("lr").get<double>();
  c.dvg.adam.beta1 = g.at("beta1").get<double>();
  c.dvg.adam.beta2 = g.at("beta2").get<double>();
  c.dvg.adversarial = g.at("adversarial").get<bool>();
  c.weights.dist = g.at("lambda_dist").get<double>();
  c.weights.ip_pair = g.at("lambda_ip_pair").get<double>();
  c.weights.ip_rec = g.at("lambda_ip_rec").get<double>();
  c.weights.div = g.at("lambda_div").get<double>();
  c.dvg.diversity.eps = g.at("div_eps").get<double>();
  c.dvg.diversity.clip = g.at("div_clip").get<double>();
  c.pool_size = j.at("pool").at("size").get<std::size_t>();
  const json& h = j.at("hfr");
  c.hfr.steps = h.at("steps").get<std::size_t>();
  c.hfr.batch = h.at("batch").get<std::size_t>();
  c.hfr.lr = h.at("lr").get<double>();
  c.hfr.lr_late = h.at("lr_late").get<double>();
  c.hfr.decay_fraction = h.at("decay_fraction").get<double>();
  c.hfr.momentum = h.at("momentum").get<double>();
  c.hfr.weight_decay = h.at("weight_decay").get<double>();
  c.hfr.alpha1 = h.at("alpha1").get<double>();
  c.hfr_dropout = h.at("dropout").get<double>();
  c.hfr_init = h.at("init").get<std::string>();
  c.roc_points = j.at("eval").at("roc_points").get<std::size_t>();

  require(c.data.train_identities > 0 && c.data.test_identities > 0, "identity counts must be positive");
  require(c.data.samples_per_identity > c.fip.holdout_per_identity,
          "data.samples_per_identity must exceed fip.holdout_per_identity");
  require(c.latent_dim > 0 && c.feature_dim > 0, "model dims must be positive");
  require(c.fip_dropout >= 0.0 && c.fip_dropout < 1.0, "fip.dropout must lie in [0, 1)");
  require(c.hfr_dropout >= 0.0 && c.hfr_dropout < 1.0, "hfr.dropout must lie in [0, 1)");
  require(c.fip.batch > 0 && c.dvg.batch > 0 && c.hfr.batch >= 2, "batch sizes must be positive (hfr >= 2)");
  require(c.fip.gate >= 0.0 && c.fip.gate <= 1.0, "fip.gate must lie in [0, 1]");
  require(c.hfr.alpha1 >= 0.0, "hfr.alpha1 must be non-negative");
  require(c.hfr.decay_fraction >= 0.0 && c.hfr.decay_fraction <= 1.0, "hfr.decay_fraction must lie in [0, 1]");
  require(c.hfr_init == "fip" || c.hfr_init == "scratch", "hfr.init must be \"fip\" or \"scratch\"");
  require(c.roc_points >= 2, "eval.roc_points must be at least 2");
  require(c.checkpoint_every > 0, "checkpoint_every must be positive");
  require(!c.output_dir.empty(), "output_dir must be set");
  return c;
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  json parsed;
  try {
    parsed = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string(source) + ": " + e.what());
  }
  json merged = to_json(ExperimentConfig{});
  merge(merged, parsed, "");
  return from_json(merged);
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const MissingArtifactError&) {
    throw ConfigError("config file not found: " + path);
  }
  return parse_config(text, path);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override must look like key=value, got '" + std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;

  json j = to_json(config);
  json* slot = &j;
  std::size_t begin = 0;
  while (true) {
    const auto dot = key.find('.', begin);
    const std::string part = key.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
    if (!slot->is_object() || !slot->contains(part)) throw ConfigError("unknown config key '" + key + "'");
    slot = &(*slot)[part];
    if (dot == std::string::npos) break;
    begin = dot + 1;
  }
  if (slot->is_object()) throw ConfigError("config key '" + key + "' names a section, not a value");
  assign(*slot, value, key);
  config = from_json(j);
}

std::string dump_config(const ExperimentConfig& config) { return to_json(config).dump(2) + "\n"; }

const char* stage_name(Stage stage) {
  switch (stage) {
    case Stage::kData: return "synth-data";
    case Stage::kFip: return "pretrain-fip";
    case Stage::kDvg: return "train-dvg";
    case Stage::kPool: return "generate";
    case Stage::kHfr: return "train-hfr";
    case Stage::kEval: return "evaluate";
  }
  return "?";
}

std::uint64_t stage_hash(const ExperimentConfig& config, Stage stage) {
  const json j = to_json(config);
  const json model = j.at("model");
  switch (stage) {
    case Stage::kData:
      return hash_text(fnv1a64(std::to_string(config.seed)), j.at("data").dump());
    case Stage::kFip: {
      const json part = {{"recognizer_hidden", model.at("recognizer_hidden")},
                         {"feature_dim", model.at("feature_dim")},
                         {"fip", j.at("fip")}};
      return hash_text(stage_hash(config, Stage::kData), part.dump());
    }
    case Stage::kDvg: {
      const json part = {{"latent_dim", model.at("latent_dim")},
                         {"encoder_hidden", model.at("encoder_hidden")},
                         {"decoder_hidden", model.at("decoder_hidden")},
                         {"disc_hidden", model.at("disc_hidden")},
                         {"dvg", j.at("dvg")}};
      return hash_text(stage_hash(config, Stage::kFip), part.dump());
    }
    case Stage::kPool:
      return hash_text(stage_hash(config, Stage::kDvg), j.at("pool").dump());
    case Stage::kHfr: {
      // Baselines never read the pool, so their lineage skips the generator.
      const std::uint64_t up = config.is_baseline() ? hash_text(stage_hash(config, Stage::kFip), "baseline")
                                                    : stage_hash(config, Stage::kPool);
      return hash_text(up, j.at("hfr").dump());
    }
    case Stage::kEval:
      return hash_text(stage_hash(config, Stage::kHfr), j.at("eval").dump());
  }
  throw ConfigError("unknown stage");
}

}  // namespace dvg::cli
