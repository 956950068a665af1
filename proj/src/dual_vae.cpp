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

#include "dvg/dual_vae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dvg/error.hpp"

namespace dvg::vae {

namespace {

MlpSpec chain(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
              Activation last) {
  MlpSpec s;
  s.input_dim = in;
  for (std::size_t h : hidden) s.layers.push_back({h, Activation::kLeakyRelu, 0.0});
  s.layers.push_back({out, last, 0.0});
  return s;
}

Var batch_mean_of_rows(const Var& per_element) { return mean(sum_last(per_element)); }

// Re-raises numeric failures with the name of the loss term.
template <typename F>
Var term(const char* name, F&& f) {
  try {
    Var v = f();
    if (!std::isfinite(v.item())) throw NumericError("value is not finite");
    return v;
  } catch (const NumericError& e) {
    throw NumericError(std::string("dvg loss term '") + name + "': " + e.what());
  }
}

}  // namespace

GeneratorBundle::GeneratorBundle(const GeneratorSpec& spec, RandomSource& rng,
                                 LossWeights w)
    : weights(w), spec_(spec) {
  const std::size_t d = spec.latent_dim;
  encoder_n = Mlp("encoder_n", chain(spec.pixels, spec.encoder_hidden, 2 * d, Activation::kNone), rng);
  encoder_v = Mlp("encoder_v", chain(spec.pixels, spec.encoder_hidden, 2 * d, Activation::kNone), rng);
  decoder = Mlp("decoder", chain(2 * d, spec.decoder_hidden, 2 * spec.pixels, Activation::kSigmoid), rng);
  discriminator =
      Mlp("discriminator", chain(2 * spec.pixels, spec.disc_hidden, 1, Activation::kNone), rng);
}

std::vector<Parameter*> GeneratorBundle::generator_parameters() {
  std::vector<Parameter*> out;
  for (Mlp* m : {&encoder_n, &encoder_v, &decoder}) {
    auto p = m->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::vector<Parameter*> GeneratorBundle::discriminator_parameters() {
  return discriminator.parameters();
}

std::vector<Parameter*> GeneratorBundle::parameters() {
  auto out = generator_parameters();
  auto d = discriminator_parameters();
  out.insert(out.end(), d.begin(), d.end());
  return out;
}

std::vector<const Parameter*> GeneratorBundle::parameters() const {
  std::vector<const Parameter*> out;
  for (const Mlp* m : {&encoder_n, &encoder_v, &decoder, &discriminator}) {
    auto p = m->parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

GaussianLatent encode(const Mlp& encoder, Tape& tape, const Var& images, Binding binding) {
  const Var out = encoder.forward(tape, images, false, nullptr, binding);
  const std::size_t d = out.shape()[1] / 2;
  return {slice(out, 1, 0, d), slice(out, 1, d, 2 * d)};
}

Var reparameterize(const GaussianLatent& latent, const Tensor& eps) {
  if (eps.shape() != latent.mean.shape()) {
    throw ShapeError("reparameterize: eps " + shape_string(eps.shape()) + " vs mean " +
                     shape_string(latent.mean.shape()));
  }
  Tape& t = latent.mean.tape();
  const Var sigma = exp(latent.log_var * 0.5);
  return latent.mean + hadamard(sigma, t.constant(eps));
}

Var reparameterize(const GaussianLatent& latent, RandomSource& rng) {
  return reparameterize(latent, rng.normal_tensor(latent.mean.shape()));
}

DecodedPair decode(const GeneratorBundle& bundle, Tape& tape, const Var& joint, Binding binding) {
  const std::size_t px = bundle.spec().pixels;
  if (joint.shape().size() != 2 || joint.shape()[1] != 2 * bundle.spec().latent_dim) {
    throw ShapeError("decode expects [batch, " + std::to_string(2 * bundle.spec().latent_dim) +
                     "], got " + shape_string(joint.shape()));
  }
  const Var out = bundle.decoder.forward(tape, joint, false, nullptr, binding);
  return {slice(out, 1, 0, px), slice(out, 1, px, 2 * px)};
}

Var loss_kl(const GaussianLatent& n, const GaussianLatent& v) {
  auto kl = [](const GaussianLatent& l) {
    return batch_mean_of_rows(0.5 * (square(l.mean) + exp(l.log_var) - 1.0 - l.log_var));
  };
  return kl(n) + kl(v);
}

Var loss_rec(const Var& x_n, const Var& x_v, const Var& recon_n, const Var& recon_v) {
  return 0.5 * (batch_mean_of_rows(square(x_n - recon_n)) +
                batch_mean_of_rows(square(x_v - recon_v)));
}

Var loss_dist(const GaussianLatent& n, const GaussianLatent& v) {
  const Var sn = exp(n.log_var * 0.5);
  const Var sv = exp(v.log_var * 0.5);
  return 0.5 * batch_mean_of_rows(square(n.mean - v.mean) + square(sn - sv));
}

Var loss_ip_pair(const Var& recon_n, const Var& recon_v, const FeatureExtractor& fip) {
  Tape& t = recon_n.tape();
  return batch_mean_of_rows(square(fip.embed(t, recon_n) - fip.embed(t, recon_v)));
}

Var loss_ip_rec(const Var& x_n, const Var& x_v, const Var& recon_n, const Var& recon_v,
                const FeatureExtractor& fip) {
  Tape& t = recon_n.tape();
  return batch_mean_of_rows(square(fip.embed(t, recon_n) - fip.embed(t, x_n))) +
         batch_mean_of_rows(square(fip.embed(t, recon_v) - fip.embed(t, x_v)));
}

DiversityTerm loss_div(const DecodedPair& first, const DecodedPair& second, const Var& z1,
                       const Var& z2, const FeatureExtractor& fip, DiversityOptions options) {
  Tape& t = first.n.tape();
  const Var numer = l1_norm(fip.embed(t, first.n) - fip.embed(t, second.n)) +
                    l1_norm(fip.embed(t, first.v) - fip.embed(t, second.v));
  const Var denom = l1_norm(z1 - z2) + options.eps;
  const Var r = numer / denom;
  const Var clipped = clamp(r, std::numeric_limits<double>::lowest(), options.clip);
  return {mean(r), -mean(clipped)};
}

Var discriminate(const GeneratorBundle& bundle, Tape& tape, const Var& x_n, const Var& x_v,
                 Binding binding) {
  const Var logit = bundle.discriminator.forward(tape, concat(x_n, x_v, 1), false, nullptr, binding);
  return clamp(sigmoid(logit), kProbFloor, 1.0 - kProbFloor);
}

Var adv_disc_loss(const Var& d_real, const Var& d_recon, const Var& d_sampled) {
  return -mean(log(d_real)) -
         0.5 * (mean(log(1.0 - d_recon)) + mean(log(1.0 - d_sampled)));
}

Var adv_gen_loss(const Var& d_recon, const Var& d_sampled) {
  return -0.5 * (mean(log(d_recon)) + mean(log(d_sampled)));
}

Var loss_gen(const LossComponents& c, const LossWeights& w) {
  return c.rec + c.kl + c.adv + w.dist * c.dist + w.ip_pair * c.ip_pair + w.ip_rec * c.ip_rec +
         w.div * c.div;
}

DvgTrainer::DvgTrainer(GeneratorBundle bundle, const FeatureExtractor& fip,
                       const synth::PairedDataset& train, const DvgConfig& config,
                       const RandomSource& rng)
    : bundle_(std::move(bundle)),
      fip_(fip),
      train_(train),
      config_(config),
      gen_opt_(Optimizer::adam(config.adam)),
      disc_opt_(Optimizer::adam(config.adam)),
      rng_(rng) {
  if (config.batch == 0) throw ConfigError("dvg batch must be positive");
  if (train.pixels() != bundle_.spec().pixels) {
    throw ConfigError("dvg: dataset images have " + std::to_string(train.pixels()) +
                      " pixels, model expects " + std::to_string(bundle_.spec().pixels));
  }
}

DvgStepLog DvgTrainer::step() {
  const std::size_t b = config_.batch;
  const std::size_t d = bundle_.spec().latent_dim;
  std::vector<std::size_t> rows(b);
  for (auto& r : rows) r = rng_.below(train_.size());
  const Tensor eps_n = rng_.normal_tensor(Shape{b, d});
  const Tensor eps_v = rng_.normal_tensor(Shape{b, d});
  const Tensor z1t = rng_.normal_tensor(Shape{b, d});
  const Tensor z2t = rng_.normal_tensor(Shape{b, d});

  DvgStepLog log;
  Tape tape;
  const Var x_n = tape.constant(train_.n_images.gather_rows(rows));
  const Var x_v = tape.constant(train_.v_images.gather_rows(rows));
  const GaussianLatent lat_n = encode(bundle_.encoder_n, tape, x_n);
  const GaussianLatent lat_v = encode(bundle_.encoder_v, tape, x_v);
  const Var z_n = reparameterize(lat_n, eps_n);
  const Var z_v = reparameterize(lat_v, eps_v);
  const DecodedPair recon = decode(bundle_, tape, concat(z_n, z_v, 1));
  const Var z1 = tape.constant(z1t);
  const Var z2 = tape.constant(z2t);
  const DecodedPair s1 = decode(bundle_, tape, concat(z1, z1, 1));
  const DecodedPair s2 = decode(bundle_, tape, concat(z2, z2, 1));

  LossComponents c;
  c.rec = term("rec", [&] { return loss_rec(x_n, x_v, recon.n, recon.v); });
  c.kl = term("kl", [&] { return loss_kl(lat_n, lat_v); });
  c.dist = term("dist", [&] { return loss_dist(lat_n, lat_v); });
  c.ip_pair = term("ip_pair", [&] { return loss_ip_pair(recon.n, recon.v, fip_); });
  c.ip_rec = term("ip_rec", [&] { return loss_ip_rec(x_n, x_v, recon.n, recon.v, fip_); });
  DiversityTerm div;
  term("div", [&] {
    div = loss_div(s1, s2, z1, z2, fip_, config_.diversity);
    return div.contribution;
  });
  c.div = div.contribution;
  log.div_ratio = div.ratio.item();

  if (config_.adversarial) {
    Tape dtape;
    const Var d_real = discriminate(bundle_, dtape, dtape.constant(x_n.value()),
                                    dtape.constant(x_v.value()), Binding::kTrainable);
    const Var d_recon = discriminate(bundle_, dtape, dtape.constant(recon.n.value()),
                                     dtape.constant(recon.v.value()), Binding::kTrainable);
    const Var d_samp = discriminate(bundle_, dtape, dtape.constant(s1.n.value()),
                                    dtape.constant(s1.v.value()), Binding::kTrainable);
    const Var dloss = term("adv_disc", [&] { return adv_disc_loss(d_real, d_recon, d_samp); });
    log.adv_disc = dloss.item();
    dtape.backward(dloss);
    auto dparams = bundle_.discriminator_parameters();
    disc_opt_.step(dparams, dtape.grads(dparams));

    c.adv = term("adv_gen", [&] {
      return adv_gen_loss(discriminate(bundle_, tape, recon.n, recon.v, Binding::kFrozen),
                          discriminate(bundle_, tape, s1.n, s1.v, Binding::kFrozen));
    });
    log.adv_gen = c.adv.item();
  } else {
    c.adv = tape.constant(Tensor::scalar(0.0));
  }

  const Var total = term("total", [&] { return loss_gen(c, bundle_.weights); });
  log.rec = c.rec.item();
  log.kl = c.kl.item();
  log.dist = c.dist.item();
  log.ip_pair = c.ip_pair.item();
  log.ip_rec = c.ip_rec.item();
  log.div = c.div.item();
  log.total = total.item();
  tape.backward(total);
  auto gparams = bundle_.generator_parameters();
  gen_opt_.step(gparams, tape.grads(gparams));
  ++step_;
  return log;
}

std::vector<DvgStepLog> DvgTrainer::run(std::size_t steps) {
  std::vector<DvgStepLog> out;
  out.reserve(steps);
  for (std::size_t i = 0; i < steps; ++i) out.push_back(step());
  return out;
}

synth::PairedDataset sample_pairs(const GeneratorBundle& bundle, std::size_t count,
                                  RandomSource& rng, std::size_t chunk) {
  const std::size_t d = bundle.spec().latent_dim;
  const std::size_t px = bundle.spec().pixels;
  synth::PairedDataset pool;
  pool.split = "pool";
  pool.generated = true;
  pool.seed = rng.seed();
  pool.image_side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(px))));
  if (count == 0) return pool;
  pool.n_images = Tensor(Shape{count, px});
  pool.v_images = Tensor(Shape{count, px});
  pool.identity.resize(count);
  const double lo = static_cast<double>(std::numeric_limits<float>::denorm_min());
  const double hi = static_cast<double>(std::nextafter(1.0f, 0.0f));
  for (std::size_t begin = 0; begin < count; begin += chunk) {
    const std::size_t n = std::min(chunk, count - begin);
    const Tensor z = rng.normal_tensor(Shape{n, d});
    Tape tape;
    const Var zv = tape.constant(z);
    const DecodedPair pair = decode(bundle, tape, concat(zv, zv, 1), Binding::kFrozen);
    for (std::size_t i = 0; i < n; ++i) {
      pool.identity[begin + i] = static_cast<std::uint32_t>(begin + i);
      const auto src_n = pair.n.value().row(i);
      const auto src_v = pair.v.value().row(i);
      auto dst_n = pool.n_images.row(begin + i);
      auto dst_v = pool.v_images.row(begin + i);
      for (std::size_t j = 0; j < px; ++j) {
        dst_n[j] = std::clamp(static_cast<double>(static_cast<float>(src_n[j])), lo, hi);
        dst_v[j] = std::clamp(static_cast<double>(static_cast<float>(src_v[j])), lo, hi);
      }
    }
  }
  return pool;
}

}  // namespace dvg::vae
