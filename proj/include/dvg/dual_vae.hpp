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

#pragma once

#include <cstdint>
#include <vector>

#include "dvg/autograd.hpp"
#include "dvg/feature.hpp"
#include "dvg/nn.hpp"
#include "dvg/random.hpp"
#include "dvg/synthdata.hpp"

namespace dvg::vae {

// Trade-off weights of the generator objective.
struct LossWeights {
  double dist = 50.0;
  double ip_pair = 5.0;
  double ip_rec = 1000.0;
  double div = 0.2;
};

struct GeneratorSpec {
  std::size_t pixels = synth::kImagePixels;
  std::size_t latent_dim = 32;  // per modality
  std::vector<std::size_t> encoder_hidden = {256, 128};
  std::vector<std::size_t> decoder_hidden = {128, 256};
  std::vector<std::size_t> disc_hidden = {256, 64};
};

// Two modality encoders (pixels -> mean and log-variance), one decoder over
// the concatenated latent (2d -> both images through a sigmoid) and a
// discriminator over the concatenated image pair.
class GeneratorBundle {
 public:
  GeneratorBundle() = default;
  GeneratorBundle(const GeneratorSpec& spec, RandomSource& rng, LossWeights weights = {});

  const GeneratorSpec& spec() const { return spec_; }

  // Encoders and decoder, in that order.
  std::vector<Parameter*> generator_parameters();
  std::vector<Parameter*> discriminator_parameters();
  // Generator parameters followed by discriminator parameters.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;

  Mlp encoder_n;
  Mlp encoder_v;
  Mlp decoder;
  Mlp discriminator;
  LossWeights weights;

 private:
  GeneratorSpec spec_;
};

// Diagonal Gaussian posterior, sigma = exp(log_var / 2).
struct GaussianLatent {
  Var mean;
  Var log_var;
};

GaussianLatent encode(const Mlp& encoder, Tape& tape, const Var& images,
                      Binding binding = Binding::kTrainable);

// z = mean + exp(log_var / 2) * eps, eps treated as a constant.
Var reparameterize(const GaussianLatent& latent, const Tensor& eps);
Var reparameterize(const GaussianLatent& latent, RandomSource& rng);

struct DecodedPair {
  Var n;
  Var v;
};

// joint: [B, 2d] = concat(z_n, z_v).
DecodedPair decode(const GeneratorBundle& bundle, Tape& tape, const Var& joint,
                   Binding binding = Binding::kTrainable);

// KL of both posteriors to N(0, I), summed over latent dims and modalities,
// averaged over the batch.
Var loss_kl(const GaussianLatent& n, const GaussianLatent& v);

// 0.5 * (||x_n - x^_n||^2 + ||x_v - x^_v||^2) per sample, batch averaged.
Var loss_rec(const Var& x_n, const Var& x_v, const Var& recon_n, const Var& recon_v);

// Closed-form 2-Wasserstein distance between diagonal Gaussians,
// 0.5 * (||u_n - u_v||^2 + ||sigma_n - sigma_v||^2), batch averaged.
Var loss_dist(const GaussianLatent& n, const GaussianLatent& v);

// ||F(x^_n) - F(x^_v)||^2, batch averaged.
Var loss_ip_pair(const Var& recon_n, const Var& recon_v, const FeatureExtractor& fip);

// ||F(x^_n) - F(x_n)||^2 + ||F(x^_v) - F(x_v)||^2, batch averaged.
Var loss_ip_rec(const Var& x_n, const Var& x_v, const Var& recon_n, const Var& recon_v,
                const FeatureExtractor& fip);

struct DiversityTerm {
  Var ratio;         // batch mean of the unclipped ratio r
  Var contribution;  // -mean(min(r, clip)), the term added to the generator loss
};

struct DiversityOptions {
  double eps = 1e-5;
  double clip = 5.0;
};

// r = sum over modalities of ||F(x1_m) - F(x2_m)||_1 / (||z1 - z2||_1 + eps),
// per sample, for pairs decoded from copied noise z1 and z2.
DiversityTerm loss_div(const DecodedPair& first, const DecodedPair& second, const Var& z1,
                       const Var& z2, const FeatureExtractor& fip, DiversityOptions options = {});

inline constexpr double kProbFloor = 1e-6;

// Discriminator probability for each pair, clamped to [1e-6, 1 - 1e-6].
Var discriminate(const GeneratorBundle& bundle, Tape& tape, const Var& x_n, const Var& x_v,
                 Binding binding);

// -log D(real) - 0.5 [log(1 - D(recon)) + log(1 - D(sampled))], batch averaged.
Var adv_disc_loss(const Var& d_real, const Var& d_recon, const Var& d_sampled);
// Non-saturating generator term -0.5 [log D(recon) + log D(sampled)].
Var adv_gen_loss(const Var& d_recon, const Var& d_sampled);

struct LossComponents {
  Var rec, kl, adv, dist, ip_pair, ip_rec, div;
};

// rec + kl + adv + w.dist*dist + w.ip_pair*ip_pair + w.ip_rec*ip_rec + w.div*div,
// where div is already the (non-positive) diversity contribution.
Var loss_gen(const LossComponents& c, const LossWeights& w);

struct DvgConfig {
  std::size_t steps = 4000;
  std::size_t batch = 32;
  AdamConfig adam{};  // lr 2e-4, betas (0.9, 0.999), shared by generator and discriminator
  bool adversarial = true;
  DiversityOptions diversity{};
};

struct DvgStepLog {
  double rec = 0, kl = 0, adv_gen = 0, adv_disc = 0, dist = 0, ip_pair = 0, ip_rec = 0;
  double div = 0;        // clipped contribution
  double div_ratio = 0;  // unclipped ratio
  double total = 0;
};

// One step = one discriminator update then one generator update on the same
// real batch. Per step the stream is consumed in a fixed order: batch
// indices, eps_n, eps_v, z1, z2.
class DvgTrainer {
 public:
  DvgTrainer(GeneratorBundle bundle, const FeatureExtractor& fip, const synth::PairedDataset& train,
             const DvgConfig& config, const RandomSource& rng);

  DvgStepLog step();
  std::vector<DvgStepLog> run(std::size_t steps);
  bool done() const { return step_ >= config_.steps; }

  GeneratorBundle& bundle() { return bundle_; }
  const GeneratorBundle& bundle() const { return bundle_; }
  Optimizer& generator_optimizer() { return gen_opt_; }
  Optimizer& discriminator_optimizer() { return disc_opt_; }
  RandomSource& rng() { return rng_; }
  std::size_t step_index() const { return step_; }
  void set_step_index(std::size_t s) { step_ = s; }

 private:
  GeneratorBundle bundle_;
  const FeatureExtractor& fip_;
  const synth::PairedDataset& train_;
  DvgConfig config_;
  Optimizer gen_opt_;
  Optimizer disc_opt_;
  RandomSource rng_;
  std::size_t step_ = 0;
};

// Sample-and-copy generation: for each draw z ~ N(0, I_d), decode
// concat(z, z) into one pair. The identity field is the draw index. Pixels
// are rounded to float and kept strictly inside (0, 1).
synth::PairedDataset sample_pairs(const GeneratorBundle& bundle, std::size_t count,
                                  RandomSource& rng, std::size_t chunk = 256);

}  // namespace dvg::vae
