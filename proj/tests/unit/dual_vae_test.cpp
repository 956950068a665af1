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

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "dvg/dual_vae.hpp"
#include "dvg/error.hpp"
#include "dvg/gradcheck.hpp"
#include "dvg/synthdata.hpp"

namespace dvg::vae {
namespace {

GeneratorSpec tiny_spec() {
  GeneratorSpec s;
  s.pixels = 64;
  s.latent_dim = 4;
  s.encoder_hidden = {12};
  s.decoder_hidden = {12};
  s.disc_hidden = {10};
  return s;
}

FrozenTrunk tiny_fip(std::size_t pixels, std::uint64_t seed = 3) {
  RandomSource rng(seed);
  MlpSpec spec{pixels, {{16, Activation::kLeakyRelu}, {8, Activation::kNone}}};
  return FrozenTrunk(Mlp("fip", spec, rng));
}

Tensor uniform_images(std::size_t rows, std::size_t px, RandomSource& rng) {
  Tensor t(Shape{rows, px});
  for (double& x : t.storage()) x = 0.05 + 0.9 * rng.uniform();
  return t;
}

GaussianLatent latent_of(Tape& tape, Tensor mean, Tensor log_var) {
  return {tape.constant(std::move(mean)), tape.constant(std::move(log_var))};
}

// Scales the raw images; lets a test set the diversity ratio freely.
class ScaledPixels final : public FeatureExtractor {
 public:
  explicit ScaledPixels(double scale) : scale_(scale) {}
  Var embed(Tape&, const Var& images) const override { return images * scale_; }
  using FeatureExtractor::embed;
  std::size_t feature_dim() const override { return 64; }

 private:
  double scale_;
};

TEST(Dvg, DefaultShapesAndWeights) {
  RandomSource rng(1);
  const GeneratorBundle b(GeneratorSpec{}, rng);
  EXPECT_EQ(b.encoder_n.input_dim(), 1024u);
  EXPECT_EQ(b.encoder_n.output_dim(), 64u);
  EXPECT_EQ(b.decoder.input_dim(), 64u);
  EXPECT_EQ(b.decoder.output_dim(), 2048u);
  EXPECT_EQ(b.discriminator.input_dim(), 2048u);
  EXPECT_EQ(b.discriminator.output_dim(), 1u);
  EXPECT_EQ(b.weights.dist, 50.0);
  EXPECT_EQ(b.weights.ip_pair, 5.0);
  EXPECT_EQ(b.weights.ip_rec, 1000.0);
  EXPECT_EQ(b.weights.div, 0.2);
}

TEST(Dvg, EncodeShapesAndDeterminism) {
  RandomSource rng(2);
  const GeneratorBundle b(tiny_spec(), rng);
  const Tensor x = uniform_images(5, 64, rng);
  Tape tape;
  const GaussianLatent a = encode(b.encoder_n, tape, tape.constant(x));
  const GaussianLatent c = encode(b.encoder_n, tape, tape.constant(x));
  EXPECT_EQ(a.mean.shape(), (Shape{5, 4}));
  EXPECT_EQ(a.log_var.shape(), (Shape{5, 4}));
  EXPECT_EQ(a.mean.value(), c.mean.value());
  EXPECT_EQ(a.log_var.value(), c.log_var.value());
  EXPECT_THROW(encode(b.encoder_n, tape, tape.constant(Tensor(Shape{5, 63}))), ShapeError);
}

TEST(Dvg, EncodeGradientMatchesFiniteDifferences) {
  RandomSource rng(3);
  GeneratorBundle b(tiny_spec(), rng);
  const Tensor x = uniform_images(3, 64, rng);
  const auto params = b.encoder_n.parameters();
  const double err = grad_check_params(
      [&](Tape& t) { return mean(encode(b.encoder_n, t, t.constant(x)).mean); }, params);
  EXPECT_LE(err, 1e-6);
}

TEST(Dvg, ReparameterizeCases) {
  Tape tape;
  const GaussianLatent unit = latent_of(tape, Tensor::matrix({{0, 0}}), Tensor::matrix({{0, 0}}));
  const Tensor e = Tensor::matrix({{0.3, -1.7}});
  EXPECT_EQ(reparameterize(unit, e).value(), e);

  const GaussianLatent tight =
      latent_of(tape, Tensor::matrix({{1.5, -2}}), Tensor::matrix({{-40, -40}}));
  const Var z = reparameterize(tight, Tensor::matrix({{3, -3}}));
  EXPECT_NEAR(z.value()[0], 1.5, 1e-8);
  EXPECT_NEAR(z.value()[1], -2.0, 1e-8);
  EXPECT_THROW(reparameterize(unit, Tensor::matrix({{1, 2, 3}})), ShapeError);
}

TEST(Dvg, ReparameterizeGradientSkipsNoise) {
  Tape tape;
  const Var mu = tape.variable(Tensor::matrix({{0.5, -0.2}}));
  const Var lv = tape.variable(Tensor::matrix({{0.4, -1.0}}));
  const Tensor e = Tensor::matrix({{1.1, -0.6}});
  tape.backward(sum(reparameterize({mu, lv}, e)));
  EXPECT_EQ(tape.grad(mu), Tensor::matrix({{1, 1}}));
  EXPECT_NEAR(tape.grad(lv)[0], 0.5 * std::exp(0.2) * 1.1, 1e-15);
  EXPECT_NEAR(tape.grad(lv)[1], 0.5 * std::exp(-0.5) * -0.6, 1e-15);
}

TEST(Dvg, ReparameterizeMonteCarloMoments) {
  const std::size_t n = 100000;
  Tape tape;
  const GaussianLatent lat{tape.constant(Tensor(Shape{n, 1}, 1.0)),
                           tape.constant(Tensor(Shape{n, 1}, 2.0 * std::log(2.0)))};
  RandomSource rng(4);
  const Tensor z = reparameterize(lat, rng).value();
  double m = 0, s = 0;
  for (double v : z.storage()) m += v;
  m /= n;
  for (double v : z.storage()) s += (v - m) * (v - m);
  EXPECT_NEAR(m, 1.0, 0.02);
  EXPECT_NEAR(std::sqrt(s / (n - 1)), 2.0, 0.02);
}

TEST(Dvg, DecodeRangeDeterminismAndGradient) {
  RandomSource rng(5);
  GeneratorBundle b(tiny_spec(), rng);
  const Tensor z = rng.normal_tensor(Shape{6, 8});
  Tape tape;
  const DecodedPair p = decode(b, tape, tape.constant(z));
  const DecodedPair q = decode(b, tape, tape.constant(z));
  EXPECT_EQ(p.n.shape(), (Shape{6, 64}));
  EXPECT_EQ(p.n.value(), q.n.value());
  EXPECT_EQ(p.v.value(), q.v.value());
  for (const Tensor* t : {&p.n.value(), &p.v.value()}) {
    for (double x : t->storage()) {
      EXPECT_GT(x, 0.0);
      EXPECT_LT(x, 1.0);
    }
  }
  EXPECT_THROW(decode(b, tape, tape.constant(Tensor(Shape{6, 4}))), ShapeError);
  const double err = grad_check(
      [&](Tape& t, const Var& zz) {
        const DecodedPair d = decode(b, t, zz, Binding::kFrozen);
        return sum(square(d.n)) + sum(d.v);
      },
      z);
  EXPECT_LE(err, 1e-6);
}

TEST(Dvg, KlClosedForms) {
  Tape tape;
  const GaussianLatent prior = latent_of(tape, Tensor::matrix({{0, 0}}), Tensor::matrix({{0, 0}}));
  EXPECT_EQ(loss_kl(prior, prior).item(), 0.0);
  const GaussianLatent one = latent_of(tape, Tensor::matrix({{1}}), Tensor::matrix({{0}}));
  const GaussianLatent zero = latent_of(tape, Tensor::matrix({{0}}), Tensor::matrix({{0}}));
  EXPECT_NEAR(loss_kl(one, zero).item(), 0.5, 1e-15);
}

TEST(Dvg, KlNonNegativeSweep) {
  RandomSource rng(6);
  for (int k = 0; k < 1000; ++k) {
    Tape tape;
    Tensor mu = rng.normal_tensor(Shape{2, 3}), lv = rng.normal_tensor(Shape{2, 3});
    for (double& x : lv.storage()) x *= 3;
    const GaussianLatent a = latent_of(tape, mu, lv);
    const GaussianLatent b = latent_of(tape, rng.normal_tensor(Shape{2, 3}), lv);
    ASSERT_GE(loss_kl(a, b).item(), 0.0);
    ASSERT_GE(loss_dist(a, b).item(), 0.0);
  }
}

TEST(Dvg, RecExamples) {
  Tape tape;
  const Var zero = tape.constant(Tensor(Shape{1, 1024}, 0.0));
  const Var tenth = tape.constant(Tensor(Shape{1, 1024}, 0.1));
  EXPECT_EQ(loss_rec(tenth, zero, tenth, zero).item(), 0.0);
  EXPECT_NEAR(loss_rec(zero, zero, tenth, zero).item(), 5.12, 1e-12);
  RandomSource rng(7);
  const Var a = tape.constant(uniform_images(3, 16, rng)), b = tape.constant(uniform_images(3, 16, rng));
  const Var c = tape.constant(uniform_images(3, 16, rng)), d = tape.constant(uniform_images(3, 16, rng));
  EXPECT_EQ(loss_rec(a, b, c, d).item(), loss_rec(c, d, a, b).item());
  EXPECT_THROW(loss_rec(a, b, c, zero), ShapeError);
}

TEST(Dvg, DistClosedFormsAndSymmetry) {
  Tape tape;
  const GaussianLatent n = latent_of(tape, Tensor::matrix({{1, 0}}), Tensor::matrix({{0.3, -0.2}}));
  const GaussianLatent v = latent_of(tape, Tensor::matrix({{0, 0}}), Tensor::matrix({{0.3, -0.2}}));
  EXPECT_NEAR(loss_dist(n, v).item(), 0.5, 1e-15);
  EXPECT_EQ(loss_dist(n, n).item(), 0.0);
  EXPECT_EQ(loss_dist(n, v).item(), loss_dist(v, n).item());
  const GaussianLatent w = latent_of(tape, Tensor::matrix({{1, 0}}), Tensor::matrix({{0.3, -0.1}}));
  EXPECT_GT(loss_dist(n, w).item(), 0.0);
}

TEST(Dvg, IdentityPreservingTerms) {
  const FrozenTrunk fip = tiny_fip(64);
  RandomSource rng(8);
  Tape tape;
  const Var x = tape.constant(uniform_images(4, 64, rng));
  const Var y = tape.constant(uniform_images(4, 64, rng));
  EXPECT_EQ(loss_ip_pair(x, x, fip).item(), 0.0);
  EXPECT_EQ(loss_ip_rec(x, y, x, y, fip).item(), 0.0);
  for (int k = 0; k < 20; ++k) {
    const Var a = tape.constant(uniform_images(4, 64, rng));
    const Var b = tape.constant(uniform_images(4, 64, rng));
    const double p = loss_ip_pair(a, b, fip).item(), r = loss_ip_rec(x, y, a, b, fip).item();
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 4.0);
    EXPECT_GE(r, 0.0);
    EXPECT_LE(r, 8.0);
  }
}

TEST(Dvg, IpPairAntipodalFeaturesGiveFour) {
  RandomSource rng(9);
  Mlp flip("fip", MlpSpec{2, {{2, Activation::kNone}}}, rng);
  flip.layers()[0].weight.value = Tensor::identity(2);
  const FrozenTrunk fip(flip);
  Tape tape;
  const Var a = tape.constant(Tensor::matrix({{0.6, 0.8}}));
  const Var b = tape.constant(Tensor::matrix({{-0.3, -0.4}}));
  EXPECT_NEAR(loss_ip_pair(a, b, fip).item(), 4.0, 1e-12);
}

TEST(Dvg, IpPairGradientReachesDecoderNotExtractor) {
  RandomSource rng(10);
  const GeneratorBundle b(tiny_spec(), rng);
  const FrozenTrunk fip = tiny_fip(64);
  Tape tape;
  const DecodedPair p = decode(b, tape, tape.constant(rng.normal_tensor(Shape{3, 8})));
  tape.backward(loss_ip_pair(p.n, p.v, fip));
  const Tensor dec = tape.grad(b.decoder.layers()[0].weight);
  double g = 0;
  for (double x : dec.storage()) g += std::abs(x);
  EXPECT_GT(g, 0.0);
  for (const Parameter* q : fip.trunk().parameters()) {
    EXPECT_EQ(tape.grad(*q), Tensor(q->value.shape(), 0.0)) << q->name;
  }
}

TEST(Dvg, IpRecGradientMatchesFiniteDifferences) {
  const FrozenTrunk fip = tiny_fip(64);
  RandomSource rng(11);
  const Tensor xn = uniform_images(2, 64, rng), xv = uniform_images(2, 64, rng);
  const Tensor rv = uniform_images(2, 64, rng);
  const double err = grad_check(
      [&](Tape& t, const Var& rn) {
        return loss_ip_rec(t.constant(xn), t.constant(xv), rn, t.constant(rv), fip) +
               loss_ip_rec(t.constant(xn), t.constant(xv), t.constant(rv), rn, fip);
      },
      uniform_images(2, 64, rng));
  EXPECT_LE(err, 1e-6);
}

DiversityTerm diversity(const GeneratorBundle& b, Tape& tape, const Tensor& z1, const Tensor& z2,
                        const FeatureExtractor& fip) {
  const Var a = tape.constant(z1), c = tape.constant(z2);
  const DecodedPair p = decode(b, tape, concat(a, a, 1));
  const DecodedPair q = decode(b, tape, concat(c, c, 1));
  return loss_div(p, q, a, c, fip);
}

TEST(Dvg, DiversityIdenticalNoiseAndSign) {
  RandomSource rng(12);
  const GeneratorBundle b(tiny_spec(), rng);
  const FrozenTrunk fip = tiny_fip(64);
  Tape tape;
  const Tensor z = rng.normal_tensor(Shape{4, 4});
  const DiversityTerm same = diversity(b, tape, z, z, fip);
  EXPECT_EQ(same.ratio.item(), 0.0);
  EXPECT_EQ(same.contribution.item(), 0.0);
  for (int k = 0; k < 20; ++k) {
    const DiversityTerm t =
        diversity(b, tape, rng.normal_tensor(Shape{4, 4}), rng.normal_tensor(Shape{4, 4}), fip);
    EXPECT_GE(t.ratio.item(), 0.0);
    EXPECT_LE(t.contribution.item(), 0.0);
  }
}

TEST(Dvg, DiversityRatioMatchesHandComputation) {
  RandomSource rng(13);
  const GeneratorBundle b(tiny_spec(), rng);
  const ScaledPixels fip(1.0);
  const Tensor z1 = rng.normal_tensor(Shape{1, 4}), z2 = rng.normal_tensor(Shape{1, 4});
  Tape tape;
  const DiversityTerm t = diversity(b, tape, z1, z2, fip);
  Tape ref;
  const Var a = ref.constant(z1), c = ref.constant(z2);
  const DecodedPair x1 = decode(b, ref, concat(a, a, 1)), x2 = decode(b, ref, concat(c, c, 1));
  double num = 0, den = 0;
  for (std::size_t j = 0; j < 64; ++j) {
    num += std::abs(x1.n.value()[j] - x2.n.value()[j]) + std::abs(x1.v.value()[j] - x2.v.value()[j]);
  }
  for (std::size_t j = 0; j < 4; ++j) den += std::abs(z1[j] - z2[j]);
  EXPECT_NEAR(t.ratio.item(), num / (den + 1e-5), 1e-12);
}

TEST(Dvg, DiversityClipsAtFive) {
  RandomSource rng(14);
  const GeneratorBundle b(tiny_spec(), rng);
  const Tensor z1 = rng.normal_tensor(Shape{1, 4}), z2 = rng.normal_tensor(Shape{1, 4});
  Tape tape;
  const double r0 = diversity(b, tape, z1, z2, ScaledPixels(1.0)).ratio.item();
  const DiversityTerm t = diversity(b, tape, z1, z2, ScaledPixels(12.0 / r0));
  EXPECT_NEAR(t.ratio.item(), 12.0, 1e-9);
  EXPECT_EQ(t.contribution.item(), -5.0);
}

TEST(Dvg, AdversarialTerms) {
  Tape tape;
  const Var half = tape.constant(Tensor(Shape{3, 1}, 0.5));
  EXPECT_NEAR(adv_disc_loss(half, half, half).item(), 2 * std::numbers::ln2, 1e-15);
  EXPECT_NEAR(adv_gen_loss(half, half).item(), std::numbers::ln2, 1e-15);
  double prev = INFINITY;
  for (double p : {0.1, 0.3, 0.6, 0.9, 0.99}) {
    const Var d = tape.constant(Tensor(Shape{2, 1}, p));
    const double g = adv_gen_loss(d, d).item();
    EXPECT_LT(g, prev);
    prev = g;
  }
}

TEST(Dvg, DiscriminatorOutputIsClamped) {
  RandomSource rng(15);
  GeneratorBundle b(tiny_spec(), rng);
  const Tensor x = uniform_images(2, 64, rng);
  for (double bias : {1e4, -1e4}) {
    b.discriminator.layers().back().bias.value = Tensor(Shape{1}, bias);
    Tape tape;
    const Var d = discriminate(b, tape, tape.constant(x), tape.constant(x), Binding::kFrozen);
    for (double p : d.value().storage()) {
      EXPECT_GE(p, kProbFloor);
      EXPECT_LE(p, 1 - kProbFloor);
    }
    EXPECT_TRUE(std::isfinite(adv_disc_loss(d, d, d).item()));
    EXPECT_TRUE(std::isfinite(adv_gen_loss(d, d).item()));
  }
}

TEST(Dvg, GeneratorObjectiveWeights) {
  Tape tape;
  const Var zero = tape.constant(Tensor::scalar(0)), one = tape.constant(Tensor::scalar(1));
  EXPECT_EQ(loss_gen({zero, zero, zero, zero, zero, zero, zero}, LossWeights{}).item(), 0.0);
  EXPECT_NEAR(loss_gen({one, one, one, one, one, one, one}, LossWeights{}).item(), 1058.2, 1e-9);
}

TEST(Dvg, FullObjectiveGradientMatchesFiniteDifferences) {
  RandomSource rng(16);
  GeneratorBundle b(tiny_spec(), rng);
  const FrozenTrunk fip = tiny_fip(64);
  const Tensor xn = uniform_images(3, 64, rng), xv = uniform_images(3, 64, rng);
  const Tensor en = rng.normal_tensor(Shape{3, 4}), ev = rng.normal_tensor(Shape{3, 4});
  const Tensor z1 = rng.normal_tensor(Shape{3, 4}), z2 = rng.normal_tensor(Shape{3, 4});
  auto objective = [&](Tape& t) {
    const Var n = t.constant(xn), v = t.constant(xv);
    const GaussianLatent ln = encode(b.encoder_n, t, n), lv = encode(b.encoder_v, t, v);
    const DecodedPair r = decode(b, t, concat(reparameterize(ln, en), reparameterize(lv, ev), 1));
    const Var a = t.constant(z1), c = t.constant(z2);
    const DecodedPair s1 = decode(b, t, concat(a, a, 1)), s2 = decode(b, t, concat(c, c, 1));
    const Var d_rec = discriminate(b, t, r.n, r.v, Binding::kFrozen);
    const Var d_smp = discriminate(b, t, s1.n, s1.v, Binding::kFrozen);
    return loss_gen({loss_rec(n, v, r.n, r.v), loss_kl(ln, lv), adv_gen_loss(d_rec, d_smp),
                     loss_dist(ln, lv), loss_ip_pair(r.n, r.v, fip),
                     loss_ip_rec(n, v, r.n, r.v, fip), loss_div(s1, s2, a, c, fip).contribution},
                    b.weights);
  };
  const auto params = b.generator_parameters();
  EXPECT_LE(grad_check_params(objective, params, 1e-5, 12), 1e-5);
}

synth::PairedDataset small_train(std::size_t ids, std::size_t per_id) {
  return synth::generate_dataset({ids, 1, per_id, 21}).train;
}

GeneratorSpec trainer_spec() {
  GeneratorSpec s;
  s.latent_dim = 4;
  s.encoder_hidden = {16};
  s.decoder_hidden = {16};
  s.disc_hidden = {8};
  return s;
}

DvgConfig trainer_config(std::size_t batch) {
  DvgConfig c;
  c.batch = batch;
  c.adam.lr = 1e-3;
  return c;
}

TEST(DvgTrainer, SameSeedSameParameterBytes) {
  const auto train = small_train(4, 3);
  const FrozenTrunk fip = tiny_fip(synth::kImagePixels);
  auto make = [&] {
    RandomSource init(30);
    return DvgTrainer(GeneratorBundle(trainer_spec(), init), fip, train, trainer_config(4),
                      RandomSource(31));
  };
  DvgTrainer a = make(), b = make();
  for (int k = 0; k < 3; ++k) {
    a.step();
    b.step();
  }
  const auto pa = std::as_const(a.bundle()).parameters(), pb = std::as_const(b.bundle()).parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_EQ(pa[i]->value, pb[i]->value) << pa[i]->name;
}

TEST(DvgTrainer, ExtractorNeverChanges) {
  const auto train = small_train(4, 3);
  const FrozenTrunk fip = tiny_fip(synth::kImagePixels);
  const std::uint64_t before = fip.fingerprint();
  RandomSource init(32);
  DvgTrainer t(GeneratorBundle(trainer_spec(), init), fip, train, trainer_config(4), RandomSource(33));
  const auto logs = t.run(10);
  EXPECT_EQ(logs.size(), 10u);
  EXPECT_EQ(fip.fingerprint(), before);
}

double mean_decoded_rec(const GeneratorBundle& b, const synth::PairedDataset& data) {
  Tape tape;
  const Var n = tape.constant(data.n_images), v = tape.constant(data.v_images);
  const GaussianLatent ln = encode(b.encoder_n, tape, n, Binding::kFrozen);
  const GaussianLatent lv = encode(b.encoder_v, tape, v, Binding::kFrozen);
  const DecodedPair r = decode(b, tape, concat(ln.mean, lv.mean, 1), Binding::kFrozen);
  return loss_rec(n, v, r.n, r.v).item();
}

TEST(DvgTrainer, PureVaeReducesReconstruction) {
  const auto train = small_train(2, 4);
  const FrozenTrunk fip = tiny_fip(synth::kImagePixels);
  RandomSource init(34);
  LossWeights w;
  w.ip_pair = w.ip_rec = w.div = 0.0;
  DvgConfig c = trainer_config(8);
  c.adversarial = false;
  DvgTrainer t(GeneratorBundle(trainer_spec(), init, w), fip, train, c, RandomSource(35));
  const double before = mean_decoded_rec(t.bundle(), train);
  t.run(200);
  EXPECT_LT(mean_decoded_rec(t.bundle(), train), before);
}

TEST(DvgTrainer, HeavyAlignmentTightensSinglePair) {
  const auto train = small_train(1, 1);
  const FrozenTrunk fip = tiny_fip(synth::kImagePixels);
  RandomSource init(36);
  LossWeights w;
  w.dist = 1000.0;
  w.ip_pair = w.ip_rec = w.div = 0.0;
  DvgConfig c = trainer_config(1);
  c.adversarial = false;
  DvgTrainer t(GeneratorBundle(trainer_spec(), init, w), fip, train, c, RandomSource(37));
  auto gap = [&] {
    Tape tape;
    const Tensor un = encode(t.bundle().encoder_n, tape, tape.constant(train.n_images)).mean.value();
    const Tensor uv = encode(t.bundle().encoder_v, tape, tape.constant(train.v_images)).mean.value();
    double s = 0;
    for (std::size_t j = 0; j < un.size(); ++j) s += (un[j] - uv[j]) * (un[j] - uv[j]);
    return std::sqrt(s);
  };
  const double before = gap();
  t.run(300);
  EXPECT_LE(gap(), 0.1 * before);
}

TEST(DvgTrainer, NonFiniteLossNamesTerm) {
  auto train = small_train(2, 2);
  const FrozenTrunk fip = tiny_fip(synth::kImagePixels);
  RandomSource init(38);
  GeneratorBundle b(trainer_spec(), init);
  b.encoder_n.layers().back().bias.value[4] = 800.0;  // log-variance overflows exp
  DvgTrainer t(std::move(b), fip, train, trainer_config(2), RandomSource(39));
  try {
    t.step();
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_FALSE(std::string(e.what()).empty());
  }
}

TEST(SamplePairs, CountRangeAndIds) {
  RandomSource init(40);
  const GeneratorBundle b(trainer_spec(), init);
  RandomSource rng(41);
  const synth::PairedDataset pool = sample_pairs(b, 1000, rng, 300);
  ASSERT_EQ(pool.size(), 1000u);
  EXPECT_TRUE(pool.generated);
  EXPECT_EQ(pool.split, "pool");
  for (std::size_t i = 0; i < pool.size(); ++i) ASSERT_EQ(pool.identity[i], i);
  for (const Tensor* t : {&pool.n_images, &pool.v_images}) {
    for (double x : t->storage()) {
      ASSERT_GT(x, 0.0);
      ASSERT_LT(x, 1.0);
      ASSERT_EQ(x, static_cast<double>(static_cast<float>(x)));
    }
  }
}

TEST(SamplePairs, SameSeedSameBytesChunkIndependent) {
  RandomSource init(42);
  const GeneratorBundle b(trainer_spec(), init);
  RandomSource r1(43), r2(43);
  const auto a = synth::encode_blob(sample_pairs(b, 100, r1, 100));
  const auto c = synth::encode_blob(sample_pairs(b, 100, r2, 100));
  EXPECT_EQ(a, c);
}

TEST(SamplePairs, BothImagesComeFromOneCopiedLatent) {
  RandomSource init(44);
  const GeneratorBundle b(trainer_spec(), init);
  RandomSource rng(45), replay(45);
  const synth::PairedDataset pool = sample_pairs(b, 5, rng);
  const Tensor z = replay.normal_tensor(Shape{5, 4});
  Tape tape;
  const Var zv = tape.constant(z);
  const DecodedPair ref = decode(b, tape, concat(zv, zv, 1), Binding::kFrozen);
  for (std::size_t j = 0; j < ref.n.value().size(); ++j) {
    ASSERT_EQ(pool.n_images[j], static_cast<double>(static_cast<float>(ref.n.value()[j])));
    ASSERT_EQ(pool.v_images[j], static_cast<double>(static_cast<float>(ref.v.value()[j])));
  }
}

}  // namespace
}  // namespace dvg::vae
