// Copyright 2026 The FPETS Authors
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

#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "fpets/nnmodel/config.h"
#include "fpets/nnmodel/layers.h"
#include "fpets/nnmodel/model.h"
#include "fpets/numcore/errors.h"
#include "fpets/numcore/grad_check.h"
#include "fpets/numcore/ops.h"
#include "fpets/numcore/tape.h"

using namespace fpets;
using namespace fpets::nn;

namespace {

ModelConfig tiny_config() {
  ModelConfig c;
  c.vocab_size = 10;
  c.embedding_dim = 6;
  c.encoder_hidden = 5;
  c.encoder_filter = 8;
  c.align_hidden = 4;
  c.align_filter = 8;
  c.align_layers = 2;
  c.cnn_decoder_filter = 6;
  c.ufans_decoder_hidden = 4;
  c.ufans_decoder_filter = 8;
  c.ufans_decoder_layers = 3;
  c.feature_dim = 3;
  c.num_frequencies = 6;
  return c;
}

std::vector<int> random_ids(std::mt19937_64& rng, std::size_t n, std::size_t vocab) {
  std::vector<int> ids(n);
  for (auto& i : ids) i = static_cast<int>(rng() % vocab);
  return ids;
}

bool rows_equal(const Tensor& a, const Tensor& b, std::size_t row) {
  for (std::size_t j = 0; j < a.cols(); ++j) {
    if (a.at(row, j) != b.at(row, j)) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("config parse, print and validate") {
  ModelConfig c;
  ModelConfig back = ModelConfig::parse(c.to_string());
  CHECK(back.to_string() == c.to_string());
  CHECK(back.hash() == c.hash());
  ModelConfig m = ModelConfig::parse("# comment\nfeature_dim = 1025\nkernel=gaussian\n"
                                     "normalization=softmax\nfixed_positions=true\n");
  CHECK(m.feature_dim == 1025);
  CHECK(m.kernel == align::Kernel::kGaussian);
  CHECK(m.normalization == align::Normalization::kSoftmax);
  CHECK(m.fixed_positions);
  CHECK(m.hash() != c.hash());
  CHECK_THROWS_AS(ModelConfig::parse("nonsense=1"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::parse("encoder_kernel=4"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::parse("encoder_filter=7"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::parse("dropout=1"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::parse("feature_dim=abc"), ConfigError);

  const ModelConfig p = ModelConfig::full_scale();
  CHECK(p.encoder_layers == 3);
  CHECK(p.encoder_kernel == 3);
  CHECK(p.encoder_filter == 1024);
  CHECK(p.align_layers == 4);
  CHECK(p.align_hidden == 512);
  CHECK(p.align_kernel == 3);
  CHECK(p.align_filter == 1024);
  CHECK(p.cnn_decoder_layers == 3);
  CHECK(p.cnn_decoder_kernel == 3);
  CHECK(p.cnn_decoder_filter == 1024);
  CHECK(p.ufans_decoder_layers == 6);
  CHECK(p.ufans_decoder_hidden == 512);
  CHECK(p.ufans_decoder_kernel == 3);
  CHECK(p.ufans_decoder_filter == 1024);
  CHECK(p.dropout == 0.15);
  CHECK(p.align_loss_weight == 0.02);
  FpetsModel full(p);
  CHECK(full.parameters().size() > 0);
}

TEST_CASE("ufans keeps length and reaches across the sequence") {
  ParamStore store(3);
  Ufans u4(store, "u4", 4, 4, 3, 8);
  Ufans u6(store, "u6", 4, 6, 3, 8);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (std::size_t t : {1, 2, 5, 16, 17, 33, 64}) {
    const Ufans& u = t <= 16 ? u4 : u6;
    Tensor x(Shape{t, 4});
    for (Real& v : x.values()) v = g(rng);
    Tensor y = u.forward(x);
    CHECK(y.shape() == x.shape());
    CHECK(u4.forward(x).shape() == x.shape());
    if (t > 1) {
      INFO(t);
      Tensor x2 = x.clone();
      x2.at(0, 0) += 1.0;
      Tensor y2 = u.forward(x2);
      CHECK(!rows_equal(y, y2, t - 1));
    }
  }
}

TEST_CASE("ufans with delta kernels reduces to pooling and upsampling") {
  const std::size_t c = 3, depth = 3;
  ParamStore store(5);
  Ufans u(store, "u", c, depth, 3, 2 * c);
  u.set_linear(true);
  auto make_delta = [&](GatedConv& g) {
    for (Real& v : g.kernel.values()) v = 0;
    for (Real& v : g.bias.values()) v = 0;
    for (std::size_t ch = 0; ch < c; ++ch) g.kernel[(1 * c + ch) * 2 * c + ch] = 1;
  };
  for (auto& g : u.down()) make_delta(g);
  for (auto& g : u.up()) make_delta(g);
  make_delta(u.bottom());

  // Oracle: f(x) = x + U(f'(P x)) with the bottom level as the identity.
  std::function<Tensor(const Tensor&, std::size_t)> oracle =
      [&](const Tensor& x, std::size_t level) -> Tensor {
    if (level == depth) return x;
    Tensor pooled = ops::avg_pool1d(x);
    return ops::add(x, ops::upsample_nearest(oracle(pooled, level + 1), x.rows()));
  };
  std::mt19937_64 rng(9);
  std::normal_distribution<double> g;
  for (std::size_t t : {8, 13, 40}) {
    Tensor x(Shape{t, c});
    for (Real& v : x.values()) v = g(rng);
    Tensor y = u.forward(x);
    Tensor want = oracle(x, 0);
    for (std::size_t i = 0; i < y.numel(); ++i) CHECK(std::abs(y[i] - want[i]) < 1e-12);
  }
}

TEST_CASE("encoder shape, locality and determinism") {
  FpetsModel model(tiny_config());
  std::mt19937_64 rng(4);
  for (std::size_t tp : {1, 2, 7, 30}) {
    auto ids = random_ids(rng, tp, 10);
    CHECK(model.encoder_forward(ids).shape() == Shape{tp, 5});
  }
  std::vector<int> ids = random_ids(rng, 24, 10);
  ids[3] = 1;
  ids[18] = 7;
  std::vector<int> swapped = ids;
  std::swap(swapped[3], swapped[18]);
  Tensor a = model.encoder_forward(ids);
  Tensor b = model.encoder_forward(swapped);
  for (std::size_t i = 0; i < 24; ++i) {
    const bool near = i <= 6 || (i >= 15 && i <= 21);
    if (!near) CHECK(rows_equal(a, b, i));
  }
  CHECK(!rows_equal(a, b, 3));
  Tensor c = model.encoder_forward(ids);
  CHECK(std::equal(a.values().begin(), a.values().end(), c.values().begin()));

  ForwardOptions train{true, 11};
  Tensor d1 = model.encoder_forward(ids, train);
  Tensor d2 = model.encoder_forward(ids, train);
  CHECK(std::equal(d1.values().begin(), d1.values().end(), d2.values().begin()));
  CHECK(!std::equal(d1.values().begin(), d1.values().end(), a.values().begin()));
}

TEST_CASE("alignment widths are positive") {
  std::mt19937_64 rng(6);
  for (int seed = 0; seed < 5; ++seed) {
    ModelConfig c = tiny_config();
    c.seed = seed;
    FpetsModel model(c);
    auto ids = random_ids(rng, 1 + rng() % 20, 10);
    Tensor r = model.predict_alignment_widths(ids);
    CHECK(r.shape() == Shape{ids.size()});
    for (Real v : r.values()) CHECK(v > 0.1);
  }
  FpetsModel model(tiny_config());
  model.set_width_bias(6.0);
  std::vector<int> ids{1, 2, 3};
  Tensor r = model.predict_alignment_widths(ids);
  for (Real v : r.values()) CHECK(std::abs(v - 6.0) < 2.0);
}

TEST_CASE("relative position feature") {
  Tensor one_hot = align::hard_attention(Tensor::matrix({{1, 0, 0}, {0, 1, 0}, {0, 1, 0},
                                                         {0, 0, 1}}));
  std::vector<double> c{2.5, 2.5, 2.5};
  Tensor f = relative_position_feature(c, one_hot);
  CHECK(f.shape() == Shape{4, 1});
  CHECK(f[0] == 1.25);
  for (std::size_t j = 1; j < 4; ++j) CHECK(f[j] == 2.5);
  std::vector<double> single{6};
  Tensor s = relative_position_feature(single, Tensor(Shape{5, 1}, 1.0));
  for (Real v : s.values()) CHECK(v == 3);
}

TEST_CASE("stage 1 forward") {
  FpetsModel model(tiny_config());
  model.set_width_bias(4.0);
  std::vector<int> ids{1, 4, 2, 8};
  auto out = model.stage1_forward(ids, 15);
  CHECK(out.features.shape() == Shape{15, 3});
  CHECK(out.r.shape() == Shape{4});
  CHECK(out.a_hat.shape() == Shape{15, 4});
  for (std::size_t j = 0; j < 15; ++j) {
    double s = 0;
    for (std::size_t i = 0; i < 4; ++i) s += out.a_hat.at(j, i);
    CHECK(std::abs(s - 1) < 1e-6);
  }

  for (auto& [name, t] : model.parameters({"encoder.out"})) {
    for (Real& v : t.values()) v = 0;
  }
  auto zeroed = model.stage1_forward(ids, 15);
  for (Real v : zeroed.context.values()) CHECK(v == 0);
  CHECK_THROWS_AS(model.stage2_forward(ids), UsageError);
}

TEST_CASE("stage 1 gradients reach every module") {
  FpetsModel model(tiny_config());
  model.set_width_bias(4.0);
  std::vector<int> ids{1, 4, 2, 8, 3};
  Tape tape;
  {
    TapeScope scope(tape);
    auto out = model.stage1_forward(ids, 21, {true, 3});
    Tensor loss = ops::add(ops::mean(ops::square(out.features)), ops::sum(out.r));
    tape.backward(loss);
  }
  for (const char* prefix : {"encoder.embedding", "encoder.conv0", "align.embedding",
                             "align.ufans.down0", "align.head", "codec.log_freqs",
                             "dec1.conv0", "dec1.out"}) {
    bool nonzero = false;
    for (auto& [name, t] : model.parameters({prefix})) {
      for (Real g : t.grad()) nonzero = nonzero || g != 0;
    }
    INFO(prefix);
    CHECK(nonzero);
  }
}

TEST_CASE("stage 1 matches finite differences") {
  ModelConfig c = tiny_config();
  c.dropout = 0;
  FpetsModel model(c);
  model.set_width_bias(3.0);
  std::vector<int> ids{1, 4, 2};
  std::vector<Tensor> params;
  std::vector<std::string> names;
  for (auto& [name, t] : model.parameters({"encoder.", "align.", "codec.", "dec1."})) {
    params.push_back(t);
    names.push_back(name);
  }
  Tensor target(Shape{10, 3});
  for (std::size_t i = 0; i < target.numel(); ++i) target[i] = std::cos(0.3 * i);
  auto loss = [&] {
    auto out = model.stage1_forward(ids, 10);
    return ops::add(ops::mean(ops::square(ops::sub(out.features, target))),
                    ops::scale(ops::sum(out.r), 0.01));
  };
  GradCheckOptions opt;
  opt.max_probes_per_tensor = 6;
  opt.step = 1e-4;
  opt.absolute_floor = 1e-7;
  auto rep = grad_check_params(loss, params, names, opt);
  INFO(rep.worst);
  CHECK(rep.passed);
}

TEST_CASE("stage 2 forward, freezing and non-autoregression") {
  FpetsModel model(tiny_config());
  model.set_width_bias(4.0);
  model.set_stage(2);
  CHECK(model.alignment_frozen());
  std::vector<int> ids{3, 1, 4, 1, 5};
  auto out = model.stage2_forward(ids);
  double total = 0;
  for (Real v : out.r.values()) total += v;
  CHECK(out.t_a == static_cast<std::size_t>(std::round(total)));
  CHECK(out.features.shape() == Shape{out.t_a, 3});
  CHECK(model.stage2_forward(ids, 17).features.rows() == 17);

  Tape trace(true);
  model.reset_decoder_evaluations();
  Tensor features;
  {
    TapeScope scope(trace);
    features = model.stage2_forward(ids, {}, {true, 2}).features;
    trace.backward(ops::mean(features));
  }
  CHECK(model.decoder_evaluations() == 1);
  CHECK(features.tag() == kDecoderOutputTag);
  CHECK(!trace.has_tagged_ancestor(features, kDecoderOutputTag));
  for (auto& [name, t] : model.parameters({"align.", "codec."})) {
    for (Real g : t.grad()) CHECK(g == 0);
  }
  bool dec_grad = false;
  for (auto& [name, t] : model.parameters({"dec2."})) {
    for (Real g : t.grad()) dec_grad = dec_grad || g != 0;
  }
  CHECK(dec_grad);
}

TEST_CASE("stage 2 decoder is local: chunked evaluation matches one pass") {
  ModelConfig c = tiny_config();
  FpetsModel model(c);
  model.set_stage(2);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  const std::size_t t = 600, width = c.encoder_hidden + 1;
  Tensor input(Shape{t, width});
  for (Real& v : input.values()) v = g(rng);
  Tensor full = model.ufans_decoder(input);
  // Chunk starts on a multiple of 2^depth so pooling phases line up.
  Tensor first = model.ufans_decoder(ops::slice_rows(input, 0, 400));
  Tensor second = model.ufans_decoder(ops::slice_rows(input, 200, 600));
  for (std::size_t j = 0; j < t; ++j) {
    const Tensor& part = j < 300 ? first : second;
    const std::size_t row = j < 300 ? j : j - 200;
    for (std::size_t k = 0; k < c.feature_dim; ++k) {
      CHECK(std::abs(full.at(j, k) - part.at(row, k)) < 1e-12);
    }
  }
}

TEST_CASE("checkpoint round trip and unique slots") {
  FpetsModel model(tiny_config());
  model.set_width_bias(5.0);
  std::set<std::string> names;
  std::size_t count = 0;
  for (auto& [name, t] : model.parameters()) {
    names.insert(name);
    ++count;
  }
  CHECK(names.size() == count);
  CHECK(names.count("codec.log_freqs") == 1);

  Checkpoint ck;
  model.save(ck);
  FpetsModel back = FpetsModel::from_checkpoint(Checkpoint::deserialize(ck.serialize()));
  std::vector<int> ids{2, 7, 1};
  auto a = model.stage1_forward(ids, 12);
  auto b = back.stage1_forward(ids, 12);
  CHECK(std::equal(a.features.values().begin(), a.features.values().end(),
                   b.features.values().begin()));

  model.set_stage(2);
  Checkpoint ck2;
  model.save(ck2);
  FpetsModel back2 = FpetsModel::from_checkpoint(ck2);
  CHECK(back2.stage() == 2);

  ModelConfig other = tiny_config();
  other.encoder_hidden = 7;
  FpetsModel wrong(other);
  CHECK_THROWS_AS(wrong.load(ck), FormatError);
}
