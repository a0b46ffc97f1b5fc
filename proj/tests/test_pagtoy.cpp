// Copyright 2026 The graspfactory Authors
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
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "graspfactory/evalkit.hpp"
#include "graspfactory/pagtoy.hpp"
#include "oracles.hpp"

using namespace gf;

namespace {

Intrinsics cam() { return Intrinsics{}; }  // 640 x 480

PagModel uniform_model(int vocab) {
  PagConfig c;
  c.vocab = vocab;
  c.obs_dim = 4;
  c.embed = 3;
  c.hidden = 4;
  c.flow_hidden = 5;
  Rng rng(3);
  return PagModel(c, rng);  // heads start at zero
}

Chunk random_chunk(Rng& rng) {
  Chunk c;
  for (auto& v : c) v = standard_normal(rng);
  return c;
}

bool section_is_zero(const PagModel& m, const VecX& g, const std::string& prefix) {
  for (const auto& s : m.sections()) {
    if (s.name.rfind(prefix, 0) != 0) continue;
    if (g.segment(s.offset, s.size()).cwiseAbs().maxCoeff() != 0.0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("bbox tokens: full image maps to the extremes") {
  const std::vector<BBox2D> boxes{{ViewId::kFront, 0, 0, 640, 480}, {ViewId::kSide, 0, 0, 640, 480}};
  const BboxTokens t = tokenize_bbox(boxes, cam(), 256);
  for (int v = 0; v < 2; ++v) {
    CHECK(t[4 * v + 0] == 0);
    CHECK(t[4 * v + 1] == 0);
    CHECK(t[4 * v + 2] == 255);
    CHECK(t[4 * v + 3] == 255);
  }
}

TEST_CASE("bbox tokens: round trip within one bin") {
  Rng rng(5);
  for (int i = 0; i < 2000; ++i) {
    const double x0 = uniform(rng, 0, 600), y0 = uniform(rng, 0, 440);
    const std::vector<BBox2D> in{{ViewId::kFront, x0, y0, x0 + uniform(rng, 1, 40), y0 + uniform(rng, 1, 40)},
                                 {ViewId::kSide, y0, x0 * 0.7, y0 + 5, x0 * 0.7 + 5}};
    const auto out = detokenize_bbox(tokenize_bbox(in, cam(), 256), cam(), 256);
    REQUIRE(out.size() == 2);
    for (int v = 0; v < 2; ++v) {
      CHECK(std::abs(out[v].x_min - in[v].x_min) <= 640.0 / 256);
      CHECK(std::abs(out[v].x_max - in[v].x_max) <= 640.0 / 256);
      CHECK(std::abs(out[v].y_min - in[v].y_min) <= 480.0 / 256);
      CHECK(std::abs(out[v].y_max - in[v].y_max) <= 480.0 / 256);
    }
  }
}

TEST_CASE("bbox tokens: a one pixel box keeps min <= max") {
  const std::vector<BBox2D> boxes{{ViewId::kFront, 639, 479, 640, 480}, {ViewId::kSide, 100, 100, 101, 101}};
  const BboxTokens t = tokenize_bbox(boxes, cam(), 256);
  CHECK(t[0] <= t[2]);
  CHECK(t[1] <= t[3]);
  CHECK(t[2] == 255);
  CHECK(t[4] <= t[6]);
}

TEST_CASE("grasp tokens: center, minimum, bounds") {
  const GraspBounds b;
  const Vec3 center = 0.5 * (b.min + b.max);
  const GraspTokens mid = tokenize_grasp(make_pose(Mat3::Identity(), center), b, 256);
  for (int i = 0; i < 6; ++i) CHECK(std::abs(mid[i] - 128) <= 1);

  const GraspTokens lo = tokenize_grasp(make_pose(Mat3::Identity(), b.min), b, 256);
  CHECK(lo[0] == 0);
  CHECK(lo[1] == 0);
  CHECK(lo[2] == 0);

  CHECK_THROWS_AS(tokenize_grasp(make_pose(Mat3::Identity(), b.max + Vec3(0.01, 0, 0)), b, 256),
                  OutOfBounds);
  CHECK_THROWS_AS(tokenize_grasp(make_pose(Mat3::Identity(), b.min - Vec3(0, 0, 1e-6)), b, 256),
                  OutOfBounds);
}

TEST_CASE("grasp tokens: round trip within a bin") {
  const GraspBounds b;
  Rng rng(8);
  const int v = 256;
  for (int i = 0; i < 500; ++i) {
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = uniform(rng, b.min[k], b.max[k]);
    const Vec3 rpy(uniform(rng, -3, 3), uniform(rng, -1.5, 1.5), uniform(rng, -3, 3));
    const Pose pose = make_pose(rotation_from_rpy(rpy), p);
    const Pose back = detokenize_grasp(tokenize_grasp(pose, b, v), b, v);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(back.translation()[k] - p[k]) <= (b.max[k] - b.min[k]) / v);
    const Vec3 rb = rpy_from_rotation(back.linear());
    for (int k = 0; k < 3; ++k) CHECK(std::abs(rb[k] - rpy[k]) <= 2 * M_PI / v + 1e-9);
  }
}

TEST_CASE("uniform logits give ln V per token") {
  for (int vocab : {7, 256}) {
    const PagModel m = uniform_model(vocab);
    Rng rng(1);
    auto g = gft::random_sample(rng, m, false);
    CHECK(loss_s2(m, g) == doctest::Approx(8 * std::log(vocab)).epsilon(1e-12));
    auto s = gft::random_sample(rng, m, true);
    CHECK(loss_s2(m, s) == doctest::Approx(14 * std::log(vocab)).epsilon(1e-12));
    const FlowBatch b = make_flow_batch(s.action, rng);
    CHECK(total_loss(m, g, b) == loss_s2(m, g));
  }
}

TEST_CASE("flow loss needs a synthetic sample") {
  Rng rng(2);
  const PagModel m = gft::random_small_model(rng);
  const auto g = gft::random_sample(rng, m, false);
  CHECK_THROWS_AS(loss_s1(m, g, make_flow_batch(Chunk::Zero(), rng)), NotSynthetic);
}

TEST_CASE("oracle field has zero flow loss") {
  Rng rng(4);
  const PagModel m = gft::random_small_model(rng);
  const auto s = gft::random_sample(rng, m, true);
  const FlowBatch b = make_flow_batch(s.action, rng);
  const VectorField oracle = [&](const Chunk&, double, const FlowContext&) -> Chunk {
    return b.eps - b.a0;
  };
  CHECK(loss_s1(oracle, s, b) == 0.0);
  CHECK(loss_s2(m, s) + loss_s1(oracle, s, b) == loss_s2(m, s));
}

TEST_CASE("interpolant endpoints") {
  Rng rng(6);
  const Chunk a0 = random_chunk(rng), eps = random_chunk(rng);
  CHECK(make_flow_batch(a0, eps, 0.0).a_t == a0);
  CHECK(make_flow_batch(a0, eps, 1.0).a_t == eps);
  const FlowBatch mid = make_flow_batch(a0, eps, 0.3);
  CHECK((mid.a_t - (0.7 * a0 + 0.3 * eps)).cwiseAbs().maxCoeff() < 1e-15);
  for (int i = 0; i < 100; ++i) {
    const FlowBatch r = make_flow_batch(a0, rng);
    CHECK(r.t >= 0.0);
    CHECK(r.t <= 1.0);
  }
}

TEST_CASE("flow loss matches a hand recomputation") {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    const PagModel m = gft::random_small_model(rng);
    const auto s = gft::random_sample(rng, m, true);
    const FlowBatch b = make_flow_batch(s.action, rng);
    const FlowContext ctx{&s.observation.x, &s.observation.proprio, s.tokens};
    const Chunk v = m.field(b.a_t, b.t, ctx);
    double by_hand = 0.0;
    for (int i = 0; i < kChunkDim; ++i) {
      const double d = v(i) - (b.eps(i) - b.a0(i));
      by_hand += d * d;
    }
    CHECK(std::abs(loss_s1(m, s, b) - by_hand) <= 1e-12 * std::max(1.0, by_hand));
    const double total = total_loss(m, s, b);
    CHECK(std::abs(total - (loss_s2(m, s) + by_hand)) <= 1e-12 * std::max(1.0, total));
  }
}

TEST_CASE("accumulate_grad reports the loss parts") {
  Rng rng(10);
  const PagModel m = gft::random_small_model(rng);
  const auto s = gft::random_sample(rng, m, true);
  const FlowBatch b = make_flow_batch(s.action, rng);
  VecX g;
  const LossParts parts = accumulate_grad(m, s, b, g);
  CHECK(parts.s2 == doctest::Approx(loss_s2(m, s)).epsilon(1e-12));
  CHECK(parts.s1 == doctest::Approx(loss_s1(m, s, b)).epsilon(1e-12));
}

TEST_CASE("gradient matches central differences") {
  // Floor of 1e-4 on the denominator: at h=1e-5 truncation leaves ~1e-9
  // absolute error on near-zero coordinates.
  Rng rng(12);
  for (int draw = 0; draw < 12; ++draw) {
    const PagModel m = gft::random_small_model(rng);
    const auto s = gft::random_sample(rng, m, draw % 3 != 0);
    const FlowBatch b = make_flow_batch(s.action, rng);
    const gft::FdReport r = gft::finite_difference_check(m, s, b, 1e-5, 1e-4);
    INFO("draw " << draw << " abs " << r.max_absolute);
    CHECK(r.max_relative < 1e-4);
  }
}

TEST_CASE("grounding samples leave the grasp head and flow untouched") {
  Rng rng(13);
  for (int draw = 0; draw < 50; ++draw) {
    const PagModel m = gft::random_small_model(rng);
    const auto s = gft::random_sample(rng, m, false);
    const VecX g = grad(m, s, make_flow_batch(random_chunk(rng), rng));
    CHECK(section_is_zero(m, g, "grasp."));
    CHECK(section_is_zero(m, g, "flow."));
    CHECK(section_is_zero(m, g, "tok.W1q"));  // proprio enters only at grasp positions
    CHECK_FALSE(section_is_zero(m, g, "bbox."));
  }
}

TEST_CASE("zero model, zero inputs: only output biases get gradient") {
  PagConfig c;
  c.vocab = 5;
  c.obs_dim = 4;
  c.embed = 3;
  c.hidden = 4;
  c.flow_hidden = 5;
  const PagModel m(c);
  TrainingSample s;
  s.is_synthetic = true;
  s.observation.x = VecX::Zero(4);
  s.observation.proprio = VecX::Zero(c.proprio_dim);
  s.tokens.fill(0);
  Rng rng(14);
  const VecX g = grad(m, s, make_flow_batch(random_chunk(rng), random_chunk(rng), 0.5));
  for (const auto& sec : m.sections()) {
    const bool output_bias = sec.name == "bbox.b" || sec.name == "grasp.b" || sec.name == "flow.b3";
    const double mag = g.segment(sec.offset, sec.size()).cwiseAbs().maxCoeff();
    INFO(sec.name);
    if (output_bias) CHECK(mag > 0.0);
    else CHECK(mag == 0.0);
  }
}

TEST_CASE("gradient is linear in the loss weight") {
  Rng rng(15);
  const PagModel m = gft::random_small_model(rng);
  const auto s = gft::random_sample(rng, m, true);
  const FlowBatch b = make_flow_batch(s.action, rng);
  const VecX g1 = grad(m, s, b);
  VecX g2;
  accumulate_grad(m, s, b, g2, 2.0);
  CHECK((g2 - 2.0 * g1).cwiseAbs().maxCoeff() <= 1e-12 * g1.cwiseAbs().maxCoeff());
  accumulate_grad(m, s, b, g2, -2.0);
  CHECK(g2.cwiseAbs().maxCoeff() <= 1e-12 * g1.cwiseAbs().maxCoeff());
}

TEST_CASE("logits read only the earlier tokens") {
  Rng rng(16);
  const PagModel m = gft::random_small_model(rng);
  const auto s = gft::random_sample(rng, m, true);
  for (int pos = 0; pos < kTotalTokens; ++pos) {
    TokenSeq changed = s.tokens;
    for (int j = pos; j < kTotalTokens; ++j) changed[j] = (changed[j] + 1) % m.config().vocab;
    CHECK(m.logits(s.observation, s.tokens, pos) == m.logits(s.observation, changed, pos));
  }
  // Grasp positions see the boxes.
  TokenSeq other = s.tokens;
  other[3] = (other[3] + 1) % m.config().vocab;
  CHECK((m.logits(s.observation, s.tokens, kBboxTokens) -
         m.logits(s.observation, other, kBboxTokens)).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("decoding order: grasp tokens consume the decoded boxes") {
  Rng rng(17);
  const PagModel m = gft::random_small_model(rng);
  const auto s = gft::random_sample(rng, m, true);
  DecodeTrace trace;
  Rng r1(99);
  const SampledActions out = sample_actions(m, s.observation, 10, r1, &trace);
  for (int pos = 0; pos < kTotalTokens; ++pos) {
    REQUIRE(trace.history[pos].size() == static_cast<std::size_t>(pos));
    for (int j = 0; j < pos; ++j) CHECK(trace.history[pos][j] == out.tokens[j]);
    // Each decoded token is the argmax given that history.
    const VecX l = m.logits(s.observation, out.tokens, pos);
    Eigen::Index best;
    l.maxCoeff(&best);
    CHECK(out.tokens[pos] == best);
  }
  Rng r2(99);
  const SampledActions again = sample_actions(m, s.observation, 10, r2);
  CHECK(again.tokens == out.tokens);
  CHECK(again.normalized == out.normalized);
}

TEST_CASE("Euler integration of the oracle field") {
  Rng rng(18);
  const Chunk a0 = random_chunk(rng), eps = random_chunk(rng);
  const VectorField oracle = [&](const Chunk&, double, const FlowContext&) -> Chunk { return eps - a0; };
  FlowContext ctx;
  for (int n : {1, 2, 10, 50}) {
    const Chunk got = integrate_field(oracle, eps, ctx, n);
    CHECK((got - a0).cwiseAbs().maxCoeff() < 1e-12);
  }
  // State-dependent field v = (a - a0) / t: exact path is the straight line;
  // Euler error stays O(dt).
  const VectorField linear = [&](const Chunk& a, double t, const FlowContext&) -> Chunk {
    return (a - a0) / t;
  };
  for (int n : {5, 20}) {
    CHECK((integrate_field(linear, eps, ctx, n) - a0).cwiseAbs().maxCoeff() < 1e-9);
  }
  // One step: a0 estimate = eps - v(eps, 1).
  const VectorField probe = [](const Chunk& a, double t, const FlowContext&) -> Chunk {
    return 0.5 * a + Chunk::Constant(t);
  };
  CHECK((integrate_field(probe, eps, ctx, 1) - (eps - probe(eps, 1.0, ctx))).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(integrate_field(probe, eps, ctx, 0), PreconditionError);
}

TEST_CASE("synthetic-only mixer never draws grounding samples") {
  Rng rng(19);
  const PagModel m = gft::random_small_model(rng);
  std::vector<TrainingSample> syn, gr;
  for (int i = 0; i < 5; ++i) syn.push_back(gft::random_sample(rng, m, true));
  for (int i = 0; i < 5; ++i) gr.push_back(gft::random_sample(rng, m, false));
  SampleMixer only(syn, gr, 1.0);
  for (int i = 0; i < 1000; ++i) CHECK(only.draw(rng).is_synthetic);
  CHECK(only.grounding_drawn() == 0);
  CHECK(only.synthetic_drawn() == 1000);

  SampleMixer half(syn, gr, 0.5);
  for (int i = 0; i < 4000; ++i) half.draw(rng);
  CHECK(std::abs(static_cast<double>(half.synthetic_drawn()) - 2000.0) < 200.0);
  CHECK_THROWS_AS(SampleMixer(syn, gr, 1.5), ConfigError);
  CHECK_THROWS_AS(SampleMixer({}, gr, 0.5), PreconditionError);
}

TEST_CASE("training is deterministic for a seed and lowers the loss") {
  PipelineConfig c = gft::small_config();
  c.train_steps = 150;
  c.batch_size = 8;
  const auto& eps = gft::sample_episodes();
  const ToyRun a = train_toy(c, eps);
  const ToyRun b = train_toy(c, eps);
  REQUIRE(a.result.curve.size() == 150);
  for (std::size_t i = 0; i < a.result.curve.size(); ++i) {
    CHECK(a.result.curve[i].total == b.result.curve[i].total);
  }
  CHECK(a.model.params() == b.model.params());
  CHECK(a.final_loss < a.initial_loss);
  CHECK(a.result.grounding_samples > 0);
  CHECK(a.result.synthetic_samples > 0);
}

TEST_CASE("plain SGD also runs") {
  PipelineConfig c = gft::small_config();
  c.train_steps = 40;
  c.batch_size = 4;
  c.optimizer = "sgd";
  c.learning_rate = 0.01;
  const ToyRun r = train_toy(c, gft::sample_episodes());
  CHECK(std::isfinite(r.final_loss));
}

TEST_CASE("checkpoint round trip") {
  gft::TempDir dir("ckpt");
  Rng rng(20);
  PagModel m = gft::random_small_model(rng);
  const auto path = dir.path() / "m.bin";
  save_checkpoint(m, path);
  const PagModel back = load_checkpoint(path);
  CHECK(back.params() == m.params());
  CHECK(back.action_mean == m.action_mean);
  CHECK(back.action_std == m.action_std);
  CHECK(back.config().vocab == m.config().vocab);
  CHECK(back.sections().size() == m.sections().size());

  std::filesystem::resize_file(path, std::filesystem::file_size(path) - 8);
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  {
    std::ofstream junk(path, std::ios::binary);
    junk << "not a model";
  }
  CHECK_THROWS_AS(load_checkpoint(path), ParseError);
  CHECK_THROWS(load_checkpoint(dir.path() / "missing.bin"));
}

TEST_CASE("toy samples from episodes") {
  const auto& eps = gft::sample_episodes();
  const ToyTaskConfig task = toy_task_for(gft::small_config());
  PagModel m(toy_model_config(task));
  fit_action_normalizer(m, eps);
  CHECK((m.action_std.array() > 0).all());
  const ToySet set = build_toy_set(eps, m, task);
  CHECK(!set.synthetic.empty());
  CHECK(set.synthetic.size() == set.grounding.size());
  for (const auto& s : set.synthetic) {
    CHECK(s.observation.x.size() == toy_obs_dim(task));
    CHECK(s.observation.proprio.size() == kToyProprioDim);
    CHECK(s.observation.x.allFinite());
  }
  for (const auto& g : set.grounding) CHECK_FALSE(g.is_synthetic);
  const ToySet capped = build_toy_set(eps, m, task, 10);
  CHECK(capped.synthetic.size() <= 10);
}
