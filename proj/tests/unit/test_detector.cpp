#include <cmath>
#include <random>

#include "doctest.h"
#include "support/model_fixtures.hpp"
#include "support/oracles.hpp"
#include "tripath/detector.hpp"
#include "tripath/error.hpp"

using namespace tripath;
using namespace tripath::testing;
using M = Tensor2<double>;

namespace {

double l2_distance(const M& a, const M& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a.values()[i] - b.values()[i]) * (a.values()[i] - b.values()[i]);
  return std::sqrt(s);
}

M x_main(const InternalStateSet& s) {
  M x(3, s.dim());
  for (std::size_t c = 0; c < s.dim(); ++c) {
    x(0, c) = s.e_q[c];
    x(1, c) = s.e_a_dir[c];
    x(2, c) = s.e_q_rev[c];
  }
  return x;
}

EncodeCache<double>* const kNoEncode = nullptr;
FuseCache<double>* const kNoFuse = nullptr;
GateCache<double>* const kNoGate = nullptr;
nn::AttentionCache<double>* const kNoCross = nullptr;
ClassifyCache<double>* const kNoClassify = nullptr;

}  // namespace

TEST_SUITE("detector") {
  TEST_CASE("trajectory encoding shapes and position sensitivity") {
    auto cfg = small_config();
    cfg.positional_encoding = false;
    const auto p = random_params<double>(cfg, 7);
    std::mt19937_64 gen(1);
    const auto units = random_units(4, 16, gen).vectors.cast<double>();
    const auto enc = encode_trajectory(units, p, cfg, kNoEncode);
    CHECK(enc.h_cot.rows() == 1);
    CHECK(enc.h_cot.cols() == 16);
    CHECK(enc.unit_states.rows() == 4);
    CHECK(enc.unit_states.cols() == 16);

    M swapped = units;
    for (std::size_t c = 0; c < 16; ++c) std::swap(swapped(0, c), swapped(1, c));
    CHECK(l2_distance(encode_trajectory(swapped, p, cfg, kNoEncode).h_cot, enc.h_cot) < 1e-6);

    cfg.positional_encoding = true;
    const auto with_pe = encode_trajectory(units, p, cfg, kNoEncode);
    CHECK(l2_distance(encode_trajectory(swapped, p, cfg, kNoEncode).h_cot, with_pe.h_cot) > 1e-6);
  }

  TEST_CASE("intra-modal fusion is equivariant under consistent relabeling") {
    const auto cfg = small_config();
    auto p = random_params<double>(cfg, 3);
    const auto in = random_input(3, 16, 4);
    const auto x = x_main(in.states);
    const auto h = fuse_main(x, p, cfg, kNoFuse);
    CHECK(h.rows() == 3);
    CHECK(h.cols() == 16);

    M x_swapped = x;
    for (std::size_t c = 0; c < 16; ++c) {
      std::swap(x_swapped(0, c), x_swapped(1, c));
      std::swap(p.segment_table(0, c), p.segment_table(1, c));
    }
    const auto h_swapped = fuse_main(x_swapped, p, cfg, kNoFuse);
    for (std::size_t c = 0; c < 16; ++c) {
      CHECK(h_swapped(0, c) == doctest::Approx(h(1, c)).epsilon(1e-12));
      CHECK(h_swapped(1, c) == doctest::Approx(h(0, c)).epsilon(1e-12));
      CHECK(h_swapped(2, c) == doctest::Approx(h(2, c)).epsilon(1e-12));
    }
  }

  TEST_CASE("segment table receives gradient") {
    const auto cfg = small_config();
    const auto p = init_params<double>(cfg, 1);
    auto grad = make_zero_params<double>(cfg);
    for (int i = 0; i < 4; ++i) loss_and_gradient<double>(random_input(3, 16, 10 + i), i % 2, p, cfg, grad);
    double norm = 0.0;
    for (double g : grad.segment_table.values()) norm += g * g;
    CHECK(norm > 0.0);
  }

  TEST_CASE("gate range and zero initialization") {
    const auto cfg = small_config();
    auto p = random_params<double>(cfg, 5, 1.0);
    for (int i = 0; i < 20; ++i) {
      const auto out = forward<double>(random_input(3, 16, 100 + i), p, cfg);
      CHECK(out.gate > 0.0);
      CHECK(out.gate < 1.0);
    }
    p.gate_hidden.weight.fill(0.0);
    p.gate_hidden.bias.fill(0.0);
    p.gate_out.weight.fill(0.0);
    p.gate_out.bias.fill(0.0);
    for (int i = 0; i < 5; ++i) CHECK(forward<double>(random_input(3, 16, 200 + i), p, cfg).gate == 0.5);
  }

  TEST_CASE("a closed gate severs the trajectory") {
    for (auto mode : {CrossAttentionMode::full_trajectory, CrossAttentionMode::cls_only}) {
      const auto cfg = small_config(mode);
      const auto p = random_params<double>(cfg, 9);
      ForwardOptions closed;
      closed.gate_override = 0.0;
      std::mt19937_64 gen(77);
      for (int i = 0; i < 20; ++i) {
        auto a = random_input(3, 16, 300 + i);
        auto b = a;
        b.units = random_units(1 + i % 5, 16, gen);
        const auto la = forward<double>(a, p, cfg, closed).logits;
        const auto lb = forward<double>(b, p, cfg, closed).logits;
        CHECK(std::abs(la[0] - lb[0]) <= 1e-6);
        CHECK(std::abs(la[1] - lb[1]) <= 1e-6);
        // Open, the trajectory matters.
        CHECK(forward<double>(a, p, cfg).logits != forward<double>(b, p, cfg).logits);
      }
    }
  }

  TEST_CASE("dropping cross-attention equals a closed gate with zero value and output biases") {
    const auto cfg = small_config();
    auto p = random_params<double>(cfg, 11);
    p.cross_attention.value.bias.fill(0.0);
    p.cross_attention.output.bias.fill(0.0);
    ForwardOptions closed, ablated;
    closed.gate_override = 0.0;
    ablated.ablate_cross_attention = true;
    for (int i = 0; i < 10; ++i) {
      const auto in = random_input(2 + i % 4, 16, 400 + i);
      const auto a = forward<double>(in, p, cfg, closed).logits;
      const auto b = forward<double>(in, p, cfg, ablated).logits;
      CHECK(std::abs(a[0] - b[0]) <= 1e-12);
      CHECK(std::abs(a[1] - b[1]) <= 1e-12);
    }
  }

  TEST_CASE("cross-attention weights") {
    const auto in = random_input(4, 16, 12);
    {
      const auto cfg = small_config(CrossAttentionMode::cls_only);
      const auto out = forward<double>(in, random_params<double>(cfg, 1), cfg);
      REQUIRE(out.cross_attention.cols() == 1);
      for (double w : out.cross_attention.values()) CHECK(w == 1.0);
    }
    const auto cfg = small_config();
    const auto out = forward<double>(in, random_params<double>(cfg, 1), cfg);
    REQUIRE(out.cross_attention.rows() == 3);
    REQUIRE(out.cross_attention.cols() == 5);
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (double w : out.cross_attention.row(r)) s += w;
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto p = random_params<double>(cfg, 2);
    const auto h = fuse_main(x_main(in.states), p, cfg, kNoFuse);
    const auto enc = encode_trajectory(in.units.vectors.cast<double>(), p, cfg, kNoEncode);
    const auto g = apply_gate(h, enc, p, cfg, std::nullopt, kNoGate);
    CHECK(g.keys_values.rows() == 5);
    const auto cross = cross_modal_fuse(h, g.keys_values, p, cfg, kNoCross);
    CHECK(cross.z.rows() == 3);
    CHECK(cross.z.cols() == 16);
  }

  TEST_CASE("classifier") {
    const auto cfg = small_config();
    auto p = random_params<double>(cfg, 13);
    p.classifier_hidden.weight.fill(0.0);
    p.classifier_hidden.bias.fill(0.0);
    p.classifier_out.weight.fill(0.0);
    p.classifier_out.bias.fill(0.0);
    const auto z = random_params<double>(cfg, 14).segment_table;  // any 3 x d matrix
    const auto logits = classify(z, p, kNoClassify);
    CHECK(logits[0] == 0.0);
    CHECK(logits[1] == 0.0);
    CHECK(softmax2(logits)[1] == 0.5);

    std::mt19937_64 gen(15);
    std::normal_distribution<double> dist(0.0, 30.0);
    for (int i = 0; i < 100; ++i) {
      const auto s = softmax2<double>({dist(gen), dist(gen)});
      CHECK(std::abs(s[0] + s[1] - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("focal loss closed forms") {
    CHECK(focal_loss<double>({0, 0}, 1, 0.5, 0.0).loss == doctest::Approx(0.346574).epsilon(1e-6));
    CHECK(std::abs(focal_loss<double>({0, 0}, 1, 0.5, 0.0).loss - 0.5 * std::log(2.0)) <= 1e-15);
    CHECK(focal_loss<double>({-20, 20}, 1, 0.25, 2.0).loss < 1e-8);
    const double pt9 = focal_loss<double>({0, std::log(9.0)}, 1, 0.25, 2.0).loss;
    CHECK(std::abs(pt9 - 2.63401e-4) <= 1e-9);
    CHECK(std::abs(pt9 - 0.25 * 0.01 * -std::log(0.9)) <= 1e-15);

    std::mt19937_64 gen(16);
    std::normal_distribution<double> dist(0.0, 3.0);
    for (int i = 0; i < 100; ++i) {
      const double z0 = dist(gen), z1 = dist(gen);
      const int label = i % 2;
      CHECK(std::abs(focal_loss<double>({z0, z1}, label, 0.5, 0.0).loss -
                     0.5 * cross_entropy_reference(z0, z1, label)) <= 1e-12);
      CHECK(focal_loss<double>({z0, z1}, label, 0.25, 2.0).loss ==
            doctest::Approx(focal_reference(z0, z1, label, 0.25, 2.0)).epsilon(1e-12));
    }
  }

  TEST_CASE("focal loss gradient, monotonicity and focusing") {
    std::mt19937_64 gen(17);
    std::normal_distribution<double> dist(0.0, 2.0);
    for (int i = 0; i < 20; ++i) {
      const std::vector<double> z{dist(gen), dist(gen)};
      const int label = i % 2;
      const auto f = [&](const std::vector<double>& v) { return focal_reference(v[0], v[1], label, 0.25, 2.0); };
      const auto analytic = focal_loss<double>({z[0], z[1]}, label, 0.25, 2.0).d_logits;
      for (std::size_t k = 0; k < 2; ++k) {
        CHECK(analytic[k] == doctest::Approx(central_difference(f, z, k, 1e-6)).epsilon(1e-6));
      }
    }

    // p_t on a grid, expressed through logits [0, logit(p_t)] for label 1.
    auto loss_at = [](double pt, double gamma, int label) {
      const double z = std::log(pt / (1.0 - pt));
      return label == 1 ? focal_loss<double>({0, z}, 1, 0.25, gamma).loss
                        : focal_loss<double>({z, 0}, 0, 0.25, gamma).loss;
    };
    for (int label : {0, 1}) {
      double prev_loss = INFINITY, prev_ratio = INFINITY;
      for (int k = 1; k <= 99; ++k) {
        const double pt = k / 100.0;
        const double loss = loss_at(pt, 2.0, label);
        const double ratio = loss / loss_at(pt, 0.0, label);
        CHECK(loss < prev_loss);
        CHECK(ratio < prev_ratio);  // ratio rises with 1 - p_t
        CHECK(ratio == doctest::Approx((1 - pt) * (1 - pt)).epsilon(1e-9));
        prev_loss = loss;
        prev_ratio = ratio;
      }
    }
  }

  TEST_CASE("full-model gradients match finite differences") {
    for (auto mode : {CrossAttentionMode::full_trajectory, CrossAttentionMode::cls_only}) {
      for (bool pe : {true, false}) {
        const auto cfg = small_config(mode, pe);
        const auto sweep = full_gradient_sweep(cfg, random_input(3, 16, 21), 1, 22);
        CAPTURE(to_string(mode));
        CAPTURE(pe);
        CAPTURE(sweep.worst_tensor);
        CHECK(sweep.coordinates == parameter_count(make_zero_params<double>(cfg)));
        CHECK(sweep.worst < 1e-4);
      }
    }
  }

  TEST_CASE("forward determinism, batching and output invariants") {
    const auto cfg = small_config();
    const auto p = cast_params<float>(random_params<double>(cfg, 23));
    std::vector<DetectorInput> inputs;
    for (int i = 0; i < 8; ++i) inputs.push_back(random_input(1 + i % 6, 16, 500 + i));
    const auto batched = forward_batch(inputs, p, cfg, 3);
    REQUIRE(batched.size() == 8);
    for (std::size_t i = 0; i < 8; ++i) {
      const auto single = forward<float>(inputs[i], p, cfg);
      const auto again = forward<float>(inputs[i], p, cfg);
      CHECK(single.logits == again.logits);
      CHECK(single.cross_attention == again.cross_attention);
      CHECK(single.pooled_z == again.pooled_z);
      CHECK(std::abs(batched[i].logits[0] - single.logits[0]) <= 1e-6);
      CHECK(std::abs(batched[i].logits[1] - single.logits[1]) <= 1e-6);
      const auto probs = softmax2(single.logits);
      CHECK(single.p_halluc == probs[1]);
      CHECK(std::abs(probs[0] + probs[1] - 1.0f) <= 1e-6);
      CHECK(single.gate > 0.0f);
      CHECK(single.gate < 1.0f);
      CHECK(single.cross_attention.cols() == inputs[i].units.size() + 1);
      for (std::size_t r = 0; r < 3; ++r) {
        float s = 0;
        for (float w : single.cross_attention.row(r)) s += w;
        CHECK(s == doctest::Approx(1.0).epsilon(1e-5));
      }
    }
  }

  TEST_CASE("bad inputs") {
    const auto cfg = small_config();
    const auto p = init_params<float>(cfg, 1);
    auto too_many = random_input(7, 16, 1);
    auto wrong_width = random_input(3, 8, 1);
    auto no_units = random_input(3, 16, 1);
    no_units.units = {};
    auto code = [&](const DetectorInput& in) {
      try {
        forward<float>(in, p, cfg);
      } catch (const Error& e) {
        return e.code();
      }
      return ErrorCode::InvalidArgument;
    };
    CHECK(code(too_many) == ErrorCode::TooManyUnits);
    CHECK(code(wrong_width) == ErrorCode::DimensionMismatch);
    CHECK(code(no_units) == ErrorCode::EmptyInput);
  }
}
