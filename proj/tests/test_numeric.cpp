#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "refdense/autograd.hpp"
#include "refdense/blob.hpp"
#include "refdense/errors.hpp"
#include "refdense/ops.hpp"
#include "refdense/random.hpp"
#include "refdense/tensor.hpp"

using namespace refdense;

namespace {

Tensor random_tensor(Rng& rng, Shape shape, double lo, double hi,
                     bool requires_grad = true) {
  std::vector<double> vals(numel_of(shape));
  for (auto& v : vals) v = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(vals), requires_grad);
}

// Brute-force attention straight from the definition: explicit per-head
// score matrix, explicit softmax, explicit weighted sum.
std::vector<double> attention_oracle(const Tensor& q, const Tensor& k,
                                     const Tensor& v, int heads) {
  const int tq = q.rows(), tk = k.rows(), d = q.cols();
  const int dh = d / heads;
  std::vector<double> out(static_cast<std::size_t>(tq) * d, 0.0);
  for (int h = 0; h < heads; ++h) {
    for (int i = 0; i < tq; ++i) {
      std::vector<double> scores(tk);
      for (int j = 0; j < tk; ++j) {
        double dot = 0.0;
        for (int c = 0; c < dh; ++c)
          dot += q.at(i, h * dh + c) * k.at(j, h * dh + c);
        scores[j] = dot / std::sqrt(static_cast<double>(dh));
      }
      double denom = 0.0;
      for (int j = 0; j < tk; ++j) denom += std::exp(scores[j]);
      for (int c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (int j = 0; j < tk; ++j)
          acc += std::exp(scores[j]) / denom * v.at(j, h * dh + c);
        out[static_cast<std::size_t>(i) * d + h * dh + c] = acc;
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("tensor invariants") {
  CHECK_THROWS_AS(Tensor::from({2, 2}, {1.0, 2.0}), DimensionError);
  CHECK_THROWS_AS(Tensor::zeros({0, 3}), DimensionError);
  Tensor t = Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.numel() == 6);
  CHECK(t.at(1, 2) == 6.0);
}

TEST_CASE("matmul examples") {
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor b = Tensor::from({2, 2}, {3, 4, 5, 6});
  Tensor r = matmul(eye, b);
  for (int i = 0; i < 4; ++i) CHECK(r.at(i) == b.at(i));

  Tensor a = Tensor::from({1, 2}, {1, 2});
  Tensor c = Tensor::from({2, 1}, {3, 4});
  CHECK(matmul(a, c).value() == doctest::Approx(11.0).epsilon(1e-14));

  CHECK(matmul(Tensor::from({1, 1}, {2}), Tensor::from({1, 1}, {0})).value() ==
        0.0);

  // Mismatch message names both shapes.
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    std::string msg = e.what();
    CHECK(msg.find("(2x3)") != std::string::npos);
  }
}

TEST_CASE("softmax examples and row-sum invariant") {
  Tensor u = softmax_last(Tensor::from({3}, {0, 0, 0}));
  for (int i = 0; i < 3; ++i)
    CHECK(u.at(i) == doctest::Approx(1.0 / 3).epsilon(1e-14));

  Tensor big = softmax_last(Tensor::from({2}, {1000, 1000}));
  CHECK(big.at(0) == doctest::Approx(0.5).epsilon(1e-14));

  Tensor closed = softmax_last(Tensor::from({2}, {0.0, std::log(3.0)}));
  CHECK(closed.at(0) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(closed.at(1) == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    Tensor x = random_tensor(rng, {4, 6}, -50.0, 50.0, false);
    Tensor y = softmax_last(x);
    for (int r = 0; r < 4; ++r) {
      double s = 0.0;
      for (int c = 0; c < 6; ++c) s += y.at(r, c);
      CHECK(std::abs(s - 1.0) <= 1e-12);
    }
  }
}

TEST_CASE("sigmoid examples") {
  CHECK(sigmoid(Tensor::scalar(0.0)).value() == 0.5);
  CHECK(sigmoid(Tensor::scalar(std::log(3.0))).value() ==
        doctest::Approx(0.75).epsilon(1e-14));
  // 64-bit path keeps extreme negatives positive; the clamp used before any
  // log then lifts them to 1e-12.
  double tiny = sigmoid(Tensor::scalar(-745.0)).value();
  CHECK(tiny > 0.0);
  double clamped = clamp(sigmoid(Tensor::scalar(-745.0)), 1e-12, 1 - 1e-12).value();
  CHECK(clamped == 1e-12);
}

TEST_CASE("conv1d examples") {
  // Identity kernel (w=1) with stride 2 subsamples positions {0,2,4,6}.
  std::vector<double> xs(8);
  for (int i = 0; i < 8; ++i) xs[i] = i + 1;
  Tensor x = Tensor::from({8, 1}, xs);
  Tensor ident = Tensor::from({1, 1, 1}, {1.0});
  Tensor sub = conv1d(x, ident, 2);
  CHECK(sub.rows() == 4);
  for (int i = 0; i < 4; ++i) CHECK(sub.at(i) == xs[2 * i]);

  Tensor x2 = Tensor::from({4, 1}, {1, 2, 3, 4});
  Tensor box = Tensor::from({3, 1, 1}, {1, 1, 1});
  Tensor y = conv1d(x2, box, 1);
  const double expect[] = {3, 6, 9, 7};
  for (int i = 0; i < 4; ++i)
    CHECK(y.at(i) == doctest::Approx(expect[i]).epsilon(1e-14));

  Tensor z = conv1d(Tensor::zeros({5, 2}), Tensor::full({3, 2, 3}, 0.7), 1);
  for (std::int64_t i = 0; i < z.numel(); ++i) CHECK(z.at(i) == 0.0);

  CHECK_THROWS_AS(conv1d(x2, Tensor::zeros({2, 1, 1}), 1), ConfigError);
  CHECK_THROWS_AS(conv1d(x2, box, 0), ConfigError);
}

TEST_CASE("conv1d identity map at stride 1") {
  Rng rng(21);
  Tensor x = random_tensor(rng, {6, 3}, -2, 2, false);
  // Width-3 kernel whose center tap is the identity.
  std::vector<double> kv(3 * 3 * 3, 0.0);
  for (int d = 0; d < 3; ++d) kv[(1 * 3 + d) * 3 + d] = 1.0;
  Tensor y = conv1d(x, Tensor::from({3, 3, 3}, kv), 1);
  for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
}

TEST_CASE("upsample_linear examples") {
  Tensor x = Tensor::from({2, 1}, {1, 3});
  Tensor y = upsample_linear(x, 4);
  CHECK(y.at(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(y.at(1) == doctest::Approx(5.0 / 3).epsilon(1e-14));
  CHECK(y.at(2) == doctest::Approx(7.0 / 3).epsilon(1e-14));
  CHECK(y.at(3) == doctest::Approx(3.0).epsilon(1e-14));

  Tensor c = upsample_linear(Tensor::from({1, 1}, {5}), 3);
  for (int i = 0; i < 3; ++i) CHECK(c.at(i) == 5.0);

  Rng rng(3);
  Tensor r = random_tensor(rng, {5, 4}, -2, 2, false);
  Tensor same = upsample_linear(r, 5);
  for (std::int64_t i = 0; i < r.numel(); ++i) CHECK(same.at(i) == r.at(i));
}

TEST_CASE("attention degenerate and closed-form cases") {
  // Single key: softmax over one entry is 1, each output row equals v.
  Tensor q = Tensor::from({3, 2}, {1, 2, -1, 0.5, 3, 3});
  Tensor k = Tensor::from({1, 2}, {0.3, -0.2});
  Tensor v = Tensor::from({1, 2}, {7, -4});
  Tensor out = attention(q, k, v, 1);
  for (int i = 0; i < 3; ++i) {
    CHECK(out.at(i, 0) == doctest::Approx(7.0).epsilon(1e-14));
    CHECK(out.at(i, 1) == doctest::Approx(-4.0).epsilon(1e-14));
  }

  // Query orthogonal to every key: uniform weights, output = column mean.
  Tensor q2 = Tensor::from({1, 2}, {0, 1});
  Tensor k2 = Tensor::from({2, 2}, {1, 0, -1, 0});
  Tensor v2 = Tensor::from({2, 2}, {2, 6, 4, -2});
  Tensor out2 = attention(q2, k2, v2, 1);
  CHECK(out2.at(0, 0) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(out2.at(0, 1) == doctest::Approx(2.0).epsilon(1e-12));

  // 2x2 identity case against the brute-force oracle.
  Tensor eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  Tensor out3 = attention(eye, eye, eye, 1);
  auto oracle = attention_oracle(eye, eye, eye, 1);
  for (std::int64_t i = 0; i < out3.numel(); ++i)
    CHECK(out3.at(i) == doctest::Approx(oracle[i]).epsilon(1e-12));

  CHECK_THROWS_AS(attention(q, k, v, 3), ConfigError);
}

TEST_CASE("attention matches brute force on random shapes") {
  Rng rng(11);
  for (int trial = 0; trial < 40; ++trial) {
    const int heads_options[] = {1, 2, 4};
    int heads = heads_options[rng.uniform_index(3)];
    int d = heads * static_cast<int>(1 + rng.uniform_index(8 / heads));
    int tq = 1 + static_cast<int>(rng.uniform_index(6));
    int tk = 1 + static_cast<int>(rng.uniform_index(6));
    Tensor q = random_tensor(rng, {tq, d}, -2, 2, false);
    Tensor k = random_tensor(rng, {tk, d}, -2, 2, false);
    Tensor v = random_tensor(rng, {tk, d}, -2, 2, false);
    Tensor out = attention(q, k, v, heads);
    auto oracle = attention_oracle(q, k, v, heads);
    for (std::int64_t i = 0; i < out.numel(); ++i)
      CHECK(std::abs(out.at(i) - oracle[i]) <= 1e-10);
  }
}

TEST_CASE("check_gradients basics") {
  Rng rng(5);
  Tensor x = random_tensor(rng, {3, 2}, -2, 2, true);

  auto sum_sigmoid = [](const std::vector<Tensor>& ps) {
    return sum_all(sigmoid(ps[0]));
  };
  auto report = check_gradients(sum_sigmoid, {x}, 1e-4, 1e-6);
  CHECK(report.pass);

  auto constant = [](const std::vector<Tensor>&) { return Tensor::scalar(4.2); };
  auto report2 = check_gradients(constant, {x}, 1e-4, 1e-6);
  CHECK(report2.pass);
  CHECK(report2.max_rel_err == 0.0);

  auto bad = [](const std::vector<Tensor>&) {
    return Tensor::scalar(std::numeric_limits<double>::quiet_NaN());
  };
  CHECK_THROWS_AS(check_gradients(bad, {x}), ProbeError);
}

// Every differentiable operation, finite-difference checked on 10 seeds.
TEST_CASE("gradient check across all registered ops") {
  struct OpCase {
    const char* name;
    std::function<Tensor(const std::vector<Tensor>&)> f;
    std::function<std::vector<Tensor>(Rng&)> make_params;
  };

  auto weighted_sum = [](const Tensor& t, std::uint64_t seed) {
    // Fixed pseudo-random weights prevent symmetric-gradient blind spots.
    Rng wrng(seed);
    std::vector<double> w(t.numel());
    for (auto& v : w) v = wrng.uniform(-1.0, 1.0);
    return sum_all(mul(t, Tensor::from(t.shape(), std::move(w))));
  };

  std::vector<OpCase> cases;
  cases.push_back({"matmul",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(matmul(p[0], p[1]), 101);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 4}, -1, 1),
                                                random_tensor(r, {4, 2}, -1, 1)};
                   }});
  cases.push_back({"transpose",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(transpose(p[0]), 102);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 5}, -1, 1)};
                   }});
  cases.push_back({"add/sub/mul/scale",
                   [&](const std::vector<Tensor>& p) {
                     Tensor t = scale(sub(add(p[0], p[1]), mul(p[0], p[1])), 1.7);
                     return weighted_sum(t, 103);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {2, 3}, -1, 1),
                                                random_tensor(r, {2, 3}, -1, 1)};
                   }});
  cases.push_back({"add_bias",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(add_bias(p[0], p[1]), 104);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {4, 3}, -1, 1),
                                                random_tensor(r, {3}, -1, 1)};
                   }});
  cases.push_back({"sigmoid",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(sigmoid(p[0]), 105);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 3}, -3, 3)};
                   }});
  cases.push_back({"softmax_last",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(softmax_last(p[0]), 106);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 4}, -2, 2)};
                   }});
  cases.push_back({"log",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(log(p[0]), 107);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 3}, 0.2, 3.0)};
                   }});
  cases.push_back({"clamp",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(clamp(p[0], -5.0, 5.0), 108);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 3}, -2, 2)};
                   }});
  cases.push_back({"gelu",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(gelu(p[0]), 109);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 3}, -3, 3)};
                   }});
  cases.push_back({"layer_norm",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(layer_norm(p[0], p[1], p[2]), 110);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{
                         random_tensor(r, {4, 5}, -2, 2),
                         random_tensor(r, {5}, 0.5, 1.5),
                         random_tensor(r, {5}, -0.5, 0.5)};
                   }});
  cases.push_back({"conv1d stride 1",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(conv1d(p[0], p[1], 1), 111);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{
                         random_tensor(r, {6, 2}, -1, 1),
                         random_tensor(r, {3, 2, 3}, -1, 1)};
                   }});
  cases.push_back({"conv1d stride 2",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(conv1d(p[0], p[1], 2), 112);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{
                         random_tensor(r, {7, 2}, -1, 1),
                         random_tensor(r, {3, 2, 2}, -1, 1)};
                   }});
  cases.push_back({"upsample_linear up",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(upsample_linear(p[0], 9), 113);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {4, 3}, -1, 1)};
                   }});
  cases.push_back({"upsample_linear down",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(upsample_linear(p[0], 3), 114);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {7, 2}, -1, 1)};
                   }});
  cases.push_back({"concat_cols + slice_cols",
                   [&](const std::vector<Tensor>& p) {
                     Tensor cat = concat_cols({p[0], p[1]});
                     return weighted_sum(slice_cols(cat, 1, 3), 115);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 2}, -1, 1),
                                                random_tensor(r, {3, 3}, -1, 1)};
                   }});
  cases.push_back({"row_sums",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(row_sums(p[0]), 116);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {4, 3}, -1, 1)};
                   }});
  cases.push_back({"rowwise_logsumexp_masked",
                   [&](const std::vector<Tensor>& p) {
                     // Fixed mask with one empty row.
                     std::vector<std::uint8_t> mask = {1, 0, 1, 1,  //
                                                       0, 0, 0, 0,  //
                                                       1, 1, 0, 1};
                     return weighted_sum(rowwise_logsumexp_masked(p[0], mask),
                                         117);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 4}, -2, 2)};
                   }});
  cases.push_back({"l2_normalize_rows",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(l2_normalize_rows(p[0]), 118);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 4}, 0.5, 2.0)};
                   }});
  cases.push_back({"attention heads=1",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(attention(p[0], p[1], p[2], 1), 119);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 4}, -1, 1),
                                                random_tensor(r, {5, 4}, -1, 1),
                                                random_tensor(r, {5, 4}, -1, 1)};
                   }});
  cases.push_back({"attention heads=2",
                   [&](const std::vector<Tensor>& p) {
                     return weighted_sum(attention(p[0], p[1], p[2], 2), 120);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {4, 6}, -1, 1),
                                                random_tensor(r, {2, 6}, -1, 1),
                                                random_tensor(r, {2, 6}, -1, 1)};
                   }});
  cases.push_back({"sum_all",
                   [&](const std::vector<Tensor>& p) {
                     return scale(sum_all(p[0]), 0.7);
                   },
                   [&](Rng& r) {
                     return std::vector<Tensor>{random_tensor(r, {3, 3}, -1, 1)};
                   }});

  for (const auto& oc : cases) {
    CAPTURE(oc.name);
    for (int seed = 0; seed < 10; ++seed) {
      Rng rng(1000 + seed);
      auto params = oc.make_params(rng);
      auto report = check_gradients(oc.f, params, 1e-4, 1e-5);
      CAPTURE(seed);
      CAPTURE(report.max_rel_err);
      CHECK(report.pass);
    }
  }
}

TEST_CASE("backward determinism and accumulation") {
  Rng rng(42);
  Tensor a = random_tensor(rng, {3, 3}, -1, 1, true);
  Tensor b = random_tensor(rng, {3, 3}, -1, 1, true);
  // a used twice: gradient must accumulate both paths.
  auto make_loss = [&] { return sum_all(mul(add(a, b), a)); };
  GradMap g1 = backward(make_loss());
  GradMap g2 = backward(make_loss());
  Tensor ga1 = g1.grad(a), ga2 = g2.grad(a);
  for (std::int64_t i = 0; i < ga1.numel(); ++i)
    CHECK(ga1.at(i) == ga2.at(i));
  // d/da [sum (a+b)*a] = 2a + b
  for (std::int64_t i = 0; i < a.numel(); ++i)
    CHECK(ga1.at(i) == doctest::Approx(2 * a.at(i) + b.at(i)).epsilon(1e-12));
}

TEST_CASE("gradients flow only to grad-requiring leaves") {
  Tensor a = Tensor::from({2}, {1.0, 2.0}, true);
  Tensor c = Tensor::from({2}, {3.0, 4.0}, false);
  GradMap g = backward(sum_all(mul(a, c)));
  CHECK(g.has(a));
  CHECK_FALSE(g.has(c));
  Tensor ga = g.grad(a);
  CHECK(ga.at(0) == 3.0);
  CHECK(ga.at(1) == 4.0);
}

TEST_CASE("tensor blob round-trips byte-exactly") {
  Rng rng(9);
  TensorBlob blob;
  blob.add("F", random_tensor(rng, {4, 3}, -2, 2, false));
  blob.add("Fimg", random_tensor(rng, {4, 5}, -2, 2, false));
  blob.add("half", random_tensor(rng, {2, 2}, -1, 1, false),
           TensorBlob::Dtype::f32);

  std::ostringstream os1(std::ios::binary);
  blob.write(os1);
  const std::string bytes1 = os1.str();

  std::istringstream is(bytes1, std::ios::binary);
  TensorBlob loaded = TensorBlob::read(is);
  CHECK(loaded.size() == 3);
  CHECK(loaded.names() == blob.names());
  CHECK(loaded.dtype_of("half") == TensorBlob::Dtype::f32);

  std::ostringstream os2(std::ios::binary);
  loaded.write(os2);
  CHECK(os2.str() == bytes1);

  // f64 payloads survive exactly.
  Tensor orig = blob.get("F"), back = loaded.get("F");
  for (std::int64_t i = 0; i < orig.numel(); ++i)
    CHECK(orig.at(i) == back.at(i));

  CHECK_THROWS_AS(loaded.get("missing"), IoError);
  std::istringstream bad("nope", std::ios::binary);
  CHECK_THROWS_AS(TensorBlob::read(bad), IoError);
}

TEST_CASE("deterministic rng substreams") {
  Rng a(123), b(123);
  for (int i = 0; i < 100; ++i) {
    CHECK(a.uniform() == b.uniform());
    CHECK(a.normal() == b.normal());
    CHECK(a.poisson(3.0) == b.poisson(3.0));
  }
  CHECK(Rng::derive_seed(1, 2) == Rng::derive_seed(1, 2));
  CHECK(Rng::derive_seed(1, 2) != Rng::derive_seed(1, 3));
}
