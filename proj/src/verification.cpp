#include "supermask/verification.hpp"

#include <Eigen/SparseCore>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <random>
#include <sstream>

#include "supermask/config.hpp"
#include "supermask/ops.hpp"
#include "supermask/trainer.hpp"

namespace supermask::verification {

DenseArray<double> finite_diff_grad(const std::function<double(const DenseArray<double>&)>& f,
                                    const DenseArray<double>& x, double eps) {
  DenseArray<double> grad(x.shape());
  DenseArray<double> probe = x;
  for (Index i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + eps;
    const double up = f(probe);
    probe[i] = x[i] - eps;
    const double down = f(probe);
    probe[i] = x[i];
    grad[i] = (up - down) / (2 * eps);
  }
  return grad;
}

double relative_error(const DenseArray<double>& a, const DenseArray<double>& b) {
  const double scale = std::max(a.values().matrix().norm(), b.values().matrix().norm());
  if (scale == 0.0) return 0.0;
  return (a.values() - b.values()).matrix().norm() / scale;
}

double tape_vs_finite_difference(const std::function<Var<double>()>& loss, std::vector<Var<double>> params,
                                 double eps) {
  for (auto& p : params) p.zero_grad();
  backward(loss());
  double worst = 0.0;
  for (auto& p : params) {
    const DenseArray<double> analytic = p.has_grad() ? p.grad() : DenseArray<double>::zeros(p.shape());
    const DenseArray<double> base = p.value();
    const auto numeric = finite_diff_grad(
        [&](const DenseArray<double>& v) {
          p.mutable_value() = v;
          return loss().value()[0];
        },
        base, eps);
    p.mutable_value() = base;
    worst = std::max(worst, relative_error(analytic, numeric));
    p.zero_grad();
  }
  return worst;
}

double monte_carlo_keep_rate(double m_hat, Index n, Rng& rng) {
  const auto params = MaskParameters<Real>::constant_init({n}, static_cast<Real>(m_hat));
  const auto sample = stgs_sample(params, 1.0, rng);
  return 1.0 - pruning_rate(sample.hard);
}

namespace {

/// Kept weights of one layer, already multiplied by the layer's factor, as a
/// dense [rows x cols] matrix rebuilt from sparse triplets.
RowMatrix<Real> compacted_weights(const MaskedLayer<Real>& layer) {
  const DenseArray<Real>& w = layer.weights();
  const Index rows = w.dim(0), cols = w.size() / rows;
  const auto& m_hat = layer.mask.values();

  Index kept = 0;
  for (Index i = 0; i < m_hat.size(); ++i) kept += m_hat[i] > Real(0) ? 1 : 0;

  Real factor = 1;
  if (layer.masked) {
    if (layer.rescale.strategy == RescaleStrategy::smart) {
      factor = layer.rescale.factor.value()[0];
    } else if (layer.rescale.strategy == RescaleStrategy::dynamic) {
      const double total = static_cast<double>(w.size());
      const double pruned = static_cast<double>(w.size() - kept) / total;
      const double rate = layer.rescale.reading == DwrReading::prune ? pruned : 1.0 - pruned;
      factor = static_cast<Real>(1.0 / std::max(rate, 1.0 / total));
    }
  }

  std::vector<Eigen::Triplet<Real>> triplets;
  triplets.reserve(static_cast<std::size_t>(layer.masked ? kept : w.size()));
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) {
      const Index i = r * cols + c;
      if (!layer.masked) {
        triplets.emplace_back(r, c, w[i]);
      } else if (m_hat[i] > Real(0)) {
        triplets.emplace_back(r, c, layer.rescale.strategy == RescaleStrategy::none ? w[i] : factor * w[i]);
      }
    }
  Eigen::SparseMatrix<Real, Eigen::RowMajor> sparse(rows, cols);
  sparse.setFromTriplets(triplets.begin(), triplets.end());
  return RowMatrix<Real>(sparse.toDense());
}

}  // namespace

DenseArray<Real> brute_force_subnetwork_forward(const Network<Real>& net, const DenseArray<Real>& x) {
  DenseArray<Real> z = x;
  for (const auto& stage : net.stages) {
    if (const auto* pool = std::get_if<MaxPool>(&stage)) {
      const Index k = pool->window, h = z.dim(2), w = z.dim(3);
      DenseArray<Real> out({z.dim(0), z.dim(1), h / k, w / k});
      for (Index p = 0; p < z.dim(0) * z.dim(1); ++p)
        for (Index i = 0; i < h / k; ++i)
          for (Index j = 0; j < w / k; ++j) {
            Real best = z[(p * h + i * k) * w + j * k];
            for (Index di = 0; di < k; ++di)
              for (Index dj = 0; dj < k; ++dj) best = std::max(best, z[(p * h + i * k + di) * w + j * k + dj]);
            out[(p * (h / k) + i) * (w / k) + j] = best;
          }
      z = std::move(out);
      continue;
    }
    if (std::holds_alternative<Flatten>(stage)) {
      z = z.reshaped({z.dim(0), z.size() / z.dim(0)});
      continue;
    }
    const auto& layer = std::get<MaskedLayer<Real>>(stage);
    const RowMatrix<Real> dense = compacted_weights(layer);
    DenseArray<Real> w(layer.weights().shape());
    w.matrix(dense.rows(), dense.cols()) = dense;
    if (layer.kind == LayerKind::dense) {
      z = kernels::linear_forward(z, w);
    } else {
      z = kernels::conv2d_forward(z, w, kernels::conv_geometry(z.shape(), w.shape(), layer.stride, layer.padding));
    }
    if (layer.bias) {
      const Index channels = z.dim(1), inner = z.size() / (z.dim(0) * channels);
      for (Index i = 0; i < z.size(); ++i) z[i] += layer.bias->value()[(i / inner) % channels];
    }
    if (layer.activation == Activation::relu)
      for (Index i = 0; i < z.size(); ++i) z[i] = z[i] > Real(0) ? z[i] : Real(0);
  }
  return z;
}

namespace {

using Clock = std::chrono::steady_clock;

template <typename Fn>
CheckResult timed(std::string name, Fn fn) {
  const auto start = Clock::now();
  CheckResult r;
  r.name = std::move(name);
  try {
    fn(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return r;
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

template <typename Scalar>
DenseArray<Scalar> random_array(const Shape& shape, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> normal(0.0, sd);
  DenseArray<Scalar> a(shape);
  for (Index i = 0; i < a.size(); ++i) a[i] = static_cast<Scalar>(normal(rng));
  return a;
}

/// Values bounded away from zero, so a relu kink is never inside the stencil.
DenseArray<double> away_from_zero(const Shape& shape, Rng& rng) {
  auto a = random_array<double>(shape, rng);
  for (Index i = 0; i < a.size(); ++i) a[i] = a[i] >= 0 ? a[i] + 0.05 : a[i] - 0.05;
  return a;
}

/// Distinct values spaced by 0.05, so no pooling window has a near tie.
DenseArray<double> well_separated(const Shape& shape, Rng& rng) {
  DenseArray<double> a(shape);
  std::vector<double> v(static_cast<std::size_t>(a.size()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.05 * static_cast<double>(i) - 0.025 * static_cast<double>(v.size());
  std::shuffle(v.begin(), v.end(), rng);
  for (Index i = 0; i < a.size(); ++i) a[i] = v[static_cast<std::size_t>(i)];
  return a;
}

/// Contracts an op output with fixed random weights into a scalar.
Var<double> project(const Var<double>& out, const DenseArray<double>& weights) {
  return sum(elementwise_mul(out, Var<double>::constant(weights)));
}

LayerOptions smart_options(double init) {
  LayerOptions o;
  o.rescale = RescaleStrategy::smart;
  o.smart_init = init;
  return o;
}

}  // namespace

CheckResult check_gumbel_marginal(std::uint64_t seed) {
  return timed("gumbel-max marginal P(keep) = sigmoid(m_hat)", [&](CheckResult& r) {
    Rng rng(seed);
    double worst = 0;
    std::ostringstream os;
    for (double m : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
      const double rate = monte_carlo_keep_rate(m, 100000, rng);
      const double err = std::abs(rate - 1.0 / (1.0 + std::exp(-m)));
      worst = std::max(worst, err);
      os << "m=" << m << ":" << fmt(rate, 4) << ' ';
    }
    r.passed = worst <= 0.01;
    r.detail = os.str() + "max |err| " + fmt(worst, 3) + " (tol 0.01)";
  });
}

CheckResult check_shift_invariance(std::uint64_t seed) {
  return timed("shift invariance of hard and soft samples", [&](CheckResult& r) {
    Rng rng(seed);
    const Shape shape{20000};
    DenseArray<Real> m_hat(shape);
    std::uniform_real_distribution<double> uni(-6.0, 6.0);
    for (Index i = 0; i < m_hat.size(); ++i) m_hat[i] = static_cast<Real>(uni(rng));
    const auto g1 = sample_gumbel<Real>(shape, rng);
    const auto g2 = sample_gumbel<Real>(shape, rng);
    const auto base = sample_from_noise(m_hat, g1, g2, 1.0);
    Index hard_diff = 0, soft_diff = 0;
    for (double c : {-100.0, 0.37, 1e3}) {
      const auto shifted = sample_from_noise(m_hat, g1, g2, 1.0, Parametrization::aslp, c);
      hard_diff += (shifted.hard.values() != base.hard.values()).count();
      soft_diff += (shifted.soft.values() != base.soft.values()).count();
    }
    r.passed = hard_diff == 0 && soft_diff == 0;
    r.detail = "c in {-100, 0.37, 1e3}: " + std::to_string(hard_diff) + " hard and " + std::to_string(soft_diff) +
               " soft entries differ (exact comparison)";
  });
}

CheckResult check_parametrization_equivalence(std::uint64_t seed) {
  return timed("ASLP vs sigmoid parametrization under shared draws", [&](CheckResult& r) {
    Rng rng(seed);
    Network<Real> net = build_mlp<Real>({8, 32, 32, 4}, seed);
    for (auto* l : net.masked_layers()) l->mask.mutable_values() = random_array<Real>(l->mask.shape(), rng, 3.0);
    std::vector<Rng> streams;
    for (std::size_t i = 0; i < net.masked_layers().size(); ++i) streams.emplace_back(rng());
    const auto aslp = sample_topology(net, 1.0, streams);
    SampledTopology<Real> sig;
    const auto layers = net.masked_layers();
    for (std::size_t i = 0; i < layers.size(); ++i)
      sig.layers.push_back(sample_from_noise(layers[i]->mask.values(), aslp.layers[i].noise_keep,
                                             aslp.layers[i].noise_drop, 1.0, Parametrization::sigmoid));

    Index hard_diff = 0;
    double soft_diff = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      hard_diff += (aslp.layers[i].hard.values() != sig.layers[i].hard.values()).count();
      soft_diff = std::max<double>(soft_diff, (aslp.layers[i].soft.values() - sig.layers[i].soft.values()).abs().maxCoeff());
    }

    const auto x = random_array<Real>({16, 8}, rng);
    std::vector<int> y(16);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = static_cast<int>(i % 4);
    auto grads = [&](const SampledTopology<Real>& t) {
      for (auto* l : layers) l->mask.logits.zero_grad();
      backward(softmax_cross_entropy(forward(net, x, ForwardMasks<Real>::sampled(t)), y));
      std::vector<DenseArray<Real>> out;
      for (auto* l : layers) out.push_back(l->mask.logits.grad());
      return out;
    };
    const auto ga = grads(aslp);
    const auto gs = grads(sig);
    double grad_diff = 0, grad_scale = 1;
    for (std::size_t i = 0; i < ga.size(); ++i) {
      grad_diff = std::max<double>(grad_diff, (ga[i].values() - gs[i].values()).abs().maxCoeff());
      grad_scale = std::max<double>(grad_scale, ga[i].values().abs().maxCoeff());
    }
    r.passed = hard_diff == 0 && soft_diff <= 1e-5 && grad_diff <= 1e-5 * grad_scale;
    r.detail = "hard diffs " + std::to_string(hard_diff) + ", max soft diff " + fmt(soft_diff, 3) +
               ", max dL/dm_hat diff " + fmt(grad_diff, 3) + " (tol 1e-5)";
  });
}

CheckResult check_gradients(int seeds) {
  return timed("tape gradients vs central differences (eps 1e-3)", [&](CheckResult& r) {
    double worst = 0;
    std::string worst_op;
    auto note = [&](const std::string& op, double err) {
      if (err > worst) {
        worst = err;
        worst_op = op;
      }
    };
    for (int seed = 0; seed < seeds; ++seed) {
      Rng rng(static_cast<std::uint64_t>(seed) + 100);
      using V = Var<double>;
      {
        V a = V::parameter(random_array<double>({3, 4}, rng));
        V b = V::parameter(random_array<double>({4, 2}, rng));
        const auto R = random_array<double>({3, 2}, rng);
        note("matmul", tape_vs_finite_difference([&] { return project(matmul(a, b), R); }, {a, b}));
      }
      {
        V x = V::parameter(random_array<double>({5, 4}, rng));
        V w = V::parameter(random_array<double>({3, 4}, rng));
        const auto R = random_array<double>({5, 3}, rng);
        note("linear", tape_vs_finite_difference([&] { return project(linear(x, w), R); }, {x, w}));
      }
      {
        V a = V::parameter(random_array<double>({2, 3, 2}, rng));
        V b = V::parameter(random_array<double>({2, 3, 2}, rng));
        const auto R = random_array<double>({2, 3, 2}, rng);
        note("elementwise_mul", tape_vs_finite_difference([&] { return project(elementwise_mul(a, b), R); }, {a, b}));
        note("add", tape_vs_finite_difference([&] { return project(add(a, b), R); }, {a, b}));
      }
      {
        V s = V::parameter(DenseArray<double>({1}, {1.7}));
        V x = V::parameter(random_array<double>({4, 3}, rng));
        const auto R = random_array<double>({4, 3}, rng);
        note("scale", tape_vs_finite_difference([&] { return project(scale(s, x), R); }, {s, x}));
        note("scale_constant", tape_vs_finite_difference([&] { return project(scale_constant(x, 0.3), R); }, {x}));
      }
      {
        V x = V::parameter(random_array<double>({2, 2, 5, 5}, rng));
        V w = V::parameter(random_array<double>({3, 2, 3, 3}, rng));
        const auto R1 = random_array<double>({2, 3, 5, 5}, rng);
        const auto R2 = random_array<double>({2, 3, 2, 2}, rng);
        note("conv2d pad1", tape_vs_finite_difference([&] { return project(conv2d(x, w, 1, 1), R1); }, {x, w}));
        note("conv2d stride2", tape_vs_finite_difference([&] { return project(conv2d(x, w, 2, 0), R2); }, {x, w}));
      }
      {
        V x = V::parameter(away_from_zero({3, 7}, rng));
        const auto R = random_array<double>({3, 7}, rng);
        note("relu", tape_vs_finite_difference([&] { return project(relu(x), R); }, {x}));
      }
      {
        V x = V::parameter(well_separated({2, 2, 4, 4}, rng));
        const auto R = random_array<double>({2, 2, 2, 2}, rng);
        note("maxpool2d", tape_vs_finite_difference([&] { return project(maxpool2d(x, 2), R); }, {x}));
      }
      {
        V x = V::parameter(random_array<double>({2, 3, 2, 2}, rng));
        V b = V::parameter(random_array<double>({3}, rng));
        const auto R = random_array<double>({2, 3, 2, 2}, rng);
        note("add_channel_bias", tape_vs_finite_difference([&] { return project(add_channel_bias(x, b), R); }, {x, b}));
      }
      {
        V z = V::parameter(random_array<double>({6, 4}, rng, 2.0));
        const std::vector<int> y{0, 3, 1, 2, 2, 0};
        note("softmax_cross_entropy", tape_vs_finite_difference([&] { return softmax_cross_entropy(z, y); }, {z}));
      }
      for (Parametrization p : {Parametrization::aslp, Parametrization::sigmoid}) {
        V m = V::parameter(random_array<double>({4, 5}, rng, 2.0));
        const auto sample = sample_from_noise(m.value(), sample_gumbel<double>({4, 5}, rng),
                                              sample_gumbel<double>({4, 5}, rng), 0.7, p);
        const auto R = random_array<double>({4, 5}, rng);
        note(p == Parametrization::aslp ? "relaxed mask (aslp)" : "relaxed mask (sigmoid)",
             tape_vs_finite_difference([&] { return project(apply_sampled_mask(m, sample, MaskUse::relaxed), R); }, {m}));
      }
      {
        // Full relaxed masked forward of a 2-layer MLP with learned scales.
        Network<double> net = build_mlp<double>({4, 6, 3}, static_cast<std::uint64_t>(seed), smart_options(2.0));
        std::vector<V> params;
        std::uniform_real_distribution<double> scale_init(1.5, 2.5);
        for (auto* l : net.masked_layers()) {
          l->mask.mutable_values() = random_array<double>(l->mask.shape(), rng, 1.5);
          l->rescale.factor.mutable_value()[0] = scale_init(rng);
          params.push_back(l->mask.logits);
          params.push_back(l->rescale.factor);
        }
        std::vector<Rng> streams;
        for (std::size_t i = 0; i < net.masked_layers().size(); ++i) streams.emplace_back(rng());
        const auto topo = sample_topology(net, 1.0, streams);
        const auto x = random_array<double>({5, 4}, rng);
        const std::vector<int> y{0, 1, 2, 1, 0};
        note("relaxed masked MLP with SR", tape_vs_finite_difference(
                                               [&] {
                                                 return softmax_cross_entropy(
                                                     forward(net, x, ForwardMasks<double>::sampled(topo, MaskUse::relaxed)), y);
                                               },
                                               params));
      }
    }
    r.passed = worst <= 1e-3;
    r.detail = std::to_string(seeds) + " seeds, worst relative error " + fmt(worst, 3) +
               (worst_op.empty() ? "" : " (" + worst_op + ")") + " (tol 1e-3)";
  });
}

CheckResult check_forward_degeneracy(std::uint64_t seed) {
  return timed("masked forward degeneracies (bit-exact)", [&](CheckResult& r) {
    Rng rng(seed);
    bool ok = true;
    std::ostringstream os;

    // All-ones masks with s = 1 reduce to the plain frozen forward.
    for (int variant = 0; variant < 2; ++variant) {
      Network<Real> net = variant == 0 ? build_mlp<Real>({10, 32, 32, 5}, seed, smart_options(1.0))
                                       : build_conv_family<Real>(ConvVariant::conv2, 5, seed, smart_options(1.0),
                                                                 {3, 8, 8}, 16);
      const Shape in = variant == 0 ? Shape{7, 10} : Shape{3, 3, 8, 8};
      const auto x = random_array<Real>(in, rng);
      SampledTopology<Real> ones;
      for (const auto* l : net.masked_layers()) {
        LayerSample<Real> s;
        s.hard = DenseArray<Real>::ones(l->mask.shape());
        s.soft = DenseArray<Real>::filled(l->mask.shape(), Real(0.5));
        s.noise_keep = DenseArray<Real>::zeros(l->mask.shape());
        s.noise_drop = DenseArray<Real>::zeros(l->mask.shape());
        ones.layers.push_back(std::move(s));
      }
      const auto plain = forward(net, x, ForwardMasks<Real>::unmasked()).value();
      const bool same = forward(net, x, ForwardMasks<Real>::sampled(ones)).value() == plain;
      for (auto* l : net.masked_layers()) l->mask.mutable_values().values().setConstant(5);
      const bool same_threshold = forward(net, x, ForwardMasks<Real>::threshold()).value() == plain;
      ok = ok && same && same_threshold;
      os << (variant == 0 ? "mlp" : "conv2") << " all-ones " << (same ? "equal" : "DIFFER") << ", m_hat=5 threshold "
         << (same_threshold ? "equal" : "DIFFER") << "; ";
    }

    // Thresholded forward equals the compacted subnetwork.
    for (RescaleStrategy strategy : {RescaleStrategy::none, RescaleStrategy::smart, RescaleStrategy::dynamic}) {
      LayerOptions opt;
      opt.rescale = strategy;
      opt.biases = strategy == RescaleStrategy::dynamic;
      Network<Real> net = build_mlp<Real>({12, 40, 24, 6}, seed + 1, opt);
      std::uniform_real_distribution<double> s(0.5, 3.0);
      for (auto* l : net.masked_layers()) {
        l->mask.mutable_values() = random_array<Real>(l->mask.shape(), rng);
        if (strategy == RescaleStrategy::smart) l->rescale.factor.mutable_value()[0] = static_cast<Real>(s(rng));
      }
      const auto x = random_array<Real>({9, 12}, rng);
      const bool same = forward(net, x, ForwardMasks<Real>::threshold()).value() == brute_force_subnetwork_forward(net, x);
      ok = ok && same;
      os << "compacted (" << to_string(strategy) << ") " << (same ? "equal" : "DIFFER") << "; ";
    }
    r.passed = ok;
    r.detail = os.str();
  });
}

CheckResult check_dwr_unbiased(std::uint64_t seed) {
  return timed("dynamic rescale is unbiased", [&](CheckResult& r) {
    Rng rng(seed);
    const Index n = 64;
    const auto w = init_weights<Real>({n, n}, WeightScheme::kaiming_normal, rng);
    const auto x = random_array<Real>({n}, rng);
    const Eigen::VectorXd xd = x.values().cast<double>().matrix();
    const Eigen::MatrixXd wd = w.matrix().cast<double>();
    const Eigen::VectorXd target = wd * xd;
    double worst = 0;
    std::ostringstream os;
    for (double p : {0.3, 0.5, 0.8}) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(n);
      DenseArray<Real> mask({n, n});
      const int draws = 10000;
      for (int d = 0; d < draws; ++d) {
        for (Index i = 0; i < mask.size(); ++i) mask[i] = uniform01(rng) < p ? Real(1) : Real(0);
        const double f = dwr_factor(mask);
        mean += f * (wd.array() * mask.matrix().cast<double>().array()).matrix() * xd;
      }
      mean /= draws;
      const double err = (mean - target).norm() / target.norm();
      worst = std::max(worst, err);
      os << "p=" << p << ": " << fmt(err, 3) << ' ';
    }
    r.passed = worst < 0.02;
    r.detail = os.str() + "(relative L2 error, tol 0.02, 1e4 draws, 64x64)";
  });
}

CheckResult check_eval_saturation(std::uint64_t seed) {
  return timed("averaging equals thresholding at saturation", [&](CheckResult& r) {
    Rng rng(seed);
    const DatasetSplits data = make_synthetic_task(400, seed);
    Network<Real> net = build_mlp<Real>({2, 16, 16, 2}, seed);
    std::normal_distribution<double> spread(0.0, 5.0);
    for (auto* l : net.masked_layers())
      for (Index i = 0; i < l->mask.values().size(); ++i) {
        const double mag = 20.0 + std::abs(spread(rng));
        l->mask.mutable_values()[i] = static_cast<Real>((rng() & 1U) ? mag : -mag);
      }
    const double threshold = evaluate_threshold(net, data.val);
    const auto averaging = evaluate_averaging(net, data.val, 10, rng);
    bool all_equal = true;
    for (double a : averaging.per_sample) all_equal = all_equal && a == threshold;
    r.passed = all_equal && averaging.mean == threshold;
    r.detail = "threshold " + fmt(threshold) + ", averaging " + fmt(averaging.mean) + " (exact)";
  });
}

std::vector<CheckResult> run_oracle_suite() {
  return {check_gumbel_marginal(),   check_shift_invariance(), check_parametrization_equivalence(),
          check_gradients(),         check_forward_degeneracy(), check_dwr_unbiased(),
          check_eval_saturation()};
}

void print_table(std::ostream& out, const std::vector<CheckResult>& results) {
  for (const auto& r : results) {
    char line[160];
    std::snprintf(line, sizeof(line), "%-4s %-52s %7.2fs  ", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds);
    out << line << r.detail << '\n';
  }
}

}  // namespace supermask::verification
