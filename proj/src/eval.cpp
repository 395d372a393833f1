#include "susd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "susd/adam.hpp"
#include "susd/graph.hpp"
#include "susd/mlp.hpp"

namespace susd {

namespace {
int64_t rounded_key(double x, double y) {
  // two-decimal rounding, half away from zero; pack into one key
  const int64_t xi = std::llround(x * 100.0);
  const int64_t yi = std::llround(y * 100.0);
  return (xi << 32) ^ (yi & 0xffffffffLL);
}
}  // namespace

int count_unique_rounded(const std::vector<std::pair<double, double>>& positions) {
  std::unordered_set<int64_t> seen;
  seen.reserve(positions.size() * 2);
  for (const auto& [x, y] : positions) seen.insert(rounded_key(x, y));
  return static_cast<int>(seen.size());
}

double bin_fraction(const std::vector<std::pair<double, double>>& positions,
                    double lo, double hi, int bins) {
  if (bins <= 0) throw ContractError("bin_fraction: bins must be positive");
  const double width = hi - lo;
  std::unordered_set<int64_t> visited;
  for (const auto& [x, y] : positions) {
    auto cell = [&](double v) {
      int c = static_cast<int>(std::floor((v - lo) / width * bins));
      return std::min(bins - 1, std::max(0, c));  // clip outside positions to edges
    };
    visited.insert(static_cast<int64_t>(cell(x)) * bins + cell(y));
  }
  return static_cast<double>(visited.size()) / (static_cast<double>(bins) * bins);
}

namespace {
template <typename T>
void agent_aggregates(const std::vector<T>& values, const std::vector<bool>& mask,
                      T& min_out, double& mean_out) {
  bool any = false;
  T mn = T();
  double sum = 0.0;
  int count = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (!mask[i]) continue;
    if (!any || values[i] < mn) mn = values[i];
    any = true;
    sum += static_cast<double>(values[i]);
    count += 1;
  }
  min_out = any ? mn : T();
  mean_out = count > 0 ? sum / count : 0.0;
}
}  // namespace

CoverageReport coverage_from_traces(
    const std::vector<std::vector<std::pair<double, double>>>& traces,
    const FactorSpec& env_spec, int steps, int resample_every) {
  CoverageReport report;
  report.steps = steps;
  report.resample_every = resample_every;
  for (int i = 0; i < env_spec.count(); ++i) {
    report.factor_names.push_back(env_spec.factor(i).name);
    report.agent_factor.push_back(env_spec.is_agent_factor(i));
    report.unique_counts.push_back(count_unique_rounded(traces[static_cast<size_t>(i)]));
  }
  agent_aggregates(report.unique_counts, report.agent_factor, report.min_agent,
                   report.mean_agent);
  return report;
}

BinCoverageReport bins_from_traces(
    const std::vector<std::vector<std::pair<double, double>>>& traces,
    const FactorSpec& env_spec, double lo, double hi, int bins, int steps) {
  BinCoverageReport report;
  report.bins_per_axis = bins;
  report.steps = steps;
  for (int i = 0; i < env_spec.count(); ++i) {
    report.factor_names.push_back(env_spec.factor(i).name);
    report.agent_factor.push_back(env_spec.is_agent_factor(i));
    report.fractions.push_back(bin_fraction(traces[static_cast<size_t>(i)], lo, hi, bins));
  }
  agent_aggregates(report.fractions, report.agent_factor, report.min_agent,
                   report.mean_agent);
  return report;
}

DecodeReport decode_from_embedding(const std::vector<std::vector<double>>& states,
                                   const EmbedFn& embed, const FactorSpec& report_spec,
                                   const std::vector<int>& hidden_candidates,
                                   const DecodeConfig& cfg) {
  if (hidden_candidates.empty())
    throw ContractError("decode: empty hidden-size candidate list");
  if (states.size() < 10) throw ContractError("decode: not enough collected states");

  const int n = static_cast<int>(states.size());
  const int state_dim = static_cast<int>(states[0].size());
  const int embed_dim = static_cast<int>(embed(states[0]).size());

  // 80/10/10 split on a seeded shuffle
  Rng rng(cfg.seed ^ 0xdec0deULL);
  std::vector<int> order(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
  for (int i = n - 1; i > 0; --i)
    std::swap(order[static_cast<size_t>(i)],
              order[static_cast<size_t>(rng.uniform_int(i + 1))]);
  const int n_train = n * 8 / 10;
  const int n_val = n / 10;
  const int n_test = n - n_train - n_val;

  Mat<double> x_train(n_train, embed_dim), y_train(n_train, state_dim);
  Mat<double> x_val(n_val, embed_dim), y_val(n_val, state_dim);
  Mat<double> x_test(n_test, embed_dim), y_test(n_test, state_dim);
  auto fill = [&](Mat<double>& x, Mat<double>& y, int offset, int count) {
    for (int r = 0; r < count; ++r) {
      const auto& s = states[static_cast<size_t>(order[static_cast<size_t>(offset + r)])];
      const auto e = embed(s);
      for (int c = 0; c < embed_dim; ++c) x(r, c) = e[static_cast<size_t>(c)];
      for (int c = 0; c < state_dim; ++c) y(r, c) = s[static_cast<size_t>(c)];
    }
  };
  fill(x_train, y_train, 0, n_train);
  fill(x_val, y_val, n_train, n_val);
  fill(x_test, y_test, n_train + n_val, n_test);

  auto train_decoder = [&](int hidden, uint64_t seed) {
    Rng init(seed);
    Mlp<double> net({embed_dim, hidden, state_dim}, Activation::relu);
    net.init(init);
    AdamState<double> opt(cfg.learning_rate);
    auto params = net.param_map("dec");
    Rng batch_rng(seed + 1);
    const int steps_per_epoch = std::max(1, n_train / cfg.batch_size);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
      for (int step = 0; step < steps_per_epoch; ++step) {
        const int b = std::min(cfg.batch_size, n_train);
        Mat<double> xb(b, embed_dim), yb(b, state_dim);
        for (int r = 0; r < b; ++r) {
          const int src = batch_rng.uniform_int(n_train);
          for (int c = 0; c < embed_dim; ++c) xb(r, c) = x_train(src, c);
          for (int c = 0; c < state_dim; ++c) yb(r, c) = y_train(src, c);
        }
        Graph<double> g;
        auto out = mlp_forward(g, net, g.constant(xb), "dec");
        auto loss = g.mean_all(g.square(g.sub(out, g.constant(yb))));
        adam_step(opt, params, g.backward(loss));
      }
    }
    return net;
  };

  auto mse_of = [&](const Mlp<double>& net, const Mat<double>& x, const Mat<double>& y) {
    Mat<double> out = net.forward_eval(x);
    double sum = 0.0;
    for (size_t i = 0; i < out.v.size(); ++i) {
      const double d = out.v[i] - y.v[i];
      sum += d * d;
    }
    return sum / static_cast<double>(out.v.size());
  };

  // model selection on the validation split only
  int best_hidden = hidden_candidates[0];
  double best_val = 0.0;
  bool first = true;
  for (int hidden : hidden_candidates) {
    Mlp<double> net = train_decoder(hidden, cfg.seed + 17 * static_cast<uint64_t>(hidden));
    const double val = mse_of(net, x_val, y_val);
    if (first || val < best_val) {
      best_val = val;
      best_hidden = hidden;
      first = false;
    }
  }

  // final decoder at the chosen size; test MSE computed once
  Mlp<double> final_net =
      train_decoder(best_hidden, cfg.seed + 17 * static_cast<uint64_t>(best_hidden));
  Mat<double> pred = final_net.forward_eval(x_test);

  DecodeReport report;
  report.chosen_hidden = best_hidden;
  report.train_size = n_train;
  report.val_size = n_val;
  report.test_size = n_test;
  double total = 0.0;
  for (int i = 0; i < report_spec.count(); ++i) {
    const auto& f = report_spec.factor(i);
    double sum = 0.0;
    for (int r = 0; r < n_test; ++r)
      for (int c = f.begin; c < f.end; ++c) {
        const double d = pred(r, c) - y_test(r, c);
        sum += d * d;
      }
    const double mse = sum / (static_cast<double>(n_test) * f.dim());
    report.factor_names.push_back(f.name);
    report.per_factor_mse.push_back(mse);
    total += mse;
  }
  report.mean_mse = total / report_spec.count();
  return report;
}

}  // namespace susd
