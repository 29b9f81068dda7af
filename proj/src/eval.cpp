// Copyright 2026 The MVMT Authors.
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

#include "mvmt/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "mvmt/error.hpp"

namespace mvmt {

using nlohmann::json;

// ---- metrics ---------------------------------------------------------------

HorizonMetrics metrics(const Tensor& pred, const Tensor& truth, std::size_t horizon,
                       double zero_threshold) {
  if (pred.shape() != truth.shape()) {
    fail("metrics shape mismatch: " + shape_str(pred.shape()) + " vs " + shape_str(truth.shape()));
  }
  if (pred.rank() < 1 || pred.empty()) fail("metrics need a non-empty [..., T_out] panel");
  const std::size_t t_out = pred.shape().back();
  if (horizon < 1 || horizon > t_out) {
    fail("horizon " + std::to_string(horizon) + " outside 1.." + std::to_string(t_out));
  }
  double sq = 0.0, abs_sum = 0.0, pct = 0.0;
  std::size_t count = 0, pct_count = 0;
  for (std::size_t i = horizon - 1; i < pred.size(); i += t_out) {
    const double err = pred[i] - truth[i];
    sq += err * err;
    abs_sum += std::abs(err);
    ++count;
    if (std::abs(truth[i]) >= zero_threshold) {
      pct += std::abs(err) / std::abs(truth[i]);
      ++pct_count;
    }
  }
  HorizonMetrics m;
  m.rmse = std::sqrt(sq / static_cast<double>(count));
  m.mae = abs_sum / static_cast<double>(count);
  m.mape_count = pct_count;
  if (pct_count > 0) m.mape = 100.0 * pct / static_cast<double>(pct_count);
  return m;
}

MetricsReport metrics_report(const Tensor& pred, const Tensor& truth, double zero_threshold) {
  if (pred.rank() < 2) fail("metrics_report expects [..., N, T_out]");
  MetricsReport r;
  const std::size_t t_out = pred.shape().back();
  for (std::size_t h = 1; h <= t_out; ++h) r.horizons.push_back(metrics(pred, truth, h, zero_threshold));
  const std::size_t n = pred.dim(pred.rank() - 2);
  std::vector<double> sq(n, 0.0);
  std::vector<std::size_t> cnt(n, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const std::size_t v = (i / t_out) % n;
    const double err = pred[i] - truth[i];
    sq[v] += err * err;
    ++cnt[v];
  }
  for (std::size_t v = 0; v < n; ++v) r.variable_rmse.push_back(std::sqrt(sq[v] / static_cast<double>(cnt[v])));
  return r;
}

json MetricsReport::to_json() const {
  json hs = json::array();
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    const HorizonMetrics& m = horizons[h];
    hs.push_back({{"horizon", h + 1},
                  {"rmse", m.rmse},
                  {"mae", m.mae},
                  {"mape", m.mape ? json(*m.mape) : json(nullptr)},
                  {"mape_count", m.mape_count}});
  }
  return {{"horizon_count", horizons.size()}, {"horizons", hs}, {"variable_rmse", variable_rmse}};
}

// ---- PCA -------------------------------------------------------------------

PcaResult pca(const Tensor& points, std::size_t n_components) {
  if (points.rank() != 2) fail("pca expects [n_samples, dim], got " + shape_str(points.shape()));
  const std::size_t n = points.dim(0), dim = points.dim(1);
  if (n < 2) fail("pca needs at least 2 samples");
  if (n_components == 0 || n_components > dim) {
    fail("pca: n_components must be in 1.." + std::to_string(dim));
  }
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> x(points.raw(), static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const RowMat centered = x.rowwise() - mean;
  const Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  const double total = cov.trace();

  PcaResult r;
  r.mean = Tensor({dim});
  for (std::size_t j = 0; j < dim; ++j) r.mean[j] = mean(static_cast<Eigen::Index>(j));
  r.components = Tensor({n_components, dim});
  if (!(total > 0.0)) {
    r.degenerate = true;
    for (std::size_t c = 0; c < n_components; ++c) r.components[c * dim + c] = 1.0;
    r.explained_ratio.assign(n_components, 0.0);
    r.explained_variance.assign(n_components, 0.0);
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success) fail(ErrorKind::kNumeric, "pca eigen-decomposition failed");
    // Eigenvalues come back ascending.
    for (std::size_t c = 0; c < n_components; ++c) {
      const Eigen::Index col = static_cast<Eigen::Index>(dim - 1 - c);
      Eigen::VectorXd v = solver.eigenvectors().col(col);
      Eigen::Index arg = 0;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0.0) v = -v;
      for (std::size_t j = 0; j < dim; ++j) r.components[c * dim + j] = v(static_cast<Eigen::Index>(j));
      const double lambda = std::max(0.0, solver.eigenvalues()(col));
      r.explained_variance.push_back(lambda);
      r.explained_ratio.push_back(lambda / total);
    }
  }
  Eigen::Map<const RowMat> comps(r.components.raw(), static_cast<Eigen::Index>(n_components),
                                 static_cast<Eigen::Index>(dim));
  r.projections = Tensor({n, n_components});
  Eigen::Map<RowMat> proj(r.projections.raw(), static_cast<Eigen::Index>(n),
                          static_cast<Eigen::Index>(n_components));
  proj.noalias() = centered * comps.transpose();
  return r;
}

json PcaResult::to_json() const {
  return {{"n_components", explained_ratio.size()},
          {"explained_ratio", explained_ratio},
          {"explained_variance", explained_variance},
          {"degenerate", degenerate},
          {"components", std::vector<double>(components.data().begin(), components.data().end())},
          {"mean", std::vector<double>(mean.data().begin(), mean.data().end())}};
}

// ---- representations -------------------------------------------------------

namespace {

struct StageRef {
  enum class Kind { kInput, kBlock, kPooled } kind = Kind::kInput;
  std::size_t layer = 0;  // 1-based
  std::string branch;
};

StageRef parse_stage(const std::string& stage) {
  StageRef ref;
  if (stage == "input") return ref;
  if (stage == "pooled") {
    ref.kind = StageRef::Kind::kPooled;
    return ref;
  }
  const std::string prefix = "block_";
  const auto dot = stage.find('.');
  if (stage.rfind(prefix, 0) == 0 && dot != std::string::npos && dot > prefix.size()) {
    const std::string digits = stage.substr(prefix.size(), dot - prefix.size());
    const std::string branch = stage.substr(dot + 1);
    if (std::all_of(digits.begin(), digits.end(), [](unsigned char c) { return std::isdigit(c); }) &&
        (branch == "original" || branch == "spatial" || branch == "temporal")) {
      ref.kind = StageRef::Kind::kBlock;
      ref.layer = static_cast<std::size_t>(std::stoul(digits));
      ref.branch = branch;
      return ref;
    }
  }
  fail("unknown stage '" + stage + "' (expected input, block_<l>.original|spatial|temporal, pooled)");
}

}  // namespace

void validate_stage(const std::string& stage, const ModelConfig& config) {
  const StageRef ref = parse_stage(stage);
  if (ref.kind != StageRef::Kind::kBlock) return;
  if (ref.layer < 1 || ref.layer > config.layers) {
    fail("stage '" + stage + "' refers to block " + std::to_string(ref.layer) + " but the model has " +
         std::to_string(config.layers));
  }
  const BranchSet b = branches_for(config.variant);
  const bool present = (ref.branch == "original" && b.original) ||
                       (ref.branch == "spatial" && b.spatial) ||
                       (ref.branch == "temporal" && b.temporal);
  if (!present) {
    fail("variant (" + std::string(1, variant_id(config.variant)) + ") has no " + ref.branch + " branch");
  }
}

Tensor extract_representations(const Model& model, const Tensor& window, const std::string& stage) {
  validate_stage(stage, model.config());
  const bool single = window.rank() == 2;
  const Tensor batched = single ? window.reshaped({1, window.dim(0), window.dim(1)}) : window;
  Tape tape;
  ActivationMap acts;
  model.forward_frozen(tape, batched, &acts);
  Tensor out = acts.at(stage);
  if (single) {
    Shape s(out.shape().begin() + 1, out.shape().end());
    out = std::move(out).reshaped(std::move(s));
  }
  return out;
}

Tensor stage_samples(const Model& model, const Tensor& windows, const std::string& stage) {
  if (windows.rank() != 3) fail("stage_samples expects [W, N, T_in]");
  validate_stage(stage, model.config());
  const std::size_t w_count = windows.dim(0), n = windows.dim(1);
  Tensor acts;
  {
    Tape tape;
    ActivationMap map;
    model.forward_frozen(tape, windows, &map);
    acts = std::move(map.at(stage));
  }
  // acts: [W, N, ...] -> [N, W, dim]
  const std::size_t dim = acts.size() / (w_count * n);
  Tensor out({n, w_count, dim});
  for (std::size_t w = 0; w < w_count; ++w) {
    for (std::size_t v = 0; v < n; ++v) {
      std::copy_n(acts.raw() + (w * n + v) * dim, dim, out.raw() + (v * w_count + w) * dim);
    }
  }
  return out;
}

const SeparationEntry& SeparationReport::find(const std::string& stage, View view) const {
  for (const SeparationEntry& e : entries) {
    if (e.stage == stage && e.view == view) return e;
  }
  fail("separation report has no entry for " + stage + "/" + to_string(view));
}

json SeparationReport::to_json() const {
  json out = json::array();
  for (const SeparationEntry& e : entries) {
    out.push_back({{"stage", e.stage},
                   {"view", to_string(e.view)},
                   {"intra", e.profile.intra},
                   {"inter", e.profile.inter},
                   {"margin", e.profile.margin()}});
  }
  return out;
}

SeparationReport separation_report(const std::map<std::string, Tensor>& samples,
                                   const std::vector<View>& views, const ModelConfig& config) {
  SeparationReport r;
  for (const auto& [stage, z] : samples) {
    validate_stage(stage, config);
    if (z.rank() != 3) fail("stage '" + stage + "' samples must be [N, W, dim]");
    for (View view : views) {
      const TaskPartition p{view, z.dim(0), z.dim(1)};
      r.entries.push_back({stage, view, correlation_profile(z, p)});
    }
  }
  return r;
}

SeparationReport separation_report(const Model& model, const Tensor& windows,
                                   const std::vector<std::string>& stages,
                                   const std::vector<View>& views) {
  std::map<std::string, Tensor> samples;
  for (const std::string& s : stages) samples[s] = stage_samples(model, windows, s);
  return separation_report(samples, views, model.config());
}

}  // namespace mvmt
