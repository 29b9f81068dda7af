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

#include "mvmt/task.hpp"

#include <algorithm>
#include <cmath>

#include "mvmt/error.hpp"

namespace mvmt {
namespace {

struct GridAxes {
  Shape lead;  // batch axes
  std::size_t n = 0;
  std::size_t t = 0;
  std::size_t d = 0;
};

GridAxes grid_axes(const Shape& shape) {
  if (shape.size() < 3) {
    fail("representation must be [..., N, T, d], got " + shape_str(shape));
  }
  GridAxes g;
  g.lead.assign(shape.begin(), shape.end() - 3);
  g.n = shape[shape.size() - 3];
  g.t = shape[shape.size() - 2];
  g.d = shape.back();
  return g;
}

Shape with_lead(const Shape& lead, std::initializer_list<std::size_t> tail) {
  Shape s = lead;
  s.insert(s.end(), tail);
  return s;
}

void check_partition(const GridAxes& g, const TaskPartition& p) {
  if (g.n != p.num_variables || g.t != p.window_length) {
    fail("partition is " + std::to_string(p.num_variables) + "x" +
         std::to_string(p.window_length) + " but representation is " +
         std::to_string(g.n) + "x" + std::to_string(g.t));
  }
}

}  // namespace

std::string to_string(View view) {
  switch (view) {
    case View::kOriginal: return "original";
    case View::kSpatial: return "spatial";
    case View::kTemporal: return "temporal";
  }
  return "unknown";
}

View parse_view(const std::string& name) {
  if (name == "original") return View::kOriginal;
  if (name == "spatial") return View::kSpatial;
  if (name == "temporal") return View::kTemporal;
  fail("unknown view '" + name + "' (expected original, spatial or temporal)");
}

std::size_t TaskPartition::num_tasks() const {
  switch (view) {
    case View::kTemporal: return window_length;
    case View::kSpatial: return num_variables;
    case View::kOriginal: return 1;
  }
  return 0;
}

std::size_t TaskPartition::task_size() const {
  switch (view) {
    case View::kTemporal: return num_variables;
    case View::kSpatial: return window_length;
    case View::kOriginal: return num_variables * window_length;
  }
  return 0;
}

std::size_t TaskPartition::task_of(std::size_t n, std::size_t t) const {
  if (n >= num_variables || t >= window_length) {
    fail("sample (" + std::to_string(n) + "," + std::to_string(t) + ") outside " +
         std::to_string(num_variables) + "x" + std::to_string(window_length) + " grid");
  }
  switch (view) {
    case View::kTemporal: return t;
    case View::kSpatial: return n;
    case View::kOriginal: return 0;
  }
  return 0;
}

std::vector<std::pair<std::size_t, std::size_t>> TaskPartition::members(std::size_t task) const {
  if (task >= num_tasks()) fail("task " + std::to_string(task) + " out of range");
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t n = 0; n < num_variables; ++n) {
    for (std::size_t t = 0; t < window_length; ++t) {
      if (task_of(n, t) == task) out.emplace_back(n, t);
    }
  }
  return out;
}

std::size_t partition_task(const TaskPartition& partition, std::size_t n, std::size_t t) {
  return partition.task_of(n, t);
}

TaskStats task_stats(const Var& z, const TaskPartition& partition, double epsilon) {
  const GridAxes g = grid_axes(z.shape());
  check_partition(g, partition);
  if (partition.task_size() == 0) fail("task partition has empty tasks");
  if (epsilon < 0.0) fail("normalization epsilon must be non-negative");
  const std::size_t rank = z.shape().size();
  Var mu, var;
  switch (partition.view) {
    case View::kTemporal:
      mu = reduce(ReduceKind::kMean, z, rank - 3);
      var = reduce(ReduceKind::kVar, z, rank - 3);
      break;
    case View::kSpatial:
      mu = reduce(ReduceKind::kMean, z, rank - 2);
      var = reduce(ReduceKind::kVar, z, rank - 2);
      break;
    case View::kOriginal: {
      Var flat = reshape(z, with_lead(g.lead, {g.n * g.t, g.d}));
      mu = reshape(reduce(ReduceKind::kMean, flat, rank - 3), with_lead(g.lead, {1, g.d}));
      var = reshape(reduce(ReduceKind::kVar, flat, rank - 3), with_lead(g.lead, {1, g.d}));
      break;
    }
  }
  Var sigma = sqrt(add_scalar(var, epsilon));
  return TaskStats{mu, sigma, epsilon};
}

Var task_normalize(const Var& z, const TaskPartition& partition, const TaskStats& stats) {
  const GridAxes g = grid_axes(z.shape());
  check_partition(g, partition);
  const Shape expected = with_lead(g.lead, {partition.num_tasks(), g.d});
  if (stats.mu.shape() != expected || stats.sigma.shape() != expected) {
    fail("task stats shape " + shape_str(stats.mu.shape()) + " does not match partition (" +
         to_string(partition.view) + ") expecting " + shape_str(expected));
  }
  Shape bshape;
  switch (partition.view) {
    case View::kTemporal: bshape = with_lead(g.lead, {1, g.t, g.d}); break;
    case View::kSpatial: bshape = with_lead(g.lead, {g.n, 1, g.d}); break;
    case View::kOriginal: bshape = with_lead(g.lead, {1, 1, g.d}); break;
  }
  Var mu = reshape(stats.mu, bshape);
  Var sigma = reshape(stats.sigma, bshape);
  return div(sub(z, mu), sigma);
}

Var task_normalize(const Var& z, const TaskPartition& partition, double epsilon) {
  const GridAxes g = grid_axes(z.shape());
  check_partition(g, partition);
  if (epsilon < 0.0) fail("normalization epsilon must be non-negative");
  // Each task is a run of `len` rows of `inner` values, repeated `outer` times.
  const std::size_t lead = shape_size(g.lead);
  std::size_t outer = 0, len = 0, inner = 0;
  switch (partition.view) {
    case View::kTemporal: outer = lead, len = g.n, inner = g.t * g.d; break;
    case View::kSpatial: outer = lead * g.n, len = g.t, inner = g.d; break;
    case View::kOriginal: outer = lead, len = g.n * g.t, inner = g.d; break;
  }
  if (len == 0) fail("task partition has empty tasks");
  const Tensor& x = z.value();
  Tensor y(x.shape());
  std::vector<double> inv_sigma(outer * inner);
  std::vector<double> acc(inner);
  const double inv_len = 1.0 / static_cast<double>(len);
  for (std::size_t o = 0; o < outer; ++o) {
    const double* xs = x.raw() + o * len * inner;
    double* ys = y.raw() + o * len * inner;
    double* is = inv_sigma.data() + o * inner;
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t i = 0; i < inner; ++i) acc[i] += xs[l * inner + i];
    }
    for (std::size_t i = 0; i < inner; ++i) acc[i] *= inv_len;
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t i = 0; i < inner; ++i) {
        const double c = xs[l * inner + i] - acc[i];
        ys[l * inner + i] = c;
        is[i] += c * c;
      }
    }
    for (std::size_t i = 0; i < inner; ++i) {
      const double v = is[i] * inv_len + epsilon;
      is[i] = v > 0.0 ? 1.0 / std::sqrt(v) : 0.0;  // zero-variance task maps to 0
    }
    for (std::size_t l = 0; l < len; ++l) {
      for (std::size_t i = 0; i < inner; ++i) ys[l * inner + i] *= is[i];
    }
  }
  const std::size_t iz = z.id();
  Var out = z.tape().record(std::move(y), {z}, nullptr);
  const std::size_t io = out.id();
  // dx = (g - mean(g) - y * mean(g * y)) / sigma, means taken within a task.
  z.tape().set_backward(io, [iz, io, outer, len, inner, inv_len,
                             inv_sigma = std::move(inv_sigma)](Tape& tape, const Tensor& grad) {
    Tensor* gz = tape.grad_buffer(iz);
    if (!gz) return;
    const Tensor& y = tape.value_at(io);
    std::vector<double> mg(inner), mgy(inner);
    for (std::size_t o = 0; o < outer; ++o) {
      const std::size_t base = o * len * inner;
      std::fill(mg.begin(), mg.end(), 0.0);
      std::fill(mgy.begin(), mgy.end(), 0.0);
      for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t i = 0; i < inner; ++i) {
          const double gv = grad[base + l * inner + i];
          mg[i] += gv;
          mgy[i] += gv * y[base + l * inner + i];
        }
      }
      for (std::size_t l = 0; l < len; ++l) {
        for (std::size_t i = 0; i < inner; ++i) {
          const std::size_t k = base + l * inner + i;
          (*gz)[k] += (grad[k] - (mg[i] + y[k] * mgy[i]) * inv_len) * inv_sigma[o * inner + i];
        }
      }
    }
  });
  return out;
}

Var task_affine(const Var& z, const Var& w, const Var& b) {
  const GridAxes g = grid_axes(z.shape());
  const Shape expected{g.n, g.d};
  if (w.shape() != expected || b.shape() != expected) {
    fail("affine parameters " + shape_str(w.shape()) + "/" + shape_str(b.shape()) +
         " do not match " + std::to_string(g.n) + " variables x " + std::to_string(g.d) +
         " channels");
  }
  Var wr = reshape(w, Shape{g.n, 1, g.d});
  Var br = reshape(b, Shape{g.n, 1, g.d});
  return add(mul(z, wr), br);
}

std::size_t BranchSet::arity() const {
  return static_cast<std::size_t>(original) + static_cast<std::size_t>(spatial) +
         static_cast<std::size_t>(temporal);
}

MvmtOutput mvmt_block(const Var& z, const BranchSet& branches,
                      const std::optional<AffineVars>& affine, double epsilon) {
  const GridAxes g = grid_axes(z.shape());
  if (branches.arity() == 0) fail("MVMT block needs at least one branch");
  MvmtOutput out;
  std::vector<Var> parts;
  if (branches.original) {
    out.original = z;
    parts.push_back(z);
  }
  if (branches.spatial) {
    const TaskPartition spatial{View::kSpatial, g.n, g.t};
    Var s = task_normalize(z, spatial, epsilon);
    if (branches.spatial_affine) {
      if (!affine) fail("spatial branch with affine transform needs affine parameters");
      s = task_affine(s, affine->w, affine->b);
    }
    out.spatial = s;
    parts.push_back(s);
  }
  if (branches.temporal) {
    const TaskPartition temporal{View::kTemporal, g.n, g.t};
    Var t = task_normalize(z, temporal, epsilon);
    out.temporal = t;
    parts.push_back(t);
  }
  out.output = parts.size() == 1 ? parts.front() : concat_channels(parts);
  return out;
}

CorrelationProfile correlation_profile(const Tensor& z, const TaskPartition& partition) {
  if (z.rank() != 3) fail("correlation_profile expects [N, T, d], got " + shape_str(z.shape()));
  const std::size_t n_vars = z.dim(0), steps = z.dim(1), d = z.dim(2);
  if (n_vars != partition.num_variables || steps != partition.window_length) {
    fail("partition does not match representation " + shape_str(z.shape()));
  }
  if (partition.num_tasks() < 2 || partition.task_size() < 2) {
    fail("correlation_profile needs at least 2 tasks with 2 members each");
  }
  // For unit vectors u_i, sum_{i<j} <u_i, u_j> = (|sum u|^2 - count) / 2, which
  // gives both the all-pairs total and each task's within-task total.
  const std::size_t tasks = partition.num_tasks();
  std::vector<double> task_sum(tasks * d, 0.0);
  std::vector<std::size_t> task_count(tasks, 0);
  std::vector<double> all_sum(d, 0.0);
  std::size_t count = 0;
  for (std::size_t n = 0; n < n_vars; ++n) {
    for (std::size_t t = 0; t < steps; ++t) {
      const double* v = z.raw() + (n * steps + t) * d;
      double norm2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) norm2 += v[c] * v[c];
      if (norm2 == 0.0) continue;
      const double inv = 1.0 / std::sqrt(norm2);
      const std::size_t m = partition.task_of(n, t);
      for (std::size_t c = 0; c < d; ++c) {
        task_sum[m * d + c] += v[c] * inv;
        all_sum[c] += v[c] * inv;
      }
      ++task_count[m];
      ++count;
    }
  }
  auto sq = [d](const double* v) {
    double s = 0.0;
    for (std::size_t c = 0; c < d; ++c) s += v[c] * v[c];
    return s;
  };
  double intra_total = 0.0;
  std::size_t intra_pairs = 0;
  for (std::size_t m = 0; m < tasks; ++m) {
    const std::size_t k = task_count[m];
    intra_total += 0.5 * (sq(task_sum.data() + m * d) - static_cast<double>(k));
    intra_pairs += k * (k - (k > 0 ? 1 : 0)) / 2;
  }
  const double all_total = 0.5 * (sq(all_sum.data()) - static_cast<double>(count));
  const std::size_t all_pairs = count * (count - (count > 0 ? 1 : 0)) / 2;
  const std::size_t inter_pairs = all_pairs - intra_pairs;
  if (intra_pairs == 0 || inter_pairs == 0) {
    fail("correlation_profile: no usable sample pairs after excluding zero vectors");
  }
  CorrelationProfile p;
  p.intra = std::clamp(intra_total / static_cast<double>(intra_pairs), -1.0, 1.0);
  p.inter = std::clamp((all_total - intra_total) / static_cast<double>(inter_pairs), -1.0, 1.0);
  p.intra_pairs = intra_pairs;
  p.inter_pairs = inter_pairs;
  return p;
}

}  // namespace mvmt
