#include "seqlab/theory/theory.hpp"

#include <algorithm>
#include <cmath>

namespace seqlab::theory {

double RiskTable::cumulative(std::size_t entry, std::size_t t) const {
  double acc = 0.0;
  for (std::size_t i = 0; i < t && i < horizon; ++i) acc += risk[entry][i];
  return acc;
}

RiskTable risk_table(std::span<const CoreModel> entries, const CoreModel& teacher,
                     DistributionSpec dist, std::size_t horizon, std::size_t samples,
                     std::uint64_t seed) {
  if (horizon == 0 || samples == 0) {
    throw std::invalid_argument("risk_table: horizon and samples must be positive");
  }
  dist.T = horizon;
  const std::size_t e_count = entries.size();

  RiskTable table;
  table.horizon = horizon;
  table.samples = samples;
  table.risk.assign(e_count, std::vector<double>(horizon, 0.0));
  table.se.assign(e_count, std::vector<double>(horizon, 0.0));
  std::vector<std::vector<double>> sum_sq(e_count, std::vector<double>(horizon, 0.0));

  num::RngStream rng(seed, "risk_table");
  const std::size_t chunk = 256;
  std::size_t done = 0, index = 0;
  while (done < samples) {
    const std::size_t take = std::min(chunk, samples - done);
    num::RngStream chunk_rng = rng.derive("chunk", index++);
    auto tokens = data::sample_tokens(dist, take, chunk_rng);
    models::ForwardResult truth = models::forward(teacher, tokens);
    for (std::size_t e = 0; e < e_count; ++e) {
      models::ForwardResult pred = models::forward(entries[e], tokens);
      for (std::size_t t = 0; t < horizon; ++t) {
        const Matrix& a = pred.labels[t];
        const Matrix& b = truth.labels[t];
        const std::size_t m = a.cols();
        for (std::size_t r = 0; r < take; ++r) {
          double loss = 0.0;
          for (std::size_t c = 0; c < m; ++c) {
            const double d = a(r, c) - b(r, c);
            loss += d * d;
          }
          loss /= static_cast<double>(m);
          table.risk[e][t] += loss;
          sum_sq[e][t] += loss * loss;
        }
      }
    }
    done += take;
  }

  const double n = static_cast<double>(samples);
  for (std::size_t e = 0; e < e_count; ++e) {
    for (std::size_t t = 0; t < horizon; ++t) {
      const double mean = table.risk[e][t] / n;
      table.risk[e][t] = mean;
      const double var = std::max(0.0, sum_sq[e][t] / n - mean * mean);
      table.se[e][t] = std::sqrt(var / n);
    }
  }
  return table;
}

HypothesisGrid scalar_ssm_grid(std::span<const double> lambda_values,
                               std::span<const double> b_values, double teacher_lambda,
                               double teacher_b) {
  HypothesisGrid grid;
  grid.family = models::Family::kSsm;
  grid.axis_names = {"lambda", "b"};
  grid.axes = {std::vector<double>(lambda_values.begin(), lambda_values.end()),
               std::vector<double>(b_values.begin(), b_values.end())};
  for (double lambda : lambda_values) {
    for (double b : b_values) {
      models::Ssm ssm;
      ssm.n = ssm.m = ssm.k = 1;
      ssm.capacity = models::CapacityClass::kHighCapacity;  // grids skip invertibility rules
      ssm.lambda = Matrix::constant(1, 1, lambda);
      ssm.b_in = Matrix::constant(1, 1, b);
      ssm.omega = models::Head::identity();
      if (lambda == teacher_lambda && b == teacher_b) {
        grid.teacher_index = grid.entries.size();
      }
      grid.entries.push_back(GridEntry{{lambda, b}, CoreModel(std::move(ssm))});
    }
  }
  if (grid.teacher_index == kNever) {
    throw std::invalid_argument(
        "scalar_ssm_grid: the teacher parameters are not a grid point (realizability "
        "requires f in H)");
  }
  return grid;
}

HypothesisGrid grid_from_entries(models::Family family, std::vector<std::string> axis_names,
                                 std::vector<GridEntry> entries, std::size_t teacher_index) {
  if (teacher_index >= entries.size()) {
    throw std::invalid_argument("grid_from_entries: teacher entry is not on the grid");
  }
  HypothesisGrid grid;
  grid.family = family;
  grid.axis_names = std::move(axis_names);
  grid.entries = std::move(entries);
  grid.teacher_index = teacher_index;
  return grid;
}

FiniteClassResult finite_class_t0(const HypothesisGrid& grid, const DistributionSpec& dist,
                                  double risk_tolerance, std::size_t train_t,
                                  std::size_t horizon, std::size_t samples,
                                  std::uint64_t seed) {
  if (grid.teacher_index >= grid.entries.size()) {
    throw std::invalid_argument("finite_class_t0: grid does not contain the teacher");
  }
  std::vector<CoreModel> entries;
  entries.reserve(grid.entries.size());
  for (const GridEntry& e : grid.entries) entries.push_back(e.model);

  FiniteClassResult result;
  result.table = risk_table(entries, grid.entries[grid.teacher_index].model, dist, horizon,
                            samples, seed);

  // T_h from the cumulative risk R(h, t): monotone in t, so the first
  // crossing is permanent.
  result.first_violation.assign(entries.size(), kNever);
  for (std::size_t e = 0; e < entries.size(); ++e) {
    double cumulative = 0.0;
    for (std::size_t t = 1; t <= horizon; ++t) {
      cumulative += result.table.risk[e][t - 1];
      if (cumulative > risk_tolerance) {
        result.first_violation[e] = t;
        break;
      }
    }
  }
  result.t0 = 0;
  for (std::size_t v : result.first_violation) {
    if (v != kNever) result.t0 = std::max(result.t0, v);
  }

  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (result.first_violation[e] == kNever || result.first_violation[e] > train_t) {
      result.survivors.push_back(e);
    }
  }

  result.survivors_certified = true;
  for (std::size_t e : result.survivors) {
    for (std::size_t t = 0; t < horizon; ++t) {
      if (result.table.risk[e][t] > risk_tolerance) {
        result.survivors_certified = false;
        break;
      }
    }
  }
  return result;
}

CoverSpec make_cover(std::vector<std::string> axis_names,
                     std::vector<std::pair<double, double>> bounds,
                     std::vector<std::size_t> points_per_axis, double lipschitz,
                     double epsilon, ModelBuilder build) {
  if (bounds.size() != points_per_axis.size() || bounds.size() != axis_names.size()) {
    throw std::invalid_argument("make_cover: axis counts disagree");
  }
  CoverSpec cover;
  cover.axis_names = std::move(axis_names);
  cover.bounds = std::move(bounds);
  cover.points_per_axis = std::move(points_per_axis);
  cover.lipschitz = lipschitz;
  cover.epsilon = epsilon;
  cover.build = std::move(build);

  double eta_sq = 0.0;
  std::vector<std::vector<double>> axes;
  for (std::size_t d = 0; d < cover.bounds.size(); ++d) {
    const auto [lo, hi] = cover.bounds[d];
    const std::size_t pts = cover.points_per_axis[d];
    if (pts < 2 || hi <= lo) {
      throw std::invalid_argument("make_cover: each axis needs at least two points");
    }
    const double spacing = (hi - lo) / static_cast<double>(pts - 1);
    eta_sq += 0.25 * spacing * spacing;  // farthest box point sits mid-cell
    std::vector<double> axis;
    for (std::size_t i = 0; i < pts; ++i) axis.push_back(lo + spacing * static_cast<double>(i));
    axes.push_back(std::move(axis));
  }
  cover.eta = std::sqrt(eta_sq);
  if (lipschitz <= 0.0 || cover.eta > epsilon / lipschitz) {
    throw std::invalid_argument("make_cover: requires eta <= epsilon / L, got eta=" +
                                std::to_string(cover.eta) + " epsilon/L=" +
                                std::to_string(epsilon / lipschitz));
  }

  std::vector<double> point(axes.size(), 0.0);
  std::function<void(std::size_t)> emit = [&](std::size_t d) {
    if (d == axes.size()) {
      cover.grid_points.push_back(point);
      return;
    }
    for (double v : axes[d]) {
      point[d] = v;
      emit(d + 1);
    }
  };
  emit(0);
  return cover;
}

ConstrainedResult constrained_survivors(const CoverSpec& cover,
                                        std::span<const double> teacher_params,
                                        const CoreModel& teacher,
                                        const DistributionSpec& dist, std::size_t horizon,
                                        std::size_t samples, std::uint64_t seed) {
  std::vector<CoreModel> entries;
  entries.reserve(cover.grid_points.size());
  for (const auto& p : cover.grid_points) entries.push_back(cover.build(p));

  ConstrainedResult result;
  result.table = risk_table(entries, teacher, dist, horizon, samples, seed);

  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t e = 0; e < cover.grid_points.size(); ++e) {
    double d2 = 0.0;
    for (std::size_t d = 0; d < teacher_params.size(); ++d) {
      const double diff = cover.grid_points[e][d] - teacher_params[d];
      d2 += diff * diff;
    }
    if (d2 < best_dist) {
      best_dist = d2;
      result.teacher_nearest = e;
    }
  }

  // Survivor sets are intersections of per-length constraints, hence nested.
  result.survivors_by_t.resize(horizon + 1);
  std::vector<bool> alive(entries.size(), true);
  for (std::size_t e = 0; e < entries.size(); ++e) result.survivors_by_t[0].push_back(e);
  for (std::size_t t = 1; t <= horizon; ++t) {
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (alive[e] && result.table.risk[e][t - 1] > cover.epsilon) alive[e] = false;
    }
    for (std::size_t e = 0; e < entries.size(); ++e) {
      if (alive[e]) result.survivors_by_t[t].push_back(e);
    }
    if (result.survivors_by_t[t].empty() && !result.empty_set_diagnostic) {
      NearestMiss miss;
      for (std::size_t e = 0; e < entries.size(); ++e) {
        double excess = 0.0;
        for (std::size_t u = 0; u < t; ++u) {
          excess = std::max(excess, result.table.risk[e][u] - cover.epsilon);
        }
        if (miss.entry == kNever || excess < miss.worst_excess) {
          miss.entry = e;
          miss.worst_excess = excess;
        }
      }
      result.empty_set_diagnostic = miss;
    }
  }

  result.stabilized_set = result.survivors_by_t[horizon];
  result.stabilized_t0 = horizon;
  for (std::size_t t = horizon; t >= 1; --t) {
    if (result.survivors_by_t[t] != result.stabilized_set) break;
    result.stabilized_t0 = t;
    if (t == 1) break;
  }

  // Nested sets: membership at the horizon implies membership at every T.
  result.teacher_nearest_survives_all =
      std::find(result.survivors_by_t[horizon].begin(), result.survivors_by_t[horizon].end(),
                result.teacher_nearest) != result.survivors_by_t[horizon].end();
  return result;
}

double transformer_block_bound(double l_omega, double m_omega, double l_psi) {
  if (l_omega < 0 || m_omega < 0 || l_psi < 0) {
    throw std::invalid_argument("transformer_block_bound: constants must be non-negative");
  }
  return std::sqrt(l_omega * l_omega + m_omega * m_omega * l_psi * l_psi);
}

RnnLipschitzBound rnn_lipschitz_bound(const LipschitzConstants& c) {
  if (c.l_sigma * c.lambda_sup >= 1.0) {
    throw std::invalid_argument(
        "rnn_lipschitz_bound: contraction violated, needs L_sigma * Lambda_sup < 1 (got " +
        std::to_string(c.l_sigma * c.lambda_sup) + ")");
  }
  RnnLipschitzBound out;
  const double denom = 1.0 - c.l_sigma * c.lambda_sup;
  out.h_sup = c.l_sigma * c.b_sup * c.x_sup / denom;
  out.gamma1 = c.m_omega * c.l_sigma * c.l_sigma * c.b_sup * c.x_sup / (denom * denom);
  out.gamma2 = c.m_omega * c.l_sigma * c.x_sup / denom;
  out.bound = std::sqrt(c.l_omega * c.l_omega + out.gamma1 * out.gamma1 +
                        out.gamma2 * out.gamma2);
  out.bound_as_printed = std::sqrt(c.l_sigma * c.l_sigma + out.gamma1 * out.gamma1 +
                                   out.gamma2 * out.gamma2);
  return out;
}

namespace {

// Gaussian direction scaled to a uniformly drawn Frobenius norm below `bound`.
Matrix bounded_matrix(num::RngStream& rng, std::size_t rows, std::size_t cols, double bound) {
  Matrix m = rng.normal_matrix(rows, cols, 0.0, 1.0);
  const double norm = num::frobenius_norm(m);
  if (norm == 0.0) return m;
  return num::scale(m, rng.uniform(0.1, 1.0) * bound / norm);
}

Matrix bounded_token(num::RngStream& rng, std::size_t n, double x_sup) {
  Matrix x = rng.normal_matrix(1, n, 0.0, 1.0);
  const double norm = num::frobenius_norm(x);
  if (norm == 0.0) return x;
  return num::scale(x, rng.uniform(0.0, 1.0) * x_sup / norm);
}

double param_distance(std::span<const Matrix* const> a, std::span<const Matrix* const> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i]->size(); ++j) {
      const double d = a[i]->data()[j] - b[i]->data()[j];
      acc += d * d;
    }
  }
  return std::sqrt(acc);
}

}  // namespace

EmpiricalLipschitzResult empirical_lipschitz(const EmpiricalLipschitzConfig& config,
                                             std::uint64_t seed) {
  EmpiricalLipschitzResult result;
  result.per_t_max.assign(config.max_t, 0.0);
  const std::size_t d = config.dim;

  LipschitzConstants c;
  c.x_sup = config.x_sup;
  if (config.family == LipschitzFamily::kTransformerBlock) {
    // Linear token map and readout keep every constant exact: L_psi = x_sup,
    // M_omega = the readout norm bound, L_omega = sup ||aggregate||.
    c.l_psi = config.x_sup;
    c.m_omega = config.omega_sup;
    c.l_omega = config.psi_sup * config.x_sup;
    result.analytic_bound = transformer_block_bound(c.l_omega, c.m_omega, c.l_psi);
  } else {
    // Centered sigmoid: sigma(z) = 1/(1+e^-z) - 1/2, so sigma(0) = 0 and
    // L_sigma = 1/4. The readout is linear, so its param-Lipschitz constant
    // is the reachable state norm h_sup.
    c.l_sigma = 0.25;
    c.lambda_sup = config.lambda_sup;
    c.b_sup = config.b_sup;
    c.m_omega = config.omega_sup;
    const double denom = 1.0 - c.l_sigma * c.lambda_sup;
    if (denom <= 0.0) {
      throw std::invalid_argument("empirical_lipschitz: contraction violated");
    }
    c.l_omega = c.l_sigma * c.b_sup * c.x_sup / denom;  // = h_sup
    result.analytic_bound = rnn_lipschitz_bound(c).bound;
  }
  result.constants = c;

  num::RngStream rng(seed, "empirical_lipschitz");
  for (std::size_t trial = 0; trial < config.trials; ++trial) {
    num::RngStream tr = rng.derive("trial", trial);
    std::vector<Matrix> theta_a, theta_b;
    if (config.family == LipschitzFamily::kTransformerBlock) {
      theta_a.push_back(bounded_matrix(tr, d, d, config.omega_sup));  // readout
      theta_a.push_back(bounded_matrix(tr, d, d, config.psi_sup));    // token map
      theta_b.push_back(bounded_matrix(tr, d, d, config.omega_sup));
      theta_b.push_back(bounded_matrix(tr, d, d, config.psi_sup));
    } else {
      theta_a.push_back(bounded_matrix(tr, d, d, config.omega_sup));   // A
      theta_a.push_back(bounded_matrix(tr, d, d, config.lambda_sup));  // Lambda
      theta_a.push_back(bounded_matrix(tr, d, d, config.b_sup));       // B
      theta_b.push_back(bounded_matrix(tr, d, d, config.omega_sup));
      theta_b.push_back(bounded_matrix(tr, d, d, config.lambda_sup));
      theta_b.push_back(bounded_matrix(tr, d, d, config.b_sup));
    }
    std::vector<const Matrix*> pa, pb;
    for (const Matrix& m : theta_a) pa.push_back(&m);
    for (const Matrix& m : theta_b) pb.push_back(&m);
    const double dist = param_distance(pa, pb);
    if (dist <= 0.0) continue;  // measure-zero tie; the ratio is undefined

    if (config.family == LipschitzFamily::kTransformerBlock) {
      Matrix sum_a(1, d), sum_b(1, d);
      for (std::size_t t = 1; t <= config.max_t; ++t) {
        Matrix x = bounded_token(tr, d, config.x_sup);
        sum_a = num::add(sum_a, num::matmul(x, num::transpose(theta_a[1])));
        sum_b = num::add(sum_b, num::matmul(x, num::transpose(theta_b[1])));
        const double inv = 1.0 / static_cast<double>(t);
        Matrix ya = num::matmul(num::scale(sum_a, inv), num::transpose(theta_a[0]));
        Matrix yb = num::matmul(num::scale(sum_b, inv), num::transpose(theta_b[0]));
        const double ratio = num::frobenius_norm(num::sub(ya, yb)) / dist;
        result.per_t_max[t - 1] = std::max(result.per_t_max[t - 1], ratio);
        result.max_ratio = std::max(result.max_ratio, ratio);
        if (ratio > result.analytic_bound) ++result.violations;
      }
    } else {
      Matrix ha(1, d), hb(1, d);
      auto centered_sigmoid = [](Matrix z) {
        for (double& v : z.values()) v = 1.0 / (1.0 + std::exp(-v)) - 0.5;
        return z;
      };
      for (std::size_t t = 1; t <= config.max_t; ++t) {
        Matrix x = bounded_token(tr, d, config.x_sup);
        ha = centered_sigmoid(num::add(num::matmul(ha, num::transpose(theta_a[1])),
                                       num::matmul(x, num::transpose(theta_a[2]))));
        hb = centered_sigmoid(num::add(num::matmul(hb, num::transpose(theta_b[1])),
                                       num::matmul(x, num::transpose(theta_b[2]))));
        Matrix ya = num::matmul(ha, num::transpose(theta_a[0]));
        Matrix yb = num::matmul(hb, num::transpose(theta_b[0]));
        const double ratio = num::frobenius_norm(num::sub(ya, yb)) / dist;
        result.per_t_max[t - 1] = std::max(result.per_t_max[t - 1], ratio);
        result.max_ratio = std::max(result.max_ratio, ratio);
        if (ratio > result.analytic_bound) ++result.violations;
      }
    }
  }
  return result;
}

double rademacher_bound(double c, double cover_size, double m, double t, double epsilon) {
  if (cover_size < 1.0 || m < 1.0 || t < 1.0) {
    throw std::invalid_argument("rademacher_bound: requires N >= 1 and m, T >= 1");
  }
  return 2.0 * c * std::sqrt(std::log(cover_size) / (m * t)) + epsilon;
}

}  // namespace seqlab::theory
