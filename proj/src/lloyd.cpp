#include "rkmeans/lloyd.hpp"

#include <algorithm>
#include <charconv>
#include <random>
#include <thread>

#include "rkmeans/csv.hpp"
#include "rkmeans/error.hpp"

namespace rkmeans {

double CategoricalComponent::coordinate(Code category) const {
  auto it = std::lower_bound(coords.begin(), coords.end(), category,
                             [](const auto& entry, Code c) { return entry.first < c; });
  return it != coords.end() && it->first == category ? it->second : 0.0;
}

void CategoricalComponent::refresh_norm() {
  norm_sq = 0;
  for (const auto& [code, value] : coords) norm_sq += value * value;
}

CentroidComponent grid_component(const SubspaceCentroids& dim, std::uint32_t id) {
  if (const auto* c = std::get_if<ContinuousCentroids>(&dim)) return c->centroids.at(id);
  const auto& cat = std::get<CategoricalCentroids>(dim);
  CategoricalComponent out;
  if (id < cat.heavy.size()) {
    out.coords.emplace_back(cat.heavy[id], 1.0);
    out.norm_sq = 1.0;
  } else if (id == cat.light_id() && cat.has_light()) {
    out.coords = cat.light;
    out.norm_sq = cat.light_norm_sq;
  } else {
    throw ContractViolation("grid_component: centroid id out of range");
  }
  return out;
}

Centroid grid_point_centroid(const GridCoreset& coreset, std::size_t point) {
  Centroid c;
  const auto& coords = coreset.points.at(point).coords;
  for (std::size_t j = 0; j < coreset.features(); ++j) {
    c.components.push_back(grid_component(coreset.dims[j], coords[j]));
  }
  return c;
}

double sparse_distance(const CategoricalCentroids& dim, std::uint32_t id,
                       const CategoricalComponent& mu, std::uint64_t* terms) {
  if (id < dim.heavy.size()) {
    if (terms) ++*terms;
    return std::max(0.0, 1.0 - 2.0 * mu.coordinate(dim.heavy[id]) + mu.norm_sq);
  }
  if (id != dim.light_id() || !dim.has_light()) {
    throw ContractViolation("sparse_distance: centroid id out of range");
  }
  double inner = 0;
  std::size_t a = 0, b = 0;
  std::uint64_t steps = 0;
  while (a < dim.light.size() && b < mu.coords.size()) {
    ++steps;
    if (dim.light[a].first < mu.coords[b].first) {
      ++a;
    } else if (mu.coords[b].first < dim.light[a].first) {
      ++b;
    } else {
      inner += dim.light[a].second * mu.coords[b].second;
      ++a;
      ++b;
    }
  }
  if (terms) *terms += steps + 1;
  return std::max(0.0, dim.light_norm_sq + mu.norm_sq - 2.0 * inner);
}

namespace {

double feature_weight(std::span<const double> weights, std::size_t j) {
  return weights.empty() ? 1.0 : weights[j];
}

void check_feature_weights(const GridCoreset& coreset, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != coreset.features()) {
    throw ConfigError("feature weight vector has " + std::to_string(weights.size()) +
                      " entries, expected " + std::to_string(coreset.features()));
  }
  for (double w : weights) {
    if (!(w >= 0)) throw ConfigError("feature weights must be nonnegative");
  }
}

double component_distance(const SubspaceCentroids& dim, std::uint32_t id,
                          const CentroidComponent& mu) {
  if (const auto* c = std::get_if<ContinuousCentroids>(&dim)) {
    double d = c->centroids[id] - std::get<double>(mu);
    return d * d;
  }
  return sparse_distance(std::get<CategoricalCentroids>(dim), id,
                         std::get<CategoricalComponent>(mu));
}

// Distance between two subspace centroids of the same feature.
double id_distance(const SubspaceCentroids& dim, std::uint32_t a, std::uint32_t b) {
  if (a == b) return 0;
  if (const auto* c = std::get_if<ContinuousCentroids>(&dim)) {
    double d = c->centroids[a] - c->centroids[b];
    return d * d;
  }
  const auto& cat = std::get<CategoricalCentroids>(dim);
  bool a_light = a == cat.light_id();
  bool b_light = b == cat.light_id();
  if (a_light || b_light) return 1.0 + cat.light_norm_sq;
  return 2.0;
}

double point_distance(const GridCoreset& coreset, std::size_t p, std::size_t q,
                      std::span<const double> weights) {
  double d = 0;
  for (std::size_t j = 0; j < coreset.features(); ++j) {
    d += feature_weight(weights, j) *
         id_distance(coreset.dims[j], coreset.points[p].coords[j], coreset.points[q].coords[j]);
  }
  return d;
}

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Index of the first point whose cumulative mass exceeds u * total.
std::size_t sample_index(std::span<const double> mass, double u) {
  double total = 0;
  for (double m : mass) total += m;
  double target = u * total;
  double running = 0;
  std::size_t last_positive = mass.size();
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] <= 0) continue;
    last_positive = i;
    running += mass[i];
    if (running > target) return i;
  }
  return last_positive;
}

// Per-centroid table of squared distances from every subspace centroid id of
// every feature, laid out feature after feature.
class DistanceTables {
 public:
  DistanceTables(const GridCoreset& coreset, std::span<const double> weights)
      : coreset_(coreset), weights_(weights) {
    std::size_t offset = 0;
    for (const auto& dim : coreset.dims) {
      offsets_.push_back(offset);
      offset += centroid_count(dim);
      if (const auto* cat = std::get_if<CategoricalCentroids>(&dim)) {
        std::vector<std::pair<Code, std::uint32_t>> sorted;
        for (std::uint32_t i = 0; i < cat->heavy.size(); ++i) sorted.emplace_back(cat->heavy[i], i);
        std::sort(sorted.begin(), sorted.end());
        heavy_sorted_.push_back(std::move(sorted));
      } else {
        heavy_sorted_.emplace_back();
      }
    }
    width_ = offset;
  }

  std::size_t width() const { return width_; }
  std::size_t offset(std::size_t j) const { return offsets_[j]; }

  // Fills `row` (width() entries) for one centroid; returns terms touched.
  std::uint64_t fill(const Centroid& centroid, std::span<double> row) const {
    std::uint64_t terms = 0;
    for (std::size_t j = 0; j < coreset_.features(); ++j) {
      const double fw = feature_weight(weights_, j);
      double* out = row.data() + offsets_[j];
      const auto& dim = coreset_.dims[j];
      if (const auto* cont = std::get_if<ContinuousCentroids>(&dim)) {
        double mu = std::get<double>(centroid.components[j]);
        for (std::size_t s = 0; s < cont->size(); ++s) {
          double d = cont->centroids[s] - mu;
          out[s] = fw * d * d;
          ++terms;
        }
        continue;
      }
      const auto& cat = std::get<CategoricalCentroids>(dim);
      const auto& mu = std::get<CategoricalComponent>(centroid.components[j]);
      // Heavy ids: one merge walk recovers every t_e.
      const auto& heavy = heavy_sorted_[j];
      for (std::size_t s = 0; s < heavy.size(); ++s) out[s] = fw * (1.0 + mu.norm_sq);
      std::size_t a = 0, b = 0;
      while (a < heavy.size() && b < mu.coords.size()) {
        ++terms;
        if (heavy[a].first < mu.coords[b].first) {
          ++a;
        } else if (mu.coords[b].first < heavy[a].first) {
          ++b;
        } else {
          out[heavy[a].second] =
              fw * std::max(0.0, 1.0 - 2.0 * mu.coords[b].second + mu.norm_sq);
          ++a;
          ++b;
        }
      }
      terms += heavy.size();
      if (cat.has_light()) {
        out[cat.light_id()] = fw * sparse_distance(cat, cat.light_id(), mu, &terms);
      }
    }
    return terms;
  }

 private:
  const GridCoreset& coreset_;
  std::span<const double> weights_;
  std::vector<std::size_t> offsets_;
  std::vector<std::vector<std::pair<Code, std::uint32_t>>> heavy_sorted_;
  std::size_t width_ = 0;
};

struct AssignmentStep {
  double objective = 0;
  std::uint64_t terms = 0;
};

AssignmentStep assign_points(const GridCoreset& coreset, const DistanceTables& tables,
                             const std::vector<Centroid>& centroids, std::size_t threads,
                             std::vector<std::uint32_t>& assignment,
                             std::vector<double>& contribution) {
  const std::size_t k = centroids.size();
  const std::size_t m = coreset.features();
  const std::size_t width = tables.width();
  AssignmentStep step;

  std::vector<double> table(k * width);
  for (std::size_t c = 0; c < k; ++c) {
    step.terms += tables.fill(centroids[c], std::span<double>(table.data() + c * width, width));
  }

  std::vector<std::size_t> offsets(m);
  for (std::size_t j = 0; j < m; ++j) offsets[j] = tables.offset(j);

  const std::size_t n = coreset.size();
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto& coords = coreset.points[p].coords;
      double best = 0;
      std::uint32_t best_c = 0;
      for (std::size_t c = 0; c < k; ++c) {
        const double* row = table.data() + c * width;
        double d = 0;
        for (std::size_t j = 0; j < m; ++j) d += row[offsets[j] + coords[j]];
        if (c == 0 || d < best) {
          best = d;
          best_c = static_cast<std::uint32_t>(c);
        }
      }
      assignment[p] = best_c;
      contribution[p] = static_cast<double>(coreset.points[p].weight) * best;
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, n / 256 + 1));
  if (workers == 1) {
    work(0, n);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      std::size_t begin = std::min(n, w * chunk);
      std::size_t end = std::min(n, begin + chunk);
      pool.emplace_back(work, begin, end);
    }
    for (auto& t : pool) t.join();
  }
  step.terms += static_cast<std::uint64_t>(n) * k * m;
  for (double c : contribution) step.objective += c;
  return step;
}

std::vector<Centroid> update_centroids(const GridCoreset& coreset, const DistanceTables& tables,
                                       const std::vector<std::uint32_t>& assignment,
                                       std::vector<double> contribution, std::size_t k) {
  const std::size_t width = tables.width();
  const std::size_t m = coreset.features();
  std::vector<double> mass(k * width, 0.0);
  std::vector<double> cluster_weight(k, 0.0);
  for (std::size_t p = 0; p < coreset.size(); ++p) {
    const double w = static_cast<double>(coreset.points[p].weight);
    const std::size_t c = assignment[p];
    cluster_weight[c] += w;
    for (std::size_t j = 0; j < m; ++j) {
      mass[c * width + tables.offset(j) + coreset.points[p].coords[j]] += w;
    }
  }

  std::vector<Centroid> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    if (cluster_weight[c] <= 0) {
      // Reseat at the point with the largest weighted distance contribution.
      std::size_t best = 0;
      for (std::size_t p = 1; p < contribution.size(); ++p) {
        if (contribution[p] > contribution[best]) best = p;
      }
      contribution[best] = -1;
      out[c] = grid_point_centroid(coreset, best);
      continue;
    }
    const double inv = 1.0 / cluster_weight[c];
    for (std::size_t j = 0; j < m; ++j) {
      const double* acc = mass.data() + c * width + tables.offset(j);
      const auto& dim = coreset.dims[j];
      if (const auto* cont = std::get_if<ContinuousCentroids>(&dim)) {
        double sum = 0;
        for (std::size_t s = 0; s < cont->size(); ++s) sum += acc[s] * cont->centroids[s];
        out[c].components.emplace_back(sum * inv);
        continue;
      }
      const auto& cat = std::get<CategoricalCentroids>(dim);
      CategoricalComponent comp;
      for (std::size_t s = 0; s < cat.heavy.size(); ++s) {
        if (acc[s] > 0) comp.coords.emplace_back(cat.heavy[s], acc[s] * inv);
      }
      if (cat.has_light() && acc[cat.light_id()] > 0) {
        const double share = acc[cat.light_id()] * inv;
        for (const auto& [code, value] : cat.light) comp.coords.emplace_back(code, share * value);
      }
      std::sort(comp.coords.begin(), comp.coords.end());
      comp.refresh_norm();
      out[c].components.emplace_back(std::move(comp));
    }
  }
  return out;
}

void check_centroids(const GridCoreset& coreset, const std::vector<Centroid>& centroids) {
  if (centroids.empty()) throw ContractViolation("lloyd_iterate: no centroids");
  for (const auto& c : centroids) {
    if (c.components.size() != coreset.features()) {
      throw ContractViolation("lloyd_iterate: centroid layout does not match coreset");
    }
    for (std::size_t j = 0; j < coreset.features(); ++j) {
      bool continuous = std::holds_alternative<ContinuousCentroids>(coreset.dims[j]);
      if (continuous != std::holds_alternative<double>(c.components[j])) {
        throw ContractViolation("lloyd_iterate: centroid component kind mismatch");
      }
    }
  }
}

}  // namespace

double composite_distance(const GridCoreset& coreset, std::size_t point, const Centroid& centroid,
                          std::span<const double> feature_weights) {
  double d = 0;
  for (std::size_t j = 0; j < coreset.features(); ++j) {
    d += feature_weight(feature_weights, j) *
         component_distance(coreset.dims[j], coreset.points[point].coords[j],
                            centroid.components[j]);
  }
  return d;
}

std::vector<Centroid> seed_kmeans_pp(const GridCoreset& coreset, std::size_t k,
                                     std::uint64_t seed, std::span<const double> feature_weights) {
  check_feature_weights(coreset, feature_weights);
  if (coreset.size() == 0) throw ContractViolation("seed_kmeans_pp: empty coreset");
  if (k == 0) throw ConfigError("k must be at least 1");
  if (k > coreset.size()) {
    throw ConfigError("k = " + std::to_string(k) + " exceeds the " +
                      std::to_string(coreset.size()) +
                      " coreset points; lower k (or raise kappa)");
  }
  std::mt19937_64 rng(seed);
  const std::size_t n = coreset.size();
  std::vector<double> mass(n);
  for (std::size_t p = 0; p < n; ++p) mass[p] = static_cast<double>(coreset.points[p].weight);

  std::vector<std::size_t> chosen{sample_index(mass, uniform01(rng))};
  std::vector<double> nearest(n);
  for (std::size_t p = 0; p < n; ++p) nearest[p] = point_distance(coreset, p, chosen[0], feature_weights);

  while (chosen.size() < k) {
    for (std::size_t p = 0; p < n; ++p) {
      mass[p] = static_cast<double>(coreset.points[p].weight) * nearest[p];
    }
    std::size_t next = sample_index(mass, uniform01(rng));
    if (next == n) {
      // Every remaining point coincides with a chosen center.
      next = 0;
      while (std::find(chosen.begin(), chosen.end(), next) != chosen.end()) ++next;
    }
    chosen.push_back(next);
    for (std::size_t p = 0; p < n; ++p) {
      nearest[p] = std::min(nearest[p], point_distance(coreset, p, next, feature_weights));
    }
  }

  std::vector<Centroid> out;
  for (std::size_t p : chosen) out.push_back(grid_point_centroid(coreset, p));
  return out;
}

ClusteringResult lloyd_iterate(const GridCoreset& coreset, std::vector<Centroid> centroids,
                               const LloydOptions& options) {
  check_feature_weights(coreset, options.feature_weights);
  check_centroids(coreset, centroids);
  const std::size_t k = centroids.size();
  DistanceTables tables(coreset, options.feature_weights);

  ClusteringResult result;
  result.assignment.assign(coreset.size(), 0);
  std::vector<double> contribution(coreset.size());
  auto step = assign_points(coreset, tables, centroids, options.threads, result.assignment,
                            contribution);
  result.objective_history.push_back(step.objective);

  for (std::size_t it = 1; it <= options.max_iter; ++it) {
    auto updated = update_centroids(coreset, tables, result.assignment, contribution, k);
    std::vector<std::uint32_t> assignment(coreset.size());
    std::vector<double> next_contribution(coreset.size());
    auto next = assign_points(coreset, tables, updated, options.threads, assignment,
                              next_contribution);
    const bool unchanged = assignment == result.assignment;
    const double previous = step.objective;

    centroids = std::move(updated);
    result.assignment = std::move(assignment);
    contribution = std::move(next_contribution);
    step = next;
    result.objective_history.push_back(step.objective);
    result.distance_terms.push_back(step.terms);
    result.iterations = it;

    const double decrease = previous > 0 ? (previous - step.objective) / previous : 0.0;
    if (unchanged || decrease < options.tol) break;
  }
  result.centroids = std::move(centroids);
  result.objective = step.objective;
  return result;
}

ClusteringResult weighted_kmeans(const GridCoreset& coreset, std::size_t k, std::uint64_t seed,
                                 const LloydOptions& options) {
  auto result = lloyd_iterate(coreset, seed_kmeans_pp(coreset, k, seed, options.feature_weights),
                              options);
  result.seed = seed;
  return result;
}

void write_centroids_csv(std::ostream& out, std::span<const Centroid> centroids,
                         std::span<const FeatureRef> features, const Dictionary& dict) {
  const std::vector<std::string> header{"centroid", "feature", "category", "value"};
  write_csv_record(out, header);
  char buf[64];
  auto real = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  for (std::size_t c = 0; c < centroids.size(); ++c) {
    for (std::size_t j = 0; j < features.size(); ++j) {
      const auto& comp = centroids[c].components.at(j);
      if (const auto* v = std::get_if<double>(&comp)) {
        const std::vector<std::string> row{std::to_string(c), features[j].attribute, "*", real(*v)};
        write_csv_record(out, row);
        continue;
      }
      const auto& cat = std::get<CategoricalComponent>(comp);
      std::vector<std::pair<std::string, double>> entries;
      for (const auto& [code, value] : cat.coords) {
        if (value != 0) entries.emplace_back(dict.token(code), value);
      }
      std::sort(entries.begin(), entries.end());
      for (const auto& [token, value] : entries) {
        const std::vector<std::string> row{std::to_string(c), features[j].attribute, token,
                                           real(value)};
        write_csv_record(out, row);
      }
    }
  }
}

}  // namespace rkmeans
