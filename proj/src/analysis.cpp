#include "swt/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <queue>
#include <unordered_map>

#include <Eigen/Dense>

#include "swt/wsd.hpp"

namespace swt {

namespace {

std::vector<Vector> group_vectors(const SenseGroup& g, const ThresholdMask* mask) {
  std::vector<Vector> out;
  out.reserve(g.size());
  for (const auto* m : g.members) out.push_back(mask ? apply_mask(m->vector, mask->bits) : m->vector);
  return out;
}

const ThresholdMask* find_mask(const MaskStore* masks, const std::string& sense) {
  if (!masks) return nullptr;
  const auto it = masks->find(sense);
  return it == masks->end() ? nullptr : &it->second;
}

double pearson(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error("undefined correlation: constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

WithinGroupCosine within_group_cosine(const std::vector<SenseGroup>& groups, const MaskStore* masks) {
  WithinGroupCosine out;
  for (const auto& g : groups) {
    if (g.size() < 2) {
      out.diagnostics.push_back({g.sense_id, "group smaller than 2 skipped"});
      continue;
    }
    const auto* mask = find_mask(masks, g.sense_id);
    if (masks && !mask) {
      out.diagnostics.push_back({g.sense_id, "no mask for sense; skipped"});
      continue;
    }
    const auto vectors = group_vectors(g, mask);
    out.groups.push_back({g.sense_id, g.size(), pairwise_similarity(vectors, Objective::Mean).value});
  }
  if (!out.groups.empty()) {
    double sum = 0.0;
    for (const auto& g : out.groups) sum += g.mean_cosine;
    out.overall_mean = sum / static_cast<double>(out.groups.size());
  }
  return out;
}

Vector sense_centroid(const SenseGroup& group, const ThresholdMask* mask) {
  if (group.members.empty()) throw Error("centroid of empty group '" + group.sense_id + "'");
  const std::size_t dim = group.members.front()->vector.size();
  std::vector<double> sum(dim, 0.0);
  for (const auto* m : group.members) {
    for (std::size_t d = 0; d < dim; ++d) sum[d] += m->vector[d];
  }
  Vector out(dim);
  for (std::size_t d = 0; d < dim; ++d) {
    out[d] = (mask && !mask->bits[d]) ? 0.0f : static_cast<float>(sum[d] / static_cast<double>(group.size()));
  }
  return out;
}

double path_similarity(const Taxonomy& taxonomy, const std::string& a, const std::string& b) {
  if (!taxonomy.has_node(a)) throw Error("unknown sense in taxonomy: '" + a + "'");
  if (!taxonomy.has_node(b)) throw Error("unknown sense in taxonomy: '" + b + "'");
  if (a == b) return 1.0;
  std::unordered_map<std::string, std::size_t> depth{{a, 0}};
  std::deque<std::string> frontier{a};
  while (!frontier.empty()) {
    const auto node = std::move(frontier.front());
    frontier.pop_front();
    const auto next_depth = depth.at(node) + 1;
    for (const auto& n : taxonomy.neighbors(node)) {
      if (depth.count(n)) continue;
      if (n == b) return 1.0 / (1.0 + static_cast<double>(next_depth));
      depth.emplace(n, next_depth);
      frontier.push_back(n);
    }
  }
  return 0.0;
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw Error("spearman: length mismatch");
  if (xs.size() < 3) throw Error("undefined correlation: fewer than 3 points");
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return pearson(rx, ry);
}

CorrelationReport correlation_report(const EmbeddingSet& set, const std::vector<SenseGroup>& groups,
                                     const WeightStore& weights, const Taxonomy& taxonomy,
                                     const MaskRule& rule, std::size_t min_size) {
  CorrelationReport rep;
  rep.model_id = set.model_id;
  rep.dim = set.dim;
  rep.layer = set.records.empty() ? 0 : set.records.front().layer_id;

  struct Retained {
    const SenseGroup* group;
    ThresholdMask mask;
    Vector centroid;
    Vector centroid_masked;
  };
  std::vector<Retained> kept;
  for (const auto& g : groups) {
    if (g.size() <= min_size) continue;
    const auto w = weights.find(g.sense_id);
    if (w == weights.end()) {
      rep.diagnostics.push_back({g.sense_id, "no trained weights; excluded"});
      continue;
    }
    if (!taxonomy.has_node(g.sense_id)) {
      rep.diagnostics.push_back({g.sense_id, "sense missing from taxonomy; excluded"});
      continue;
    }
    auto mask = derive_mask(w->second.w, rule, g.sense_id);
    auto c = sense_centroid(g);
    auto cm = sense_centroid(g, &mask);
    kept.push_back({&g, std::move(mask), std::move(c), std::move(cm)});
  }
  rep.groups_used = kept.size();
  if (kept.size() < 3) throw Error("correlation needs at least 3 retained groups, have " + std::to_string(kept.size()));

  double masked_total = 0.0, cos_o = 0.0, cos_m = 0.0;
  for (const auto& k : kept) {
    masked_total += static_cast<double>(k.mask.n_masked);
    cos_o += pairwise_similarity(group_vectors(*k.group, nullptr), Objective::Mean).value;
    cos_m += pairwise_similarity(group_vectors(*k.group, &k.mask), Objective::Mean).value;
  }
  const double n = static_cast<double>(kept.size());
  rep.n_masked = masked_total / n;
  rep.cos_original = cos_o / n;
  rep.cos_masked = cos_m / n;

  std::vector<double> path, sim_o, sim_m;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (std::size_t j = i + 1; j < kept.size(); ++j) {
      if (kept[i].group->members.front()->pos != kept[j].group->members.front()->pos) {
        ++rep.cross_pos_pairs_excluded;
        continue;
      }
      path.push_back(path_similarity(taxonomy, kept[i].group->sense_id, kept[j].group->sense_id));
      sim_o.push_back(cosine_similarity(kept[i].centroid, kept[j].centroid));
      sim_m.push_back(cosine_similarity(kept[i].centroid_masked, kept[j].centroid_masked));
    }
  }
  rep.pairs_used = path.size();
  rep.rho_original = spearman(path, sim_o);
  rep.rho_masked = spearman(path, sim_m);
  return rep;
}

void write_correlation_report(std::ostream& out, const CorrelationReport& r) {
  out << "model\tdim\tlayer\tn_masked\trho_original\trho_masked\tcos_original\tcos_masked\tgroups_used\tpairs_used"
         "\tcross_pos_excluded\n";
  out << (r.model_id.empty() ? "-" : r.model_id) << '\t' << r.dim << '\t' << r.layer << '\t' << std::fixed
      << std::setprecision(2) << r.n_masked << std::setprecision(5) << '\t' << r.rho_original << '\t'
      << r.rho_masked << '\t' << r.cos_original << '\t' << r.cos_masked << '\t' << r.groups_used << '\t'
      << r.pairs_used << '\t' << r.cross_pos_pairs_excluded << '\n'
      << std::defaultfloat;
}

ProjectionOutput lda_project(const std::vector<SenseGroup>& groups, std::size_t out_dim, double ridge,
                             const MaskStore* masks) {
  using Eigen::MatrixXd;
  using Eigen::VectorXd;

  std::vector<const SenseGroup*> used;
  for (const auto& g : groups) {
    if (g.size() >= 2) used.push_back(&g);
  }
  if (used.size() < 2) throw Error("LDA needs at least 2 groups with 2 or more members");
  const auto dim = static_cast<Eigen::Index>(used.front()->dim ? used.front()->dim
                                                                : used.front()->members.front()->vector.size());
  if (out_dim == 0 || static_cast<Eigen::Index>(out_dim) > dim) throw Error("LDA output dimension out of range");

  std::size_t total = 0;
  for (const auto* g : used) total += g->size();
  MatrixXd x(static_cast<Eigen::Index>(total), dim);
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // row range per group
  std::vector<ProjectedPoint> points;
  points.reserve(total);
  Eigen::Index row = 0;
  for (const auto* g : used) {
    const auto* mask = find_mask(masks, g->sense_id);
    const auto begin = static_cast<std::size_t>(row);
    for (const auto* m : g->members) {
      for (Eigen::Index d = 0; d < dim; ++d) {
        const bool keep = !mask || mask->bits[static_cast<std::size_t>(d)];
        x(row, d) = keep ? static_cast<double>(m->vector[static_cast<std::size_t>(d)]) : 0.0;
      }
      points.push_back({m->instance_id, g->sense_id, 0.0, 0.0});
      ++row;
    }
    spans.emplace_back(begin, static_cast<std::size_t>(row));
  }

  const VectorXd mean = x.colwise().mean().transpose();
  MatrixXd within = MatrixXd::Zero(dim, dim);
  MatrixXd between = MatrixXd::Zero(dim, dim);
  for (const auto& [b, e] : spans) {
    const auto rows = x.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(e - b));
    const VectorXd class_mean = rows.colwise().mean().transpose();
    const MatrixXd centered = rows.rowwise() - class_mean.transpose();
    within.noalias() += centered.transpose() * centered;
    const VectorXd diff = class_mean - mean;
    between.noalias() += static_cast<double>(e - b) * diff * diff.transpose();
  }
  within.diagonal().array() += ridge;

  Eigen::LLT<MatrixXd> chol(within);
  if (chol.info() != Eigen::Success || !chol.matrixLLT().allFinite() ||
      (chol.matrixLLT().diagonal().array() <= 0.0).any()) {
    throw Error("LDA within-class scatter is singular even after ridge");
  }
  // Whitened between-class scatter C = L^-1 S_B L^-T (symmetric PSD).
  const auto lower = chol.matrixL();
  MatrixXd tmp = lower.solve(between);
  MatrixXd whitened = lower.solve(tmp.transpose());
  whitened = 0.5 * (whitened + whitened.transpose());

  ProjectionOutput out;
  std::vector<VectorXd> found;
  const double scale = std::max(whitened.norm(), 1e-300);
  for (std::size_t k = 0; k < out_dim; ++k) {
    VectorXd u(dim);
    for (Eigen::Index d = 0; d < dim; ++d) u(d) = 1.0 + 0.01 * static_cast<double>(d % 7) + 1e-3 * static_cast<double>(d);
    const auto deflate = [&](VectorXd& v) {
      for (const auto& f : found) v -= f.dot(v) * f;
    };
    deflate(u);
    u.normalize();
    double lambda = 0.0;
    for (int iter = 0; iter < 5000; ++iter) {
      VectorXd next = whitened * u;
      deflate(next);
      const double norm = next.norm();
      if (norm <= 1e-14 * scale) {
        lambda = 0.0;  // remaining spectrum is null; keep the orthogonal start vector
        break;
      }
      next /= norm;
      const double change = std::min((next - u).norm(), (next + u).norm());
      u = next;
      lambda = norm;
      if (change < 1e-12) break;
    }
    found.push_back(u);
    out.eigenvalues.push_back(lambda);
  }

  for (const auto& u : found) {
    VectorXd v = lower.transpose().solve(u);
    v.normalize();
    for (Eigen::Index d = 0; d < dim; ++d) {
      if (std::abs(v(d)) > 1e-12) {
        if (v(d) < 0) v = -v;
        break;
      }
    }
    out.directions.emplace_back(v.data(), v.data() + v.size());
  }

  const MatrixXd centered = x.rowwise() - mean.transpose();
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    points[i].x = centered.row(r).dot(Eigen::Map<const VectorXd>(out.directions[0].data(), dim));
    if (out.directions.size() > 1) {
      points[i].y = centered.row(r).dot(Eigen::Map<const VectorXd>(out.directions[1].data(), dim));
    }
  }
  out.points = std::move(points);
  return out;
}

void write_projection(std::ostream& out, const ProjectionOutput& projection) {
  out << std::setprecision(10);
  for (const auto& p : projection.points) out << p.instance_id << '\t' << p.sense_id << '\t' << p.x << '\t' << p.y << '\n';
  out << std::defaultfloat << std::setprecision(6);
}

DiscardedProbe inspect_discarded(const std::vector<SenseGroup>& groups, const MaskStore& masks, std::size_t top_k) {
  DiscardedProbe probe;
  struct Item {
    const EmbeddingRecord* record;
    std::string sense;
    Vector kept;
    double norm;
  };
  std::vector<Item> items;
  for (const auto& g : groups) {
    const auto it = masks.find(g.sense_id);
    if (it == masks.end()) {
      probe.diagnostics.push_back({g.sense_id, "no mask for sense; skipped"});
      continue;
    }
    const auto discarded = complement(it->second);
    std::size_t zero = 0;
    for (const auto* m : g.members) {
      auto v = apply_mask(m->vector, discarded.bits);
      double n2 = 0.0;
      for (float f : v) n2 += static_cast<double>(f) * f;
      if (n2 == 0.0) {
        ++zero;
        continue;
      }
      items.push_back({m, g.sense_id, std::move(v), std::sqrt(n2)});
    }
    if (zero) {
      probe.diagnostics.push_back(
          {g.sense_id, std::to_string(zero) + " record(s) zero on discarded dims; skipped"});
    }
  }

  const auto worse = [](const DiscardedPair& a, const DiscardedPair& b) { return a.cosine > b.cosine; };
  std::priority_queue<DiscardedPair, std::vector<DiscardedPair>, decltype(worse)> heap(worse);
  double within = 0.0, across = 0.0;
  std::size_t n_within = 0, n_across = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      double dot = 0.0;
      for (std::size_t d = 0; d < items[i].kept.size(); ++d) dot += static_cast<double>(items[i].kept[d]) * items[j].kept[d];
      const double c = dot / (items[i].norm * items[j].norm);
      if (items[i].sense == items[j].sense) {
        within += c;
        ++n_within;
      } else {
        across += c;
        ++n_across;
      }
      if (top_k == 0) continue;
      if (heap.size() < top_k || c > heap.top().cosine) {
        heap.push({items[i].record->instance_id, items[j].record->instance_id, items[i].sense, items[j].sense, c});
        if (heap.size() > top_k) heap.pop();
      }
    }
  }
  probe.pairs = n_within + n_across;
  probe.mean_within = n_within ? within / static_cast<double>(n_within) : 0.0;
  probe.mean_across = n_across ? across / static_cast<double>(n_across) : 0.0;
  while (!heap.empty()) {
    probe.top.push_back(heap.top());
    heap.pop();
  }
  std::reverse(probe.top.begin(), probe.top.end());
  return probe;
}

void write_discarded(std::ostream& out, const DiscardedProbe& probe) {
  out << "rank\tinstance_a\tsense_a\tinstance_b\tsense_b\tsame_sense\tcosine\n";
  out << std::setprecision(8);
  for (std::size_t i = 0; i < probe.top.size(); ++i) {
    const auto& p = probe.top[i];
    out << i + 1 << '\t' << p.instance_a << '\t' << p.sense_a << '\t' << p.instance_b << '\t' << p.sense_b << '\t'
        << (p.same_sense() ? 1 : 0) << '\t' << p.cosine << '\n';
  }
  out << std::defaultfloat << std::setprecision(6);
}

}  // namespace swt
