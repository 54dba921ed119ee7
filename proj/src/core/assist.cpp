#include "taxa/assist.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>

#include "taxa/error.hpp"

namespace taxa {

// ---- embeddings ------------------------------------------------------------

void EmbeddingTable::add(std::string uuid, Vector vec) {
  if (vec.empty()) throw Error(ErrorCode::FormatError, "embedding for '" + uuid + "' is empty", {uuid});
  if (dim_ != 0 && vec.size() != dim_)
    throw Error(ErrorCode::DimMismatch,
                "embedding for '" + uuid + "' has dimension " + std::to_string(vec.size()) + ", expected " +
                    std::to_string(dim_),
                {uuid});
  if (std::any_of(vec.begin(), vec.end(), [](double x) { return !std::isfinite(x); }))
    throw Error(ErrorCode::FormatError, "embedding for '" + uuid + "' has a non-finite component", {uuid});
  if (index_.count(uuid)) throw Error(ErrorCode::DuplicateImage, "duplicate embedding for '" + uuid + "'", {uuid});
  dim_ = vec.size();
  index_.emplace(uuid, ids_.size());
  ids_.push_back(std::move(uuid));
  vectors_.push_back(std::move(vec));
}

const Vector* EmbeddingTable::find(const std::string& uuid) const {
  auto it = index_.find(uuid);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

const Vector& EmbeddingTable::at(const std::string& uuid) const {
  const auto* v = find(uuid);
  if (!v) throw Error(ErrorCode::MissingEmbedding, "no embedding for '" + uuid + "'", {uuid});
  return *v;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw Error(ErrorCode::DimMismatch,
                "vector dimensions differ: " + std::to_string(u.size()) + " vs " + std::to_string(v.size()));
  double dot = 0, nu = 0, nv = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0 || nv == 0) return 0;
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double squared_distance(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw Error(ErrorCode::DimMismatch, "vector dimensions differ");
  double s = 0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = u[i] - v[i];
    s += d * d;
  }
  return s;
}

// ---- k-means ---------------------------------------------------------------

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

struct Run {
  std::vector<std::size_t> assign;
  std::vector<Vector> centers;
  std::vector<double> trace;
  double objective = 0;
  std::size_t iterations = 0;
};

class Lloyd {
 public:
  Lloyd(const std::vector<const Vector*>& pts, std::size_t k, std::size_t max_iter)
      : pts_(pts), k_(k), max_iter_(max_iter), dim_(pts.front()->size()) {}

  Run run(std::mt19937_64& rng) const {
    Run r;
    r.centers = seed_plus_plus(rng);
    r.assign = nearest(r.centers);
    fix_empty(r.assign, r.centers);
    bool converged = false;
    for (std::size_t it = 0; it < max_iter_ && !converged; ++it) {
      r.iterations = it + 1;
      r.centers = means(r.assign);
      r.trace.push_back(objective(r.assign, r.centers));
      auto next = nearest(r.centers);
      fix_empty(next, r.centers);
      r.trace.push_back(objective(next, r.centers));
      converged = next == r.assign;
      r.assign = std::move(next);
    }
    r.centers = means(r.assign);
    r.objective = objective(r.assign, r.centers);
    r.trace.push_back(r.objective);
    return r;
  }

 private:
  std::vector<Vector> seed_plus_plus(std::mt19937_64& rng) const {
    const std::size_t n = pts_.size();
    std::vector<Vector> centers;
    std::vector<bool> chosen(n, false);
    std::size_t first = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n));
    first = std::min(first, n - 1);
    centers.push_back(*pts_[first]);
    chosen[first] = true;

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = squared_distance(*pts_[i], centers[0]);
    while (centers.size() < k_) {
      double total = 0;
      for (double d : d2) total += d;
      std::size_t pick = n;
      if (total > 0) {
        const double r = uniform01(rng) * total;
        double acc = 0;
        for (std::size_t i = 0; i < n; ++i) {
          acc += d2[i];
          if (d2[i] > 0 && acc > r) {
            pick = i;
            break;
          }
        }
        if (pick == n) {  // rounding left r at the very top
          for (std::size_t i = n; i-- > 0;)
            if (d2[i] > 0) {
              pick = i;
              break;
            }
        }
      } else {
        for (std::size_t i = 0; i < n; ++i)
          if (!chosen[i]) {
            pick = i;
            break;
          }
      }
      chosen[pick] = true;
      centers.push_back(*pts_[pick]);
      for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], squared_distance(*pts_[i], centers.back()));
    }
    return centers;
  }

  std::vector<std::size_t> nearest(const std::vector<Vector>& centers) const {
    std::vector<std::size_t> assign(pts_.size());
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < centers.size(); ++c) {
        const double d = squared_distance(*pts_[i], centers[c]);
        if (d < best) {
          best = d;
          assign[i] = c;
        }
      }
    }
    return assign;
  }

  // Give each empty cluster the point farthest from its current center,
  // taken from a cluster that can spare it. Never increases the objective.
  void fix_empty(std::vector<std::size_t>& assign, std::vector<Vector>& centers) const {
    while (true) {
      std::vector<std::size_t> sizes(k_, 0);
      for (auto a : assign) ++sizes[a];
      auto empty = std::find(sizes.begin(), sizes.end(), 0u);
      if (empty == sizes.end()) return;
      std::size_t donor = pts_.size();
      double far = -1;
      for (std::size_t i = 0; i < pts_.size(); ++i) {
        if (sizes[assign[i]] < 2) continue;
        const double d = squared_distance(*pts_[i], centers[assign[i]]);
        if (d > far) {
          far = d;
          donor = i;
        }
      }
      const auto target = static_cast<std::size_t>(empty - sizes.begin());
      assign[donor] = target;
      centers[target] = *pts_[donor];
    }
  }

  std::vector<Vector> means(const std::vector<std::size_t>& assign) const {
    std::vector<Vector> sums(k_, Vector(dim_, 0.0));
    std::vector<std::size_t> counts(k_, 0);
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      auto& s = sums[assign[i]];
      for (std::size_t d = 0; d < dim_; ++d) s[d] += (*pts_[i])[d];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k_; ++c)
      for (auto& x : sums[c]) x /= static_cast<double>(counts[c]);
    return sums;
  }

  double objective(const std::vector<std::size_t>& assign, const std::vector<Vector>& centers) const {
    double s = 0;
    for (std::size_t i = 0; i < pts_.size(); ++i) s += squared_distance(*pts_[i], centers[assign[i]]);
    return s;
  }

  const std::vector<const Vector*>& pts_;
  std::size_t k_;
  std::size_t max_iter_;
  std::size_t dim_;
};

}  // namespace

KMeansResult kmeans(const std::map<std::string, Vector>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (k == 0) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (k > points.size())
    throw Error(ErrorCode::TooManyClusters,
                "cannot form " + std::to_string(k) + " clusters from " + std::to_string(points.size()) + " points");
  std::vector<std::string> ids;
  std::vector<const Vector*> pts;
  for (const auto& [uuid, v] : points) {
    if (!pts.empty() && v.size() != pts.front()->size())
      throw Error(ErrorCode::DimMismatch, "points have different dimensions", {uuid});
    ids.push_back(uuid);
    pts.push_back(&v);
  }

  std::mt19937_64 rng(seed);
  Lloyd lloyd(pts, k, std::max<std::size_t>(options.max_iterations, 1));
  Run best;
  const std::size_t restarts = std::max<std::size_t>(options.restarts, 1);
  for (std::size_t r = 0; r < restarts; ++r) {
    auto run = lloyd.run(rng);
    if (r == 0 || run.objective < best.objective) best = std::move(run);
  }

  KMeansResult out;
  out.clusters.resize(k);
  for (std::size_t i = 0; i < ids.size(); ++i) out.clusters[best.assign[i]].push_back(ids[i]);
  out.centroids = std::move(best.centers);
  out.objective_trace = std::move(best.trace);
  out.objective = best.objective;
  out.iterations = best.iterations;
  return out;
}

std::size_t cluster_count_for(std::size_t n) {
  if (n <= 1) return 1;
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

ClusterPartition cluster_taxon(const CoderSession& session, const TaxonPath& path, const EmbeddingTable& embeddings,
                               const CaptionTable& captions, std::uint64_t seed) {
  const auto* node = session.tree().find(path);
  if (path.is_root() || !node) throw Error(ErrorCode::NoSuchTaxon, "no taxon at '" + path.joined() + "'", {path.joined()});
  if (!node->is_leaf()) throw Error(ErrorCode::NotALeaf, "only a leaf can be divided", {path.joined()});
  const auto members = session.images_at(path);
  if (members.empty()) throw Error(ErrorCode::NotEnoughData, "'" + path.joined() + "' holds no images");

  std::vector<std::string> missing;
  std::map<std::string, Vector> points;
  for (const auto& uuid : members) {
    if (const auto* v = embeddings.find(uuid))
      points.emplace(uuid, *v);
    else
      missing.push_back(uuid);
  }
  if (!missing.empty())
    throw Error(ErrorCode::MissingEmbedding, std::to_string(missing.size()) + " image(s) have no embedding",
                std::move(missing));

  const auto k = cluster_count_for(points.size());
  auto km = kmeans(points, k, seed);

  ClusterPartition out;
  for (std::size_t c = 0; c < k; ++c) {
    ClusterPart part;
    part.name = "cluster-" + std::to_string(c);
    part.members = km.clusters[c];
    double best = std::numeric_limits<double>::infinity();
    for (const auto& uuid : part.members) {  // sorted, so strict < keeps the smallest uuid on ties
      const double d = squared_distance(points.at(uuid), km.centroids[c]);
      if (d < best) {
        best = d;
        part.representative = uuid;
      }
    }
    const auto* raw = captions.find(part.representative);
    part.caption = postprocess_caption(raw ? std::string_view(*raw) : std::string_view());
    out.parts.push_back(std::move(part));
  }
  return out;
}

op::ApplyPartition to_partition_op(const ClusterPartition& partition, const TaxonPath& path) {
  op::ApplyPartition o;
  o.path = path;
  o.origin = NodeOrigin::MachineCluster;
  for (const auto& p : partition.parts) o.parts.push_back(op::PartitionPart{p.name, p.members});
  return o;
}

// ---- captions --------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, 9> kFillerPrefixes = {
    "it is a ", "it is an ", "it's a ", "it's an ", "this is a ", "this is an ", "a ", "an ", "the "};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_with_nocase(std::string_view s, std::string_view prefix) {
  if (s.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (std::tolower(static_cast<unsigned char>(s[i])) != prefix[i]) return false;
  return true;
}

}  // namespace

std::string postprocess_caption(std::string_view text) {
  auto s = trim(text);
  for (auto prefix : kFillerPrefixes) {
    if (starts_with_nocase(s, prefix)) {
      s = trim(s.substr(prefix.size()));
      break;
    }
  }
  return s.empty() ? std::string("unknown") : std::string(s);
}

// ---- fallback embedding ----------------------------------------------------

Vector fallback_embed(const Raster& image) {
  const std::size_t w = image.width, h = image.height;
  if (w == 0 || h == 0) throw Error(ErrorCode::DecodeError, "image has no pixels");
  if (image.rgb.size() != w * h * 3) throw Error(ErrorCode::DecodeError, "raster size does not match dimensions");

  Vector out(kFallbackDim, 0.0);
  const double pixels = static_cast<double>(w * h);

  // (a) 4x4x4 histogram, each channel split into four equal ranges
  for (std::size_t i = 0; i < w * h; ++i) {
    const auto r = image.rgb[3 * i] >> 6, g = image.rgb[3 * i + 1] >> 6, b = image.rgb[3 * i + 2] >> 6;
    out[static_cast<std::size_t>(r * 16 + g * 4 + b)] += 1.0;
  }
  for (std::size_t i = 0; i < 64; ++i) out[i] /= pixels;

  // (b) 8x8 grid of mean luma; each cell is the area-weighted mean over the
  // pixels it overlaps, so images smaller than 8x8 still fill every cell
  std::vector<double> luma(w * h);
  for (std::size_t i = 0; i < w * h; ++i) {
    const int num = 299 * image.rgb[3 * i] + 587 * image.rgb[3 * i + 1] + 114 * image.rgb[3 * i + 2];
    luma[i] = static_cast<double>(num) / (1000.0 * 255.0);
  }
  auto overlap = [](double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); };
  for (std::size_t gy = 0; gy < 8; ++gy) {
    const double y0 = static_cast<double>(gy) * static_cast<double>(h) / 8.0;
    const double y1 = static_cast<double>(gy + 1) * static_cast<double>(h) / 8.0;
    for (std::size_t gx = 0; gx < 8; ++gx) {
      const double x0 = static_cast<double>(gx) * static_cast<double>(w) / 8.0;
      const double x1 = static_cast<double>(gx + 1) * static_cast<double>(w) / 8.0;
      double sum = 0, area = 0;
      for (auto y = static_cast<std::size_t>(y0); y < h && static_cast<double>(y) < y1; ++y) {
        const double wy = overlap(y0, y1, static_cast<double>(y), static_cast<double>(y + 1));
        for (auto x = static_cast<std::size_t>(x0); x < w && static_cast<double>(x) < x1; ++x) {
          const double wx = overlap(x0, x1, static_cast<double>(x), static_cast<double>(x + 1));
          sum += wx * wy * luma[y * w + x];
          area += wx * wy;
        }
      }
      out[64 + gy * 8 + gx] = area > 0 ? sum / area : 0.0;
    }
  }

  double norm = 0;
  for (double x : out) norm += x * x;
  if (norm > 0) {
    norm = std::sqrt(norm);
    for (double& x : out) x /= norm;
  }
  return out;
}

}  // namespace taxa
