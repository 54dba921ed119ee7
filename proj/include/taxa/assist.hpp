#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "taxa/session.hpp"

namespace taxa {

using Vector = std::vector<double>;

/// uuid -> fixed-dimension real vector, in insertion order.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;

  /// Throws DimMismatch, DuplicateImage, or FormatError (empty / non-finite).
  void add(std::string uuid, Vector vec);

  const Vector* find(const std::string& uuid) const;
  /// Throws MissingEmbedding.
  const Vector& at(const std::string& uuid) const;
  bool contains(const std::string& uuid) const { return index_.count(uuid) != 0; }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return ids_.size(); }
  const std::vector<std::string>& ids() const noexcept { return ids_; }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> ids_;
  std::vector<Vector> vectors_;
  std::map<std::string, std::size_t> index_;
};

/// uuid -> raw caption text, in insertion order.
struct CaptionTable {
  std::vector<std::string> ids;
  std::map<std::string, std::string> text;

  const std::string* find(const std::string& uuid) const {
    auto it = text.find(uuid);
    return it == text.end() ? nullptr : &it->second;
  }
};

/// Cosine similarity. A zero vector on either side scores 0.
/// Throws DimMismatch.
double cosine(std::span<const double> u, std::span<const double> v);
double squared_distance(std::span<const double> u, std::span<const double> v);

// ---- clustering ------------------------------------------------------------

struct KMeansOptions {
  std::size_t max_iterations = 100;
  std::size_t restarts = 10;
};

struct KMeansResult {
  std::vector<std::vector<std::string>> clusters;  // cluster index order, members sorted
  std::vector<Vector> centroids;
  std::vector<double> objective_trace;             // of the selected restart
  double objective = 0;
  std::size_t iterations = 0;
};

/// Lloyd's algorithm with k-means++ seeding from a seeded mt19937_64.
/// Points are processed in uuid order so the result depends only on the
/// point set, k and the seed. Every cluster is non-empty.
/// Throws TooManyClusters when k exceeds the number of points.
KMeansResult kmeans(const std::map<std::string, Vector>& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// floor(sqrt(n)), at least 1.
std::size_t cluster_count_for(std::size_t n);

struct ClusterPart {
  std::string name;
  std::vector<std::string> members;
  std::string representative;
  std::string caption;
};

struct ClusterPartition {
  std::vector<ClusterPart> parts;
};

/// Cluster the images labeled at leaf `path` into floor(sqrt(n)) parts
/// named cluster-0..cluster-(k-1). The representative is the member nearest
/// its centroid (ties: smallest uuid); its caption is postprocessed.
ClusterPartition cluster_taxon(const CoderSession& session, const TaxonPath& path, const EmbeddingTable& embeddings,
                               const CaptionTable& captions, std::uint64_t seed);

/// The apply_partition operator that commits `partition` at `path`.
op::ApplyPartition to_partition_op(const ClusterPartition& partition, const TaxonPath& path);

/// Trim whitespace and one leading filler phrase ("it is a ", "the ", ...);
/// empty results become "unknown".
std::string postprocess_caption(std::string_view text);

// ---- fallback embedding ----------------------------------------------------

struct Raster {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel
};

inline constexpr std::size_t kFallbackDim = 128;

/// 64-bin RGB histogram plus an 8x8 mean-luma grid, L2-normalised.
Vector fallback_embed(const Raster& image);

/// Decode PPM/PGM, PNG or JPEG. Throws DecodeError or IoError.
Raster decode_image_file(const std::filesystem::path& file);
Raster decode_image(std::span<const std::uint8_t> bytes);

}  // namespace taxa
