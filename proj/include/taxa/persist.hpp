#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "taxa/assist.hpp"
#include "taxa/compare.hpp"
#include "taxa/predict.hpp"
#include "taxa/session.hpp"

// File formats. Every JSON document is written canonically: keys sorted,
// two-space indentation, UTF-8, "\n" line endings and a trailing newline.
// Tables are JSON Lines, one record per image.

namespace taxa {

using Json = nlohmann::json;

inline constexpr int kFormatVersion = 1;

/// Canonical text of a JSON document.
std::string dump_canonical(const Json& doc);

std::string read_file(const std::filesystem::path& file);
/// Write to a temporary sibling, then rename over `file`.
void write_file_atomic(const std::filesystem::path& file, std::string_view bytes);

// ---- building blocks -------------------------------------------------------

Json path_to_json(const TaxonPath& path);
TaxonPath path_from_json(const Json& j);
Json tree_to_json(const TaxonomyTree& tree);
TaxonomyTree tree_from_json(const Json& j);
Json operation_to_json(const Operation& operation);
/// Accepts {"op": <kind>, ...arguments}. Throws FormatError.
Operation operation_from_json(const Json& j);

// ---- sessions --------------------------------------------------------------

Json session_to_json(const CoderSession& session);
CoderSession session_from_json(const Json& doc);
std::string save_session(const CoderSession& session);
/// Throws FormatError on malformed input, unsupported versions, or stored
/// state that breaks a session invariant.
CoderSession load_session(std::string_view bytes);
void save_session_file(const CoderSession& session, const std::filesystem::path& file);
CoderSession load_session_file(const std::filesystem::path& file);

// ---- corpus metadata -------------------------------------------------------

/// Leading four digits of a date-like string, if present.
std::optional<int> parse_publish_year(std::string_view text);

/// JSON array of records, each with a "uuid". "displayName" and "publishDate"
/// fill the typed fields; every other field is kept in source_fields.
/// Throws FormatError or DuplicateImage.
std::vector<ImageRecord> load_dataset(std::string_view bytes);
std::vector<ImageRecord> load_dataset_file(const std::filesystem::path& file);
ImageCatalog make_catalog(const std::vector<ImageRecord>& records);

// ---- tables (JSON Lines) ---------------------------------------------------

enum class TableKind { Embeddings, Captions, Probabilities };

/// {"uuid", "vector"} per line. Throws DimMismatch, DuplicateImage, FormatError.
EmbeddingTable load_embeddings(std::string_view bytes);
/// {"uuid", "caption"} per line. Empty captions are kept as-is.
CaptionTable load_captions(std::string_view bytes);
/// {"uuid", "probs": {"a/b": p}} per line, p in [0,1].
std::vector<ProbabilityRow> load_probabilities(std::string_view bytes);

EmbeddingTable load_embeddings_file(const std::filesystem::path& file);
CaptionTable load_captions_file(const std::filesystem::path& file);
std::vector<ProbabilityRow> load_probabilities_file(const std::filesystem::path& file);

std::string save_embeddings(const EmbeddingTable& table);

// ---- batch sampling --------------------------------------------------------

struct BatchPlan {
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  std::vector<std::vector<std::string>> batches;
};

/// Fisher-Yates shuffle (seeded mt19937_64) of the uuids sorted ascending,
/// then consecutive slices. Throws NotEnoughImages.
BatchPlan sample_batches(std::vector<std::string> uuids, std::size_t batch_size, std::size_t n_batches,
                         std::uint64_t seed);
Json batch_plan_to_json(const BatchPlan& plan);

// ---- results ---------------------------------------------------------------

Json labeling_to_json(const Labeling& labels, const std::vector<std::string>& order = {});
/// Reads a labeling document, a session file, or a merged document.
Labeling labeling_from_json(const Json& doc);
Labeling load_labeling_file(const std::filesystem::path& file);

Json rational_to_json(const Rational& r);
Json report_to_json(const MetricsReport& report);
Json majority_to_json(const MajorityMerge& merged);
Json union_to_json(const AnnotatedMergedTree& merged);
Json partition_to_json(const ClusterPartition& partition);
ClusterPartition partition_from_json(const Json& j);

}  // namespace taxa
