#pragma once

#include <string>

#include "taxa/compare.hpp"

namespace taxa {

/// Fixed-width text table of a metrics report, three decimals per value.
/// Node IoU is omitted when absent; a depth cut is shown in the header.
std::string render_report(const MetricsReport& report);

/// Indented text rendering of a union merge: one line per node with its
/// creators (when not created by every coder) and partial-assignment counts.
std::string render_union_tree(const AnnotatedMergedTree& merged);

}  // namespace taxa
