#include "taxa/report.hpp"

#include <cstdio>
#include <functional>

namespace taxa {

namespace {

std::string fixed3(const Rational& r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", to_double(r));
  return buf;
}

std::string row(std::string_view label, std::string_view value) {
  std::string out(label);
  out.resize(std::max<std::size_t>(out.size() + 1, 10), ' ');
  out += value;
  out += '\n';
  return out;
}

}  // namespace

std::string render_report(const MetricsReport& report) {
  std::string out = row("Metric", "Value");
  if (report.depth) {
    out.pop_back();
    out += "  (D=" + std::to_string(*report.depth) + ")\n";
  }
  out += row("Match", fixed3(report.exact_match));
  out += row("Jaccard", fixed3(report.jaccard));
  if (report.node_iou) out += row("Node IoU", fixed3(*report.node_iou));
  out += row("Images", std::to_string(report.n_images));
  return out;
}

std::string render_union_tree(const AnnotatedMergedTree& merged) {
  std::string out = "coders:";
  for (const auto& c : merged.coders) out += " " + c;
  out += "\n";
  for (const auto& w : merged.warnings) out += "warning: " + w + "\n";
  out += "root\n";

  std::function<void(const TaxonNode&, const TaxonPath&, int)> walk = [&](const TaxonNode& node, const TaxonPath& path,
                                                                          int depth) {
    for (const auto& c : node.children) {
      const auto child = path.child(c.name);
      const auto& ann = merged.nodes.at(child);
      std::string line(static_cast<std::size_t>(2 * depth), ' ');
      line += c.name;
      if (!ann.created_by_all(merged.coders.size())) {
        line += "  [";
        for (std::size_t i = 0; i < ann.creators.size(); ++i) line += (i ? ", " : "") + ann.creators[i];
        line += "]";
      }
      const auto total = ann.consensus_count + ann.partial_count;
      if (ann.partial_count > 0)
        line += "  partial " + std::to_string(ann.partial_count) + "/" + std::to_string(total);
      else if (total > 0)
        line += "  " + std::to_string(total);
      out += line + "\n";
      walk(c, child, depth + 1);
    }
  };
  walk(merged.tree.root(), TaxonPath{}, 1);
  return out;
}

}  // namespace taxa
