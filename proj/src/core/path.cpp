#include "taxa/path.hpp"

#include <algorithm>

namespace taxa {

TaxonPath TaxonPath::child(std::string name) const {
  TaxonPath out = *this;
  out.segments.push_back(std::move(name));
  return out;
}

TaxonPath TaxonPath::parent() const {
  TaxonPath out = *this;
  if (!out.segments.empty()) out.segments.pop_back();
  return out;
}

TaxonPath TaxonPath::prefix(std::size_t n) const {
  n = std::min(n, segments.size());
  return TaxonPath(std::vector<std::string>(segments.begin(), segments.begin() + static_cast<long>(n)));
}

bool TaxonPath::is_prefix_of(const TaxonPath& other) const noexcept {
  if (segments.size() > other.segments.size()) return false;
  return std::equal(segments.begin(), segments.end(), other.segments.begin());
}

TaxonPath TaxonPath::rebased(const TaxonPath& from, const TaxonPath& to) const {
  TaxonPath out = to;
  out.segments.insert(out.segments.end(), segments.begin() + static_cast<long>(from.segments.size()),
                      segments.end());
  return out;
}

std::string TaxonPath::joined() const {
  std::string out;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) out += '/';
    out += segments[i];
  }
  return out;
}

TaxonPath TaxonPath::parse(std::string_view joined) {
  TaxonPath out;
  if (joined.empty()) return out;
  std::size_t start = 0;
  while (true) {
    auto pos = joined.find('/', start);
    out.segments.emplace_back(joined.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace taxa
