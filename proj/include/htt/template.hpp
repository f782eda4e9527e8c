#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "htt/common/error.hpp"
#include "htt/common/text.hpp"

// Placeholder templates in the prompt-asset dialect:
//
//   {{ name }}                 scalar
//   {{ name[2] }}              list element
//   {{ name[n - 1] }}          last list element
//   {{ name[0] | filter }}     element passed through a named filter
//
// A list is spread over lines by writing the first-element line, a line
// holding only "…", and the last-element line. Inline, "{{ a[0] }}, …, {{ a[n - 1] }}"
// joins every element with the separator that surrounds the ellipsis.
namespace htt {

inline constexpr std::string_view kEllipsis = "\xE2\x80\xA6";

struct TemplateContext {
  using Filter = std::function<std::string(const std::string& value, std::size_t index)>;

  std::map<std::string, std::string> scalars;
  std::map<std::string, std::vector<std::string>> lists;
  std::map<std::string, Filter> filters;

  TemplateContext& set(const std::string& k, std::string v) {
    scalars[k] = std::move(v);
    return *this;
  }
  TemplateContext& set_list(const std::string& k, std::vector<std::string> v) {
    lists[k] = std::move(v);
    return *this;
  }
};

namespace detail {

struct Placeholder {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past "}}"
  std::string name;
  std::optional<std::string> index;
  std::string filter;
};

inline std::vector<Placeholder> scan_placeholders(std::string_view line) {
  std::vector<Placeholder> out;
  std::size_t pos = 0;
  while ((pos = line.find("{{", pos)) != std::string_view::npos) {
    const auto close = line.find("}}", pos + 2);
    if (close == std::string_view::npos) throw TemplateError("unterminated placeholder in: " + std::string(line));
    Placeholder ph;
    ph.begin = pos;
    ph.end = close + 2;
    std::string body(text::trim(line.substr(pos + 2, close - pos - 2)));
    if (const auto bar = body.find('|'); bar != std::string::npos) {
      ph.filter = std::string(text::trim(std::string_view(body).substr(bar + 1)));
      body = std::string(text::trim(std::string_view(body).substr(0, bar)));
    }
    if (const auto lb = body.find('['); lb != std::string::npos) {
      if (body.back() != ']') throw TemplateError("malformed index in placeholder: " + body);
      ph.index = std::string(text::trim(std::string_view(body).substr(lb + 1, body.size() - lb - 2)));
      body = std::string(text::trim(std::string_view(body).substr(0, lb)));
    }
    if (body.empty()) throw TemplateError("empty placeholder name");
    ph.name = body;
    out.push_back(std::move(ph));
    pos = ph.end;
  }
  return out;
}

inline const std::vector<std::string>& list_of(const TemplateContext& ctx, const std::string& name) {
  auto it = ctx.lists.find(name);
  if (it == ctx.lists.end()) throw TemplateError("missing list value: " + name);
  return it->second;
}

inline std::string apply_filter(const TemplateContext& ctx, const Placeholder& ph, std::string v, std::size_t idx) {
  if (ph.filter.empty()) return v;
  auto it = ctx.filters.find(ph.filter);
  if (it == ctx.filters.end()) throw TemplateError("unknown filter: " + ph.filter);
  return it->second(v, idx);
}

inline std::string resolve(const TemplateContext& ctx, const Placeholder& ph, std::optional<std::size_t> iter) {
  if (!ph.index) {
    auto it = ctx.scalars.find(ph.name);
    if (it == ctx.scalars.end()) throw TemplateError("missing value: " + ph.name);
    return apply_filter(ctx, ph, it->second, 0);
  }
  const auto& list = list_of(ctx, ph.name);
  std::size_t idx = 0;
  if (iter) {
    idx = *iter;
  } else if (*ph.index == "n - 1" || *ph.index == "n-1") {
    if (list.empty()) throw TemplateError("empty list: " + ph.name);
    idx = list.size() - 1;
  } else {
    try {
      idx = std::stoul(*ph.index);
    } catch (const std::exception&) {
      throw TemplateError("bad index '" + *ph.index + "' for " + ph.name);
    }
  }
  if (idx >= list.size()) {
    throw TemplateError("index " + std::to_string(idx) + " out of range for " + ph.name);
  }
  return apply_filter(ctx, ph, list[idx], idx);
}

inline std::string render_plain(std::string_view line, const TemplateContext& ctx, std::optional<std::size_t> iter) {
  std::string out;
  std::size_t last = 0;
  for (const auto& ph : scan_placeholders(line)) {
    out.append(line.substr(last, ph.begin - last));
    out += resolve(ctx, ph, iter);
    last = ph.end;
  }
  out.append(line.substr(last));
  return out;
}

// Expands "{{ a[0] }}SEP…SEP{{ a[n - 1] }}" inside one line.
inline std::string expand_inline(std::string_view line, const TemplateContext& ctx) {
  std::string out;
  std::size_t cursor = 0;
  const auto phs = scan_placeholders(line);
  for (std::size_t i = 0; i + 1 < phs.size(); ++i) {
    const auto& a = phs[i];
    const auto& b = phs[i + 1];
    if (!a.index || *a.index != "0" || !b.index || b.name != a.name) continue;
    const std::string_view between = line.substr(a.end, b.begin - a.end);
    const auto e = between.find(kEllipsis);
    if (e == std::string_view::npos) continue;
    const std::string_view sep = between.substr(0, e);
    if (between.substr(e + kEllipsis.size()) != sep) continue;
    const auto& list = list_of(ctx, a.name);
    out.append(line.substr(cursor, a.begin - cursor));
    for (std::size_t k = 0; k < list.size(); ++k) {
      if (k) out.append(sep);
      out += apply_filter(ctx, a, list[k], k);
    }
    cursor = b.end;
    ++i;
  }
  out.append(line.substr(cursor));
  return out;
}

inline bool is_range_start(std::string_view line) {
  for (const auto& ph : scan_placeholders(line)) {
    if (ph.index && *ph.index == "0") return true;
  }
  return false;
}

}  // namespace detail

class Template {
 public:
  Template() = default;
  explicit Template(std::string source) : source_(std::move(source)) {}

  static Template from_file(const std::string& path) { return Template(text::read_file(path)); }

  const std::string& source() const { return source_; }

  std::string render(const TemplateContext& ctx) const {
    const auto ls = text::lines(source_);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      const bool range = i + 2 < ls.size() && text::trim(ls[i + 1]) == kEllipsis && detail::is_range_start(ls[i]);
      if (!range) {
        out.push_back(detail::render_plain(detail::expand_inline(ls[i], ctx), ctx, std::nullopt));
        continue;
      }
      std::optional<std::size_t> n;
      for (const auto& ph : detail::scan_placeholders(ls[i])) {
        if (!ph.index) continue;
        const auto sz = detail::list_of(ctx, ph.name).size();
        if (n && *n != sz) throw TemplateError("lists spread over one range differ in length: " + ph.name);
        n = sz;
      }
      for (std::size_t k = 0; k < n.value_or(0); ++k) out.push_back(detail::render_plain(ls[i], ctx, k));
      i += 2;
    }
    return text::join(out, "\n");
  }

 private:
  std::string source_;
};

}  // namespace htt
