#include "protoforge/context.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace protoforge::context {

namespace {

std::size_t count_occurrences(std::string_view haystack,
                              std::string_view needle) {
  std::size_t n = 0;
  for (std::size_t pos = haystack.find(needle);
       pos != std::string_view::npos; pos = haystack.find(needle, pos + 1))
    ++n;
  return n;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void check_placeholder(const InstructionTemplate& t,
                       const std::string& origin) {
  std::size_t n = count_occurrences(t.body, kQueryPlaceholder);
  if (n == 0)
    throw MissingPlaceholder(origin + ": no " +
                             std::string(kQueryPlaceholder) + " placeholder");
  if (n > 1)
    throw DuplicatePlaceholder(origin + ": placeholder appears " +
                               std::to_string(n) + " times");
}

}  // namespace

TemplateRegistry TemplateRegistry::load(
    const std::filesystem::path& directory) {
  std::vector<InstructionTemplate> found;
  for (const auto& entry : std::filesystem::directory_iterator(directory)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".prompt")
      continue;
    InstructionTemplate t;
    t.template_id = entry.path().stem().string();
    t.body = read_file(entry.path());
    if (t.body.rfind("# ", 0) == 0) {
      auto eol = t.body.find('\n');
      t.description = t.body.substr(2, eol == std::string::npos
                                           ? std::string::npos
                                           : eol - 2);
    }
    check_placeholder(t, entry.path().filename().string());
    found.push_back(std::move(t));
  }
  if (found.empty())
    throw EmptyDirectory("no *.prompt files in " + directory.string());
  return from_templates(std::move(found));
}

TemplateRegistry TemplateRegistry::from_templates(
    std::vector<InstructionTemplate> templates) {
  TemplateRegistry reg;
  for (auto& t : templates) {
    check_placeholder(t, t.template_id);
    reg.templates_[t.template_id] = std::move(t);
  }
  if (reg.templates_.empty()) throw EmptyDirectory("no templates given");
  return reg;
}

const InstructionTemplate& TemplateRegistry::get(
    const std::string& template_id) const {
  auto it = templates_.find(template_id);
  if (it == templates_.end())
    throw UnknownTemplate("unknown template `" + template_id + "`");
  return it->second;
}

bool TemplateRegistry::contains(const std::string& template_id) const {
  return templates_.count(template_id) > 0;
}

std::vector<std::string> TemplateRegistry::ids() const {
  std::vector<std::string> out;
  for (const auto& [id, t] : templates_) out.push_back(id);
  return out;  // std::map keeps them sorted
}

Context build_context(const std::string& query, const std::string& template_id,
                      const TemplateRegistry& registry) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  if (std::all_of(query.begin(), query.end(), is_space))
    throw EmptyQuery("query is empty after trimming");

  const InstructionTemplate& t = registry.get(template_id);
  std::size_t at = t.body.find(kQueryPlaceholder);
  Context ctx;
  ctx.template_id = template_id;
  ctx.query_digest = content_digest(query);
  // Single-pass substitution: a placeholder inside the query stays verbatim.
  ctx.text = t.body.substr(0, at) + query +
             t.body.substr(at + std::string_view(kQueryPlaceholder).size());
  return ctx;
}

std::string content_digest(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace protoforge::context
