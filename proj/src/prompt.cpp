#include "vale/prompt.hpp"

#include <mutex>
#include <nlohmann/json.hpp>
#include <set>

#include "vale/codec.hpp"
#include "vale/error.hpp"

namespace vale {

using nlohmann::json;

namespace {

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}
bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

void check_template(const PromptTemplate& t) {
  if (t.id.empty()) throw InputError("prompt template id must be non-empty");
  if (t.text.empty()) throw InputError("prompt template '" + t.id + "' has empty text");
}

}  // namespace

PromptBundle render(const PromptTemplate& tmpl, const std::string& label) {
  if (label.empty()) throw InputError("cannot render a prompt for an empty label");
  std::string out;
  std::string_view rest = tmpl.text;
  for (;;) {
    auto pos = rest.find(kLabelPlaceholder);
    if (pos == std::string_view::npos) {
      out += rest;
      break;
    }
    std::string_view before = rest.substr(0, pos);
    std::string_view after = rest.substr(pos + kLabelPlaceholder.size());
    const bool quoted = (ends_with(before, "'") && starts_with(after, "'")) ||
                        (ends_with(before, "‘") && starts_with(after, "’"));
    out += before;
    out += quoted ? label : "'" + label + "'";
    rest = after;
  }
  return {tmpl.id, label, out};
}

const std::vector<PromptTemplate>& PromptRegistry::builtins() {
  static const std::vector<PromptTemplate> kBuiltins{
      {"default-imagenet", "Explain the object in the image: '{predicted label}'?"},
      {"sonar-custom",
       "Describe only the object in the image that represents the '{predicted label}' as acquired through the use of "
       "synthetic aperture sonar, make sure to ignore the background?"},
      {"bare", "Explain?"},
  };
  return kBuiltins;
}

PromptRegistry::PromptRegistry() : templates_(builtins()) {}

PromptRegistry::PromptRegistry(const PromptRegistry& other) {
  std::shared_lock lock(other.mutex_);
  templates_ = other.templates_;
}

PromptRegistry& PromptRegistry::operator=(const PromptRegistry& other) {
  if (this == &other) return *this;
  std::vector<PromptTemplate> copy;
  {
    std::shared_lock lock(other.mutex_);
    copy = other.templates_;
  }
  std::unique_lock lock(mutex_);
  templates_ = std::move(copy);
  return *this;
}

std::vector<PromptTemplate> PromptRegistry::list() const {
  std::shared_lock lock(mutex_);
  return templates_;
}

PromptTemplate PromptRegistry::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  for (const auto& t : templates_)
    if (t.id == id) return t;
  throw InputError("unknown prompt template '" + id + "'");
}

bool PromptRegistry::contains(const std::string& id) const {
  std::shared_lock lock(mutex_);
  for (const auto& t : templates_)
    if (t.id == id) return true;
  return false;
}

void PromptRegistry::add(PromptTemplate tmpl) {
  check_template(tmpl);
  std::unique_lock lock(mutex_);
  for (const auto& t : templates_)
    if (t.id == tmpl.id) throw ConflictError("prompt template '" + tmpl.id + "' already registered");
  templates_.push_back(std::move(tmpl));
}

void PromptRegistry::load_json(const std::string& text) {
  auto incoming = parse_templates(text);
  std::unique_lock lock(mutex_);
  std::set<std::string> ids;
  for (const auto& t : templates_) ids.insert(t.id);
  for (const auto& t : incoming)
    if (!ids.insert(t.id).second) throw ConflictError("prompt template '" + t.id + "' already registered");
  templates_.insert(templates_.end(), incoming.begin(), incoming.end());
}

void PromptRegistry::load_file(const std::filesystem::path& path) {
  auto bytes = read_file(path);
  load_json(std::string(bytes.begin(), bytes.end()));
}

std::string PromptRegistry::user_templates_json() const {
  std::shared_lock lock(mutex_);
  std::vector<PromptTemplate> user(templates_.begin() + static_cast<std::ptrdiff_t>(builtins().size()), templates_.end());
  return templates_to_json(user);
}

std::vector<PromptTemplate> parse_templates(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("template file is not JSON: ") + e.what());
  }
  if (!doc.is_array()) throw InputError("template file must be a JSON list");
  std::vector<PromptTemplate> out;
  for (const auto& e : doc) {
    if (!e.is_object() || !e.contains("id") || !e["id"].is_string() || !e.contains("text") || !e["text"].is_string())
      throw InputError("template entries need string fields id and text");
    PromptTemplate t{e["id"].get<std::string>(), e["text"].get<std::string>()};
    check_template(t);
    out.push_back(std::move(t));
  }
  return out;
}

std::string templates_to_json(const std::vector<PromptTemplate>& templates) {
  json doc = json::array();
  for (const auto& t : templates) doc.push_back({{"id", t.id}, {"text", t.text}});
  return doc.dump(2) + "\n";
}

}  // namespace vale
