#pragma once

#include <filesystem>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace vale {

inline constexpr std::string_view kLabelPlaceholder = "{predicted label}";

struct PromptTemplate {
  std::string id;
  std::string text;
  friend bool operator==(const PromptTemplate&, const PromptTemplate&) = default;
};

struct PromptBundle {
  std::string templateId;
  std::string label;
  std::string rendered;
};

/// Replaces every placeholder with the label in single quotes. A placeholder
/// the template already quotes ('...' or the typographic pair) keeps those
/// quotes instead of gaining a second pair. Throws InputError on an empty label.
PromptBundle render(const PromptTemplate& tmpl, const std::string& label);

/// Named templates: the built-ins followed by user-loaded ones, in load order.
/// Safe for concurrent readers; loading takes an exclusive lock.
class PromptRegistry {
 public:
  PromptRegistry();
  PromptRegistry(const PromptRegistry& other);
  PromptRegistry& operator=(const PromptRegistry& other);

  std::vector<PromptTemplate> list() const;
  /// Throws InputError for an unknown id.
  PromptTemplate get(const std::string& id) const;
  bool contains(const std::string& id) const;

  /// Throws ConflictError on a duplicate id, InputError on empty id/text.
  void add(PromptTemplate tmpl);
  /// Loads a JSON list of {"id","text"}; all-or-nothing.
  void load_json(const std::string& text);
  void load_file(const std::filesystem::path& path);
  /// Serializes the user-loaded templates (not the built-ins).
  std::string user_templates_json() const;

  static const std::vector<PromptTemplate>& builtins();

 private:
  mutable std::shared_mutex mutex_;
  std::vector<PromptTemplate> templates_;
};

std::vector<PromptTemplate> parse_templates(const std::string& text);
std::string templates_to_json(const std::vector<PromptTemplate>& templates);

}  // namespace vale
