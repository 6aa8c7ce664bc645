#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace hic {

struct ClassProfile {
  std::string class_id;
  std::string task_model_id;
  std::set<std::string> rights;  // BIP method ids and capabilities like "flight.update"

  friend bool operator==(const ClassProfile&, const ClassProfile&) = default;
};

struct UserProfile {
  std::string user_id;
  std::string class_id;
  std::map<std::string, std::string> preferences;
  std::map<std::string, std::string> aliases;  // personal name -> canonical name

  friend bool operator==(const UserProfile&, const UserProfile&) = default;
};

enum class Decision { kAllow, kDeny };

// Classes, users and the class -> task-model binding. Reads run in parallel;
// each mutation replaces whole records under an exclusive lock.
class ProfileStore {
 public:
  // Returns true when a task model id is loaded. An empty predicate accepts
  // every id.
  using ModelResolver = std::function<bool(const std::string&)>;

  explicit ProfileStore(ModelResolver resolver = {});

  // Keyed upsert of {"classes": [...], "users": [...]}; returns the number of
  // records read. Validates the whole document before touching the store.
  // Throws ParseError(kParseError) for unknown classes, unresolved task
  // models, alias chains and schema violations.
  std::size_t load_json(const nlohmann::json& doc);
  std::size_t load_text(std::string_view text);
  std::size_t load_file(const std::filesystem::path& path);

  // Throws Error(kUnknownUser).
  Decision check_right(const std::string& user_id, const std::string& permission) const;
  UserProfile get_user(const std::string& user_id) const;
  std::optional<ClassProfile> find_class(const std::string& class_id) const;
  ClassProfile class_of(const std::string& user_id) const;
  bool has_user(const std::string& user_id) const;

  // Alias target when `name` is aliased, else `name`.
  std::string resolve_alias(const std::string& user_id, const std::string& name) const;
  // The user's personal name for a canonical name (the smallest alias when
  // several map to it), else `canonical`.
  std::string personal_name(const std::string& user_id, const std::string& canonical) const;
  // Throws Error(kAliasChain) when the target is itself an alias or the alias
  // is already the target of another alias.
  void set_alias(const std::string& user_id, const std::string& alias,
                 const std::string& canonical);
  void set_preference(const std::string& user_id, const std::string& key,
                      const std::string& value);

  std::vector<ClassProfile> classes() const;
  std::vector<UserProfile> users() const;

 private:
  const UserProfile& user_locked(const std::string& user_id) const;

  ModelResolver resolver_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, ClassProfile> classes_;
  std::map<std::string, UserProfile> users_;
};

nlohmann::json user_to_json(const UserProfile& user);

}  // namespace hic
