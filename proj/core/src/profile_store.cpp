#include "hic/profile_store.hpp"

#include <fstream>
#include <mutex>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hic/error.hpp"

namespace hic {
namespace {

[[noreturn]] void bad(const std::string& reason) {
  throw ParseError(Errc::kParseError, 0, reason);
}

const nlohmann::json& field(const nlohmann::json& obj, const char* key,
                            const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) bad(where + ": missing '" + key + "'");
  return obj.at(key);
}

std::string string_field(const nlohmann::json& obj, const char* key,
                         const std::string& where) {
  const auto& v = field(obj, key, where);
  if (!v.is_string() || v.get_ref<const std::string&>().empty()) {
    bad(where + ": '" + key + "' must be a non-empty string");
  }
  return v.get<std::string>();
}

std::map<std::string, std::string> string_map(const nlohmann::json& obj,
                                              const char* key,
                                              const std::string& where) {
  std::map<std::string, std::string> out;
  if (!obj.contains(key)) return out;
  const auto& m = obj.at(key);
  if (!m.is_object()) bad(where + ": '" + key + "' must be an object");
  for (const auto& [k, v] : m.items()) {
    if (!v.is_string()) bad(where + ": '" + key + "." + k + "' must be a string");
    out.emplace(k, v.get<std::string>());
  }
  return out;
}

void check_aliases(const std::map<std::string, std::string>& aliases,
                   const std::string& where) {
  for (const auto& [alias, target] : aliases) {
    if (aliases.count(target)) {
      bad(where + ": alias '" + alias + "' points at alias '" + target + "'");
    }
  }
}

}  // namespace

ProfileStore::ProfileStore(ModelResolver resolver) : resolver_(std::move(resolver)) {}

std::size_t ProfileStore::load_json(const nlohmann::json& doc) {
  if (!doc.is_object()) bad("profile document must be an object");
  std::vector<ClassProfile> classes;
  std::vector<UserProfile> users;

  if (doc.contains("classes")) {
    const auto& arr = doc.at("classes");
    if (!arr.is_array()) bad("'classes' must be an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "classes[" + std::to_string(i) + "]";
      ClassProfile c;
      c.class_id = string_field(arr[i], "class_id", where);
      c.task_model_id = string_field(arr[i], "task_model_id", where);
      if (!seen.insert(c.class_id).second) bad(where + ": duplicate class " + c.class_id);
      if (arr[i].contains("rights")) {
        const auto& rights = arr[i].at("rights");
        if (!rights.is_array()) bad(where + ": 'rights' must be an array");
        for (const auto& r : rights) {
          if (!r.is_string()) bad(where + ": rights must be strings");
          c.rights.insert(r.get<std::string>());
        }
      }
      if (resolver_ && !resolver_(c.task_model_id)) {
        bad(where + ": task model '" + c.task_model_id + "' is not loaded");
      }
      classes.push_back(std::move(c));
    }
  }
  if (doc.contains("users")) {
    const auto& arr = doc.at("users");
    if (!arr.is_array()) bad("'users' must be an array");
    std::set<std::string> seen;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "users[" + std::to_string(i) + "]";
      UserProfile u;
      u.user_id = string_field(arr[i], "user_id", where);
      u.class_id = string_field(arr[i], "class_id", where);
      if (!seen.insert(u.user_id).second) bad(where + ": duplicate user " + u.user_id);
      u.preferences = string_map(arr[i], "preferences", where);
      u.aliases = string_map(arr[i], "aliases", where);
      check_aliases(u.aliases, where);
      users.push_back(std::move(u));
    }
  }

  std::unique_lock lock(mutex_);
  for (const auto& u : users) {
    const bool in_doc = std::any_of(classes.begin(), classes.end(),
                                    [&](const auto& c) { return c.class_id == u.class_id; });
    if (!in_doc && !classes_.count(u.class_id)) {
      bad("user '" + u.user_id + "' references unknown class '" + u.class_id + "'");
    }
  }
  for (auto& c : classes) {
    std::string key = c.class_id;
    classes_.insert_or_assign(std::move(key), std::move(c));
  }
  for (auto& u : users) {
    std::string key = u.user_id;
    users_.insert_or_assign(std::move(key), std::move(u));
  }
  return classes.size() + users.size();
}

std::size_t ProfileStore::load_text(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    bad(std::string("invalid JSON: ") + e.what());
  }
  return load_json(doc);
}

std::size_t ProfileStore::load_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::kNotFound, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_text(buf.str());
}

const UserProfile& ProfileStore::user_locked(const std::string& user_id) const {
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(Errc::kUnknownUser, user_id);
  return it->second;
}

Decision ProfileStore::check_right(const std::string& user_id,
                                   const std::string& permission) const {
  std::shared_lock lock(mutex_);
  const UserProfile& u = user_locked(user_id);
  auto c = classes_.find(u.class_id);
  if (c == classes_.end()) return Decision::kDeny;
  return c->second.rights.count(permission) ? Decision::kAllow : Decision::kDeny;
}

UserProfile ProfileStore::get_user(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  return user_locked(user_id);
}

bool ProfileStore::has_user(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  return users_.count(user_id) > 0;
}

std::optional<ClassProfile> ProfileStore::find_class(const std::string& class_id) const {
  std::shared_lock lock(mutex_);
  auto it = classes_.find(class_id);
  if (it == classes_.end()) return std::nullopt;
  return it->second;
}

ClassProfile ProfileStore::class_of(const std::string& user_id) const {
  std::shared_lock lock(mutex_);
  const UserProfile& u = user_locked(user_id);
  return classes_.at(u.class_id);
}

std::string ProfileStore::resolve_alias(const std::string& user_id,
                                        const std::string& name) const {
  std::shared_lock lock(mutex_);
  const UserProfile& u = user_locked(user_id);
  auto it = u.aliases.find(name);
  return it == u.aliases.end() ? name : it->second;
}

std::string ProfileStore::personal_name(const std::string& user_id,
                                        const std::string& canonical) const {
  std::shared_lock lock(mutex_);
  const UserProfile& u = user_locked(user_id);
  for (const auto& [alias, target] : u.aliases) {
    if (target == canonical) return alias;
  }
  return canonical;
}

void ProfileStore::set_alias(const std::string& user_id, const std::string& alias,
                             const std::string& canonical) {
  std::unique_lock lock(mutex_);
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(Errc::kUnknownUser, user_id);
  auto& aliases = it->second.aliases;
  if (alias == canonical) {
    throw Error(Errc::kAliasChain, "alias '" + alias + "' maps to itself");
  }
  if (aliases.count(canonical)) {
    throw Error(Errc::kAliasChain,
                "target '" + canonical + "' is itself an alias");
  }
  for (const auto& [a, target] : aliases) {
    if (target == alias) {
      throw Error(Errc::kAliasChain,
                  "'" + alias + "' is already the target of alias '" + a + "'");
    }
  }
  aliases.insert_or_assign(alias, canonical);
}

void ProfileStore::set_preference(const std::string& user_id, const std::string& key,
                                  const std::string& value) {
  std::unique_lock lock(mutex_);
  auto it = users_.find(user_id);
  if (it == users_.end()) throw Error(Errc::kUnknownUser, user_id);
  it->second.preferences.insert_or_assign(key, value);
}

std::vector<ClassProfile> ProfileStore::classes() const {
  std::shared_lock lock(mutex_);
  std::vector<ClassProfile> out;
  for (const auto& [id, c] : classes_) out.push_back(c);
  return out;
}

std::vector<UserProfile> ProfileStore::users() const {
  std::shared_lock lock(mutex_);
  std::vector<UserProfile> out;
  for (const auto& [id, u] : users_) out.push_back(u);
  return out;
}

nlohmann::json user_to_json(const UserProfile& user) {
  return {{"user_id", user.user_id},
          {"class_id", user.class_id},
          {"preferences", user.preferences},
          {"aliases", user.aliases}};
}

}  // namespace hic
