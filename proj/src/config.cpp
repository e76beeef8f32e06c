#include "lsc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace lsc::config {

namespace {

enum class Type { integer, real, flag, text };

struct KeySpec {
  const char* key;
  Type type;
  const char* def;
};

// Zeroed numeric defaults marked "auto" are resolved per scenario when the
// run config is assembled (horizon, communication radius, learning rate).
constexpr KeySpec kSchema[] = {
    {"scenario", Type::text, "spread"},

    {"env.arena_w", Type::integer, "12"},
    {"env.arena_h", Type::integer, "12"},
    {"env.n_allies", Type::integer, "8"},
    {"env.n_enemies", Type::integer, "8"},
    {"env.ally_speed", Type::integer, "1"},
    {"env.ally_attack", Type::integer, "1"},
    {"env.ally_hp", Type::integer, "4"},
    {"env.enemy_speed", Type::integer, "2"},
    {"env.enemy_attack", Type::integer, "2"},
    {"env.enemy_hp", Type::integer, "10"},
    {"env.view", Type::integer, "6"},
    {"env.reward_hit", Type::real, "5"},
    {"env.reward_death", Type::real, "-2"},
    {"env.reward_miss", Type::real, "-0.01"},
    {"env.n_agents", Type::integer, "12"},
    {"env.n_landmarks", Type::integer, "4"},
    {"env.step_size", Type::real, "0.1"},
    {"env.view_radius", Type::real, "0.4"},
    {"env.capture_radius", Type::real, "0.2"},
    {"env.reward_success", Type::real, "2"},
    {"env.reward_overload", Type::real, "-10"},
    {"env.dense_shaping", Type::flag, "true"},
    {"env.horizon", Type::integer, "0"},  // auto: 300 battle, 50 spread

    {"topology.kind", Type::text, "hierarchical"},
    {"topology.radius", Type::real, "0"},  // auto: 6 battle, 0.6 spread
    {"topology.max_wait_rounds", Type::integer, "2"},
    {"topology.rounds_cap", Type::integer, "16"},
    {"topology.weight_mode", Type::text, "learned"},
    {"topology.fixed_level", Type::integer, "2"},

    {"net.hidden", Type::integer, "32"},
    {"net.msg_dim", Type::integer, "3"},
    {"net.down_edge_reverse", Type::flag, "false"},

    {"learner.gamma", Type::real, "0.98"},
    {"learner.tau", Type::real, "0.01"},
    {"learner.lr", Type::real, "0"},  // auto: 1e-4 battle, 1e-3 spread
    {"learner.batch_size", Type::integer, "32"},
    {"learner.update_rounds", Type::integer, "4"},
    {"learner.buffer_capacity", Type::integer, "50000"},
    {"learner.eps_start", Type::real, "1.0"},
    {"learner.eps_end", Type::real, "0.01"},
    {"learner.eps_decay_frac", Type::real, "0.6"},
    {"learner.wg_use_target", Type::flag, "true"},

    {"run.episodes", Type::integer, "200"},
    {"run.eval_cadence", Type::integer, "50"},
    {"run.eval_trials", Type::integer, "10"},
    {"run.seed", Type::integer, "1"},
    {"run.out_dir", Type::text, "out"},
    {"run.trace", Type::flag, "false"},
    {"run.workers", Type::integer, "1"},
};

const KeySpec* find_spec(const std::string& key) {
  for (const KeySpec& s : kSchema)
    if (key == s.key) return &s;
  return nullptr;
}

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

void check_type(const KeySpec& spec, const std::string& value) {
  const char* c = value.c_str();
  char* end = nullptr;
  switch (spec.type) {
    case Type::integer:
      std::strtoll(c, &end, 10);
      if (end == c || *end != '\0')
        throw ConfigError(std::string("config: key ") + spec.key + " wants an integer, got '" +
                          value + "'");
      break;
    case Type::real:
      std::strtod(c, &end);
      if (end == c || *end != '\0')
        throw ConfigError(std::string("config: key ") + spec.key + " wants a real, got '" +
                          value + "'");
      break;
    case Type::flag:
      if (value != "true" && value != "false")
        throw ConfigError(std::string("config: key ") + spec.key + " wants true/false, got '" +
                          value + "'");
      break;
    case Type::text:
      break;
  }
}

}  // namespace

Settings Settings::defaults() {
  Settings s;
  for (const KeySpec& spec : kSchema) s.values_[spec.key] = spec.def;
  return s;
}

const std::string& Settings::schema_help() {
  static const std::string help = [] {
    std::ostringstream os;
    for (const KeySpec& s : kSchema) {
      const char* t = s.type == Type::integer ? "int"
                      : s.type == Type::real  ? "real"
                      : s.type == Type::flag  ? "bool"
                                              : "text";
      os << s.key << " (" << t << ", default " << s.def << ")\n";
    }
    return os.str();
  }();
  return help;
}

void Settings::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find_spec(key);
  if (!spec) throw ConfigError("config: unknown key: " + key);
  check_type(*spec, value);
  values_[key] = value;
}

void Settings::load_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot read file: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: " + path + ":" + std::to_string(lineno) +
                        ": expected 'key = value'");
    set(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
}

void Settings::apply_override(const std::string& kv) {
  const size_t eq = kv.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: override must look like key=value: " + kv);
  set(trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
}

int Settings::geti(const std::string& key) const {
  return static_cast<int>(std::strtoll(gets(key).c_str(), nullptr, 10));
}

double Settings::getd(const std::string& key) const {
  return std::strtod(gets(key).c_str(), nullptr);
}

bool Settings::getb(const std::string& key) const { return gets(key) == "true"; }

const std::string& Settings::gets(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("config: unknown key: " + key);
  return it->second;
}

std::string Settings::render() const {
  std::ostringstream os;
  for (const auto& [k, v] : values_) os << k << " = " << v << "\n";
  return os.str();
}

uint64_t Settings::content_hash() const { return fnv1a64(render()); }

}  // namespace lsc::config
