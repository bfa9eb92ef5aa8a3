#include <algorithm>
#include <cctype>

#include "jmac/train.hpp"
#include "json.hpp"

namespace jmac::train {

using nlohmann::json;

namespace {

const std::vector<std::string> kKeys = {
    "layers",          "dim",         "lr_c",     "lr_a",           "beta",
    "gamma_c",         "gamma_a",     "epochs",   "negatives",      "align_negatives",
    "si_mode",         "ablations",   "seed",     "seed_train_fraction",
    "steps_per_epoch", "entr_period", "transferred_positives"};

const std::vector<std::string> kAblations = {"no_ra_gnn", "one_gnn",  "no_sir",
                                             "no_entr",   "no_align", "no_comple"};

template <typename T>
T get(const json& j, const std::string& key) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config field '" + key + "' has the wrong type");
  }
}

void validate(const TrainConfig& c) {
  if (c.dim == 0) throw ConfigError("config field 'dim' must be positive");
  if (c.lr_c <= 0.0) throw ConfigError("config field 'lr_c' must be positive");
  if (c.lr_a <= 0.0) throw ConfigError("config field 'lr_a' must be positive");
  if (c.beta < 0.0 || c.beta > 1.0) throw ConfigError("config field 'beta' must lie in [0, 1]");
  if (c.gamma_c < 0.0) throw ConfigError("config field 'gamma_c' must be non-negative");
  if (c.gamma_a < 0.0) throw ConfigError("config field 'gamma_a' must be non-negative");
  if (c.negatives == 0) throw ConfigError("config field 'negatives' must be at least 1");
  if (c.align_negatives == 0) throw ConfigError("config field 'align_negatives' must be at least 1");
  if (!(c.seed_train_fraction > 0.0 && c.seed_train_fraction < 1.0))
    throw ConfigError("config field 'seed_train_fraction' must lie in (0, 1)");
  if (c.steps_per_epoch == 0) throw ConfigError("config field 'steps_per_epoch' must be at least 1");
  if (c.entr_period == 0) throw ConfigError("config field 'entr_period' must be at least 1");
}

std::vector<std::string> ablation_names(const Ablations& a) {
  std::vector<std::string> out;
  if (a.no_ra_gnn) out.emplace_back("no_ra_gnn");
  if (a.one_gnn) out.emplace_back("one_gnn");
  if (a.no_sir) out.emplace_back("no_sir");
  if (a.no_entr) out.emplace_back("no_entr");
  if (a.no_align) out.emplace_back("no_align");
  if (a.no_comple) out.emplace_back("no_comple");
  return out;
}

json to_json(const TrainConfig& c) {
  return json{{"layers", c.layers},
              {"dim", c.dim},
              {"lr_c", c.lr_c},
              {"lr_a", c.lr_a},
              {"beta", c.beta},
              {"gamma_c", c.gamma_c},
              {"gamma_a", c.gamma_a},
              {"epochs", c.epochs},
              {"negatives", c.negatives},
              {"align_negatives", c.align_negatives},
              {"si_mode", c.with_si ? "with" : "without"},
              {"ablations", ablation_names(c.ablations)},
              {"seed", c.seed},
              {"seed_train_fraction", c.seed_train_fraction},
              {"steps_per_epoch", c.steps_per_epoch},
              {"entr_period", c.entr_period},
              {"transferred_positives", c.transferred_positives}};
}

TrainConfig from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& key : kKeys)
    if (!j.contains(key)) throw ConfigError("missing config field '" + key + "'");
  for (const auto& [key, value] : j.items())
    if (std::find(kKeys.begin(), kKeys.end(), key) == kKeys.end())
      throw ConfigError("unknown config field '" + key + "'");
  TrainConfig c;
  c.layers = get<std::size_t>(j, "layers");
  c.dim = get<std::size_t>(j, "dim");
  c.lr_c = get<double>(j, "lr_c");
  c.lr_a = get<double>(j, "lr_a");
  c.beta = get<double>(j, "beta");
  c.gamma_c = get<double>(j, "gamma_c");
  c.gamma_a = get<double>(j, "gamma_a");
  c.epochs = get<std::size_t>(j, "epochs");
  c.negatives = get<std::size_t>(j, "negatives");
  c.align_negatives = get<std::size_t>(j, "align_negatives");
  const auto si = get<std::string>(j, "si_mode");
  if (si != "with" && si != "without") throw ConfigError("config field 'si_mode' must be 'with' or 'without'");
  c.with_si = si == "with";
  for (const auto& name : get<std::vector<std::string>>(j, "ablations")) set_ablation(c, name);
  c.seed = get<std::uint64_t>(j, "seed");
  c.seed_train_fraction = get<double>(j, "seed_train_fraction");
  c.steps_per_epoch = get<std::size_t>(j, "steps_per_epoch");
  c.entr_period = get<std::size_t>(j, "entr_period");
  c.transferred_positives = get<bool>(j, "transferred_positives");
  validate(c);
  return c;
}

}  // namespace

std::vector<std::string> config_keys() { return kKeys; }

void set_ablation(TrainConfig& config, std::string_view name) {
  auto& a = config.ablations;
  if (name == "no_ra_gnn") a.no_ra_gnn = true;
  else if (name == "one_gnn") a.one_gnn = true;
  else if (name == "no_sir") a.no_sir = true;
  else if (name == "no_entr") a.no_entr = true;
  else if (name == "no_align") a.no_align = true;
  else if (name == "no_comple") a.no_comple = true;
  else throw ConfigError("unknown ablation '" + std::string(name) + "'");
  if (a.no_align && a.no_comple) throw ConfigError("no_align and no_comple leave nothing to train");
}

TrainConfig config_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

std::string config_to_json(const TrainConfig& config) { return to_json(config).dump(2); }

void apply_env_overrides(TrainConfig& config,
                         const std::function<const char*(const char*)>& getenv) {
  json j = to_json(config);
  bool changed = false;
  for (const auto& key : kKeys) {
    std::string var = "JMAC_" + key;
    std::transform(var.begin(), var.end(), var.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::toupper(ch)); });
    const char* raw = getenv(var.c_str());
    if (raw == nullptr) continue;
    const std::string value(raw);
    changed = true;
    if (key == "si_mode") {
      j[key] = value;
    } else if (key == "ablations") {
      json list = json::array();
      std::size_t start = 0;
      while (start <= value.size()) {
        auto comma = value.find(',', start);
        if (comma == std::string::npos) comma = value.size();
        if (comma > start) list.push_back(value.substr(start, comma - start));
        start = comma + 1;
      }
      j[key] = list;
    } else {
      try {
        j[key] = json::parse(value);
      } catch (const json::parse_error&) {
        throw ConfigError("environment override " + var + " is not a valid value");
      }
    }
  }
  if (changed) config = from_json(j);
}

}  // namespace jmac::train
