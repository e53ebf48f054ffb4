#include "jaclab/experiment.hpp"

#include <json.hpp>

#include <atomic>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

namespace jaclab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Distinct RNG stream tag for evaluation-target sampling; collection uses
// stream ids below 2^32 (trajectory indices), so these cannot collide.
constexpr std::uint64_t kTargetStream = 0x7461726765747321ULL;

void require_keys(const json& obj,
                  std::initializer_list<const char*> allowed,
                  const std::string& ctx) {
  for (const auto& item : obj.items()) {
    bool ok = false;
    for (const char* a : allowed) {
      if (item.key() == a) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      throw ConfigError("unknown key '" + item.key() + "' in " + ctx);
    }
  }
}

double get_num(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number()) {
    throw ConfigError(std::string("key '") + key + "' must be a number");
  }
  return obj.at(key).get<double>();
}

int get_int(const json& obj, const char* key, int fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_number_integer()) {
    throw ConfigError(std::string("key '") + key + "' must be an integer");
  }
  return obj.at(key).get<int>();
}

bool get_bool(const json& obj, const char* key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_boolean()) {
    throw ConfigError(std::string("key '") + key + "' must be a boolean");
  }
  return obj.at(key).get<bool>();
}

std::string get_str(const json& obj, const char* key,
                    const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj.at(key).is_string()) {
    throw ConfigError(std::string("key '") + key + "' must be a string");
  }
  return obj.at(key).get<std::string>();
}

struct EnvDefaults {
  int n_trajectories;
  std::size_t hidden_layers;
  int epochs;
  double tanh_nk_decay;
  double relu_nk_decay;
  double threshold_high;
  std::vector<double> bucket_edges;
};

EnvDefaults env_defaults(EnvKind kind) {
  switch (kind) {
    case EnvKind::SinglePoint7:
      return {1000, 2, 30, 0.0, 1e-4, 0.1, {0.0, 0.5, 1.0, 1.5, 2.0}};
    case EnvKind::MultiPoint7:
      return {2000, 4, 40, 1e-6, 1e-5, 0.25, {0.0, 1.0, 2.0, 3.0, 4.0}};
    case EnvKind::Planar2:
      return {100, 1, 45, 0.0, 0.0, 0.1, {0.0, 0.2, 0.4, 0.6}};
  }
  throw std::logic_error("env_defaults");
}

TrainingEntry default_training_entry(EnvKind kind, const std::string& name,
                                     const std::string& type) {
  const EnvDefaults d = env_defaults(kind);
  TrainingEntry e;
  e.name = name;
  e.type = type;
  e.hidden_layers = d.hidden_layers;
  e.hidden_width = 100;
  e.activation = Activation::Relu;
  e.embedding = InputEmbedding::TrigCosSin;
  e.train.epochs = d.epochs;
  e.beta = 0.0;
  e.k = 10;
  return e;
}

}  // namespace

const TrainingEntry* ExperimentConfig::find_training(
    const std::string& name) const {
  for (const auto& t : training) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

EnvModel ExperimentConfig::make_model() const {
  if (dh_chain.has_value()) {
    return EnvModel::make_with_chain(env, *dh_chain);
  }
  return EnvModel::make(env);
}

Environment ExperimentConfig::make_env() const {
  return Environment(make_model(), sim);
}

ExperimentConfig default_config(EnvKind kind) {
  const EnvDefaults d = env_defaults(kind);
  ExperimentConfig cfg;
  cfg.env = kind;
  cfg.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  cfg.sim.dt = 0.05;
  cfg.collection.n_trajectories = d.n_trajectories;
  cfg.collection.trajectory_length = 100;

  TrainingEntry nj = default_training_entry(kind, "nj", "neural_jacobian");
  TrainingEntry bi_nj = default_training_entry(kind, "bi_nj", "neural_jacobian");
  bi_nj.beta = 1.0;
  TrainingEntry relu_nk =
      default_training_entry(kind, "relu_nk", "neural_kinematics");
  relu_nk.train.weight_decay = d.relu_nk_decay;
  TrainingEntry tanh_nk =
      default_training_entry(kind, "tanh_nk", "neural_kinematics");
  tanh_nk.activation = Activation::Tanh;
  tanh_nk.train.weight_decay = d.tanh_nk_decay;
  cfg.training = {nj, bi_nj, relu_nk, tanh_nk};

  cfg.evaluation.targets_per_seed = 110;
  cfg.evaluation.controller.lambda = 1.0;
  cfg.evaluation.controller.max_steps = 200;
  cfg.evaluation.thresholds = {0.001, d.threshold_high, 0.001};
  cfg.evaluation.buckets.edges = d.bucket_edges;
  cfg.evaluation.estimators = {"true",  "broyden", "llknn",  "nj",
                               "bi_nj", "relu_nk", "tanh_nk"};
  cfg.evaluation.llknn_k = 128;
  return cfg;
}

namespace {

TrainingEntry parse_training_entry(EnvKind kind, const std::string& name,
                                   const json& obj) {
  if (!obj.is_object()) {
    throw ConfigError("training entry '" + name + "' must be an object");
  }
  const std::string type = get_str(obj, "type", "");
  if (type != "neural_kinematics" && type != "neural_jacobian") {
    throw ConfigError("training entry '" + name +
                      "': type must be neural_kinematics or neural_jacobian");
  }
  if (type == "neural_kinematics") {
    require_keys(obj,
                 {"type", "hidden_layers", "hidden_width", "activation",
                  "embedding", "epochs", "learning_rate", "beta1", "beta2",
                  "epsilon", "batch_size", "weight_decay",
                  "validation_fraction"},
                 "training entry '" + name + "'");
  } else {
    require_keys(obj,
                 {"type", "hidden_layers", "hidden_width", "activation",
                  "embedding", "epochs", "learning_rate", "beta1", "beta2",
                  "epsilon", "batch_size", "weight_decay",
                  "validation_fraction", "beta", "k"},
                 "training entry '" + name + "'");
  }

  TrainingEntry e = default_training_entry(kind, name, type);
  if (type == "neural_kinematics") {
    // Activation-dependent weight-decay defaults; an explicit value wins.
    const EnvDefaults d = env_defaults(kind);
    e.activation = activation_from_string(
        get_str(obj, "activation", to_string(e.activation)));
    e.train.weight_decay = e.activation == Activation::Tanh
                               ? d.tanh_nk_decay
                               : d.relu_nk_decay;
  } else {
    e.activation = activation_from_string(
        get_str(obj, "activation", to_string(e.activation)));
  }
  e.hidden_layers = static_cast<std::size_t>(
      get_int(obj, "hidden_layers", static_cast<int>(e.hidden_layers)));
  e.hidden_width = static_cast<std::size_t>(
      get_int(obj, "hidden_width", static_cast<int>(e.hidden_width)));
  e.embedding =
      embedding_from_string(get_str(obj, "embedding", to_string(e.embedding)));
  e.train.epochs = get_int(obj, "epochs", e.train.epochs);
  e.train.learning_rate = get_num(obj, "learning_rate", e.train.learning_rate);
  e.train.beta1 = get_num(obj, "beta1", e.train.beta1);
  e.train.beta2 = get_num(obj, "beta2", e.train.beta2);
  e.train.epsilon = get_num(obj, "epsilon", e.train.epsilon);
  e.train.batch_size = static_cast<std::size_t>(
      get_int(obj, "batch_size", static_cast<int>(e.train.batch_size)));
  e.train.weight_decay = get_num(obj, "weight_decay", e.train.weight_decay);
  e.train.validation_fraction =
      get_num(obj, "validation_fraction", e.train.validation_fraction);
  e.beta = get_num(obj, "beta", e.beta);
  e.k = get_int(obj, "k", e.k);

  if (e.train.epochs < 0) throw ConfigError("epochs must be >= 0");
  if (e.train.batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (e.train.validation_fraction <= 0.0 ||
      e.train.validation_fraction >= 1.0) {
    throw ConfigError("validation_fraction must be in (0, 1)");
  }
  if (e.k < 2 && type == "neural_jacobian") {
    throw ConfigError("neural_jacobian k must be >= 2");
  }
  return e;
}

DhChain parse_dh_chain(const json& arr) {
  if (!arr.is_array() || arr.empty()) {
    throw ConfigError("dh_chain must be a non-empty array of rows");
  }
  DhChain chain;
  for (const auto& row : arr) {
    require_keys(row, {"alpha", "a", "d", "theta_offset", "actuated"},
                 "dh_chain row");
    DhRow r;
    r.alpha = get_num(row, "alpha", 0.0);
    r.a = get_num(row, "a", 0.0);
    r.d = get_num(row, "d", 0.0);
    r.theta_offset = get_num(row, "theta_offset", 0.0);
    chain.rows.push_back(r);
    chain.actuated.push_back(get_bool(row, "actuated", true));
  }
  return chain;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  if (!root.is_object()) throw ConfigError("config root must be an object");
  require_keys(root,
               {"format_version", "env", "seeds", "out_dir", "sim", "dh_chain",
                "collection", "training", "evaluation"},
               "config");
  const int version = get_int(root, "format_version", 1);
  if (version != 1) {
    throw ConfigError("unsupported config format_version " +
                      std::to_string(version));
  }
  if (!root.contains("env")) throw ConfigError("config requires 'env'");
  EnvKind kind;
  try {
    kind = env_kind_from_string(get_str(root, "env", ""));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  ExperimentConfig cfg = default_config(kind);
  cfg.out_dir = get_str(root, "out_dir", "");

  if (root.contains("seeds")) {
    const json& seeds = root.at("seeds");
    if (!seeds.is_array() || seeds.empty()) {
      throw ConfigError("seeds must be a non-empty array");
    }
    cfg.seeds.clear();
    for (const auto& s : seeds) {
      if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
        throw ConfigError("seeds must be non-negative integers");
      }
      cfg.seeds.push_back(s.get<std::uint64_t>());
    }
  }

  if (root.contains("sim")) {
    const json& sim = root.at("sim");
    require_keys(sim, {"dt", "initial_q"}, "sim");
    cfg.sim.dt = get_num(sim, "dt", cfg.sim.dt);
    if (cfg.sim.dt <= 0.0) throw ConfigError("sim.dt must be > 0");
    if (sim.contains("initial_q")) {
      const json& iq = sim.at("initial_q");
      if (!iq.is_array()) throw ConfigError("sim.initial_q must be an array");
      cfg.sim.initial_q.clear();
      for (const auto& v : iq) cfg.sim.initial_q.push_back(v.get<double>());
    }
  }

  if (root.contains("dh_chain")) {
    cfg.dh_chain = parse_dh_chain(root.at("dh_chain"));
  }

  if (root.contains("collection")) {
    const json& col = root.at("collection");
    require_keys(col, {"n_trajectories", "trajectory_length", "policy", "ou"},
                 "collection");
    cfg.collection.n_trajectories =
        get_int(col, "n_trajectories", cfg.collection.n_trajectories);
    cfg.collection.trajectory_length =
        get_int(col, "trajectory_length", cfg.collection.trajectory_length);
    if (cfg.collection.n_trajectories < 1 ||
        cfg.collection.trajectory_length < 1) {
      throw ConfigError("collection sizes must be >= 1");
    }
    try {
      cfg.collection.policy = collection_policy_from_string(
          get_str(col, "policy", to_string(cfg.collection.policy)));
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    if (col.contains("ou")) {
      const json& ou = col.at("ou");
      require_keys(ou, {"sigma", "mu", "theta"}, "collection.ou");
      cfg.collection.ou.sigma = get_num(ou, "sigma", cfg.collection.ou.sigma);
      cfg.collection.ou.mu = get_num(ou, "mu", cfg.collection.ou.mu);
      cfg.collection.ou.theta = get_num(ou, "theta", cfg.collection.ou.theta);
      if (cfg.collection.ou.sigma < 0.0 || cfg.collection.ou.theta < 0.0 ||
          cfg.collection.ou.theta > 1.0) {
        throw ConfigError("ou requires sigma >= 0 and theta in [0, 1]");
      }
    }
  }

  if (root.contains("training")) {
    const json& tr = root.at("training");
    if (!tr.is_object()) throw ConfigError("training must be an object");
    cfg.training.clear();
    for (const auto& item : tr.items()) {
      cfg.training.push_back(
          parse_training_entry(kind, item.key(), item.value()));
    }
  }

  if (root.contains("evaluation")) {
    const json& ev = root.at("evaluation");
    require_keys(ev,
                 {"targets_per_seed", "controller", "thresholds", "buckets",
                  "estimators", "llknn_k", "broyden"},
                 "evaluation");
    auto& e = cfg.evaluation;
    e.targets_per_seed = get_int(ev, "targets_per_seed", e.targets_per_seed);
    if (e.targets_per_seed < 1) {
      throw ConfigError("targets_per_seed must be >= 1");
    }
    if (ev.contains("controller")) {
      const json& c = ev.at("controller");
      require_keys(c, {"lambda", "max_steps", "null_space_enabled", "y"},
                   "evaluation.controller");
      e.controller.lambda = get_num(c, "lambda", e.controller.lambda);
      e.controller.max_steps = get_int(c, "max_steps", e.controller.max_steps);
      e.controller.null_space_enabled =
          get_bool(c, "null_space_enabled", e.controller.null_space_enabled);
      if (c.contains("y")) {
        e.controller.y.clear();
        for (const auto& v : c.at("y")) e.controller.y.push_back(v.get<double>());
      }
      if (e.controller.lambda <= 0.0) throw ConfigError("lambda must be > 0");
      if (e.controller.max_steps < 1) throw ConfigError("max_steps >= 1");
    }
    if (ev.contains("thresholds")) {
      const json& t = ev.at("thresholds");
      require_keys(t, {"low", "high", "step"}, "evaluation.thresholds");
      e.thresholds.low = get_num(t, "low", e.thresholds.low);
      e.thresholds.high = get_num(t, "high", e.thresholds.high);
      e.thresholds.step = get_num(t, "step", e.thresholds.step);
      if (e.thresholds.step <= 0.0 || e.thresholds.low > e.thresholds.high) {
        throw ConfigError("thresholds require step > 0 and low <= high");
      }
    }
    if (ev.contains("buckets")) {
      const json& b = ev.at("buckets");
      if (!b.is_array() || b.size() < 2) {
        throw ConfigError("buckets must be an array of at least two edges");
      }
      e.buckets.edges.clear();
      for (const auto& v : b) e.buckets.edges.push_back(v.get<double>());
      for (std::size_t i = 0; i + 1 < e.buckets.edges.size(); ++i) {
        if (!(e.buckets.edges[i] < e.buckets.edges[i + 1])) {
          throw ConfigError("bucket edges must strictly increase");
        }
      }
    }
    if (ev.contains("estimators")) {
      const json& es = ev.at("estimators");
      if (!es.is_array() || es.empty()) {
        throw ConfigError("estimators must be a non-empty array");
      }
      e.estimators.clear();
      for (const auto& v : es) {
        if (!v.is_string()) throw ConfigError("estimator names are strings");
        e.estimators.push_back(v.get<std::string>());
      }
    }
    e.llknn_k = get_int(ev, "llknn_k", e.llknn_k);
    if (e.llknn_k < 1) throw ConfigError("llknn_k must be >= 1");
    if (ev.contains("broyden")) {
      const json& b = ev.at("broyden");
      require_keys(b, {"alpha", "gate", "probe_angle"}, "evaluation.broyden");
      e.broyden.alpha = get_num(b, "alpha", e.broyden.alpha);
      e.broyden.gate = get_num(b, "gate", e.broyden.gate);
      e.broyden.probe_angle = get_num(b, "probe_angle", e.broyden.probe_angle);
    }
  }

  // Every evaluated estimator must resolve to a builtin or a training entry.
  for (const auto& name : cfg.evaluation.estimators) {
    if (name == "true" || name == "broyden" || name == "llknn") continue;
    if (cfg.find_training(name) == nullptr) {
      throw ConfigError("estimator '" + name + "' has no training entry");
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string ExperimentPaths::dataset(std::uint64_t seed) const {
  return datasets_dir() + "/dataset_seed" + std::to_string(seed) + ".njds";
}

std::string ExperimentPaths::dataset_csv(std::uint64_t seed) const {
  return datasets_dir() + "/dataset_seed" + std::to_string(seed) + ".csv";
}

std::string ExperimentPaths::model(const std::string& name,
                                   std::uint64_t seed) const {
  return models_dir() + "/" + name + "_seed" + std::to_string(seed) + ".njlm";
}

std::string ExperimentPaths::train_log(const std::string& name,
                                       std::uint64_t seed) const {
  return models_dir() + "/" + name + "_seed" + std::to_string(seed) +
         "_log.csv";
}

namespace {

std::vector<std::uint64_t> selected_seeds(
    const ExperimentConfig& cfg, std::optional<std::uint64_t> seed_override) {
  if (seed_override.has_value()) return {*seed_override};
  return cfg.seeds;
}

}  // namespace

void run_collect(const ExperimentConfig& cfg, const std::string& out_dir,
                 std::optional<std::uint64_t> seed_override, bool export_csv) {
  ExperimentPaths paths{out_dir};
  fs::create_directories(paths.datasets_dir());
  for (std::uint64_t seed : selected_seeds(cfg, seed_override)) {
    Environment env = cfg.make_env();
    const Dataset data =
        collect(env, cfg.collection.n_trajectories,
                cfg.collection.trajectory_length, cfg.collection.ou, seed,
                cfg.collection.policy);
    save_dataset(data, paths.dataset(seed));
    if (export_csv) export_dataset_csv(data, paths.dataset_csv(seed));
    std::printf("collect: env=%s seed=%" PRIu64
                " trajectories=%d samples=%zu policy=%s -> %s\n",
                to_string(cfg.env).c_str(), seed,
                cfg.collection.n_trajectories, data.samples.size(),
                to_string(cfg.collection.policy).c_str(),
                paths.dataset(seed).c_str());
  }
}

namespace {

MlpSpec build_spec(const ExperimentConfig& cfg, const TrainingEntry& entry,
                   std::uint64_t seed) {
  const std::size_t m = env_feature_dim(cfg.env);
  const std::size_t n = env_joint_dim(cfg.env);
  MlpSpec spec;
  spec.input_dim = embedded_dim(entry.embedding, n);
  spec.hidden_layers = entry.hidden_layers;
  spec.hidden_width = entry.hidden_width;
  spec.output_dim = entry.type == "neural_jacobian" ? m * n : m;
  spec.activation = entry.activation;
  spec.seed = seed;
  return spec;
}

void write_train_log(const std::string& path, const TrainingEntry& entry,
                     std::uint64_t seed, const TrainResult& result) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open training log " + path);
  f << "# estimator=" << entry.name << " type=" << entry.type
    << " activation=" << to_string(entry.activation)
    << " embedding=" << to_string(entry.embedding) << " beta="
    << format_csv_value(entry.beta) << " k=" << entry.k << " seed=" << seed
    << " weight_decay=" << format_csv_value(entry.train.weight_decay)
    << " best_epoch=" << result.best_epoch
    << " best_val_loss=" << format_csv_value(result.best_val_loss) << "\n";
  f << "epoch,train_loss,val_loss\n";
  for (const auto& row : result.log) {
    f << row.epoch << "," << format_csv_value(row.train_loss) << ","
      << format_csv_value(row.val_loss) << "\n";
  }
}

}  // namespace

void run_train(const ExperimentConfig& cfg, const std::string& out_dir,
               const std::string& estimator_name, bool force,
               std::optional<std::uint64_t> seed_override) {
  const TrainingEntry* entry = cfg.find_training(estimator_name);
  if (entry == nullptr) {
    throw ConfigError("unknown trainable estimator '" + estimator_name + "'");
  }
  ExperimentPaths paths{out_dir};
  fs::create_directories(paths.models_dir());

  for (std::uint64_t seed : selected_seeds(cfg, seed_override)) {
    const std::string model_path = paths.model(entry->name, seed);
    if (fs::exists(model_path) && !force) {
      throw std::runtime_error("model file exists, pass --force to retrain: " +
                               model_path);
    }
    const Dataset data = load_dataset(paths.dataset(seed));
    if (data.kind != cfg.env) {
      throw std::runtime_error("dataset environment mismatch for " +
                               paths.dataset(seed));
    }

    TrainConfig tc = entry->train;
    tc.seed = seed;
    const MlpSpec spec = build_spec(cfg, *entry, seed);

    TrainResult result;
    if (entry->type == "neural_kinematics") {
      std::vector<std::vector<double>> inputs, targets;
      inputs.reserve(data.samples.size());
      targets.reserve(data.samples.size());
      for (const auto& s : data.samples) {
        inputs.push_back(embed_input(entry->embedding, s.q));
        targets.push_back(s.x);
      }
      result = train_neural_kinematics(inputs, targets, spec, tc);
    } else {
      const PairSet pairs = build_pairs(data, entry->k);
      result = train_neural_jacobian(pairs, spec, tc, entry->beta,
                                     entry->embedding);
    }
    save_mlp(result.model, model_path);
    write_train_log(paths.train_log(entry->name, seed), *entry, seed, result);
    std::printf("train: %s seed=%" PRIu64
                " epochs=%d best_epoch=%d best_val_loss=%g -> %s\n",
                entry->name.c_str(), seed, entry->train.epochs,
                result.best_epoch, result.best_val_loss, model_path.c_str());
  }
}

namespace {

struct StepRow {
  double distance = 0.0;
  double frob = 0.0;
  double cond_value = 0.0;
  bool pd = false;
};

struct TrajResult {
  std::uint64_t seed = 0;
  int target_id = 0;
  std::string estimator;
  double initial_distance = 0.0;
  double final_distance = 0.0;
  int steps = 0;
  std::string failure;
  std::vector<StepRow> rows;
};

struct EvalJob {
  std::uint64_t seed = 0;
  int target_id = 0;
  std::string estimator;
  const std::vector<double>* target = nullptr;
};

// Immutable per-run estimator resources shared across jobs.
struct EstimatorResources {
  std::map<std::uint64_t, std::shared_ptr<const Dataset>> datasets;
  std::map<std::pair<std::string, std::uint64_t>, std::shared_ptr<const Mlp>>
      models;
};

std::unique_ptr<JacobianEstimator> make_estimator(
    const ExperimentConfig& cfg, const EstimatorResources& res,
    const std::string& name, std::uint64_t seed) {
  if (name == "true") {
    return std::make_unique<TrueJacobianEstimator>(cfg.make_model());
  }
  if (name == "broyden") {
    const auto& b = cfg.evaluation.broyden;
    return std::make_unique<BroydenEstimator>(b.alpha, b.gate, b.probe_angle);
  }
  if (name == "llknn") {
    return std::make_unique<LlknnEstimator>(res.datasets.at(seed),
                                            cfg.evaluation.llknn_k);
  }
  const TrainingEntry* entry = cfg.find_training(name);
  if (entry == nullptr) throw ConfigError("unknown estimator '" + name + "'");
  const Mlp& model = *res.models.at({name, seed});
  if (entry->type == "neural_jacobian") {
    return std::make_unique<NeuralJacobianEstimator>(
        name, model, entry->embedding, env_feature_dim(cfg.env));
  }
  return std::make_unique<NeuralKinematicsEstimator>(name, model,
                                                     entry->embedding);
}

TrajResult run_eval_job(const ExperimentConfig& cfg,
                        const EstimatorResources& res, const EvalJob& job) {
  Environment env = cfg.make_env();
  const auto estimator = make_estimator(cfg, res, job.estimator, job.seed);
  const EvalTrace trace =
      run_trajectory(env, *estimator, *job.target, cfg.evaluation.controller);

  TrajResult out;
  out.seed = job.seed;
  out.target_id = job.target_id;
  out.estimator = job.estimator;
  out.initial_distance = trace.initial_distance;
  out.final_distance = trace.final_distance();
  out.steps = static_cast<int>(trace.steps.size());
  out.failure = trace.failure_reason;
  out.rows.reserve(trace.steps.size());
  for (const auto& s : trace.steps) {
    StepRow row;
    row.distance = s.distance;
    row.frob = frobenius_error(s.j_true, s.j_hat);
    row.cond_value = cond(s.j_hat);
    row.pd = pd_criterion(s.j_true, s.j_hat);
    out.rows.push_back(row);
  }
  return out;
}

// One-line provenance header carried by every results CSV.
std::string results_metadata_line(const ExperimentConfig& cfg,
                                  const std::vector<std::uint64_t>& seeds) {
  std::ostringstream os;
  os << "# env=" << to_string(cfg.env) << " dt=" << format_csv_value(cfg.sim.dt)
     << " initial_q=";
  const std::vector<double> q0 = cfg.sim.initial_q.empty()
                                     ? std::vector<double>(env_joint_dim(cfg.env), 0.0)
                                     : cfg.sim.initial_q;
  for (std::size_t i = 0; i < q0.size(); ++i) {
    os << (i ? ";" : "") << format_csv_value(q0[i]);
  }
  os << " lambda=" << format_csv_value(cfg.evaluation.controller.lambda)
     << " max_steps=" << cfg.evaluation.controller.max_steps << " seeds=";
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    os << (i ? ";" : "") << seeds[i];
  }
  return os.str();
}

std::string sanitize_csv_field(const std::string& s) {
  std::string out = s;
  for (char& c : out) {
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  }
  return out;
}

}  // namespace

void run_eval(const ExperimentConfig& cfg, const std::string& out_dir,
              int jobs, std::optional<std::uint64_t> seed_override) {
  ExperimentPaths paths{out_dir};
  fs::create_directories(paths.results_dir());
  const std::vector<std::uint64_t> seeds = selected_seeds(cfg, seed_override);

  bool needs_dataset = false;
  std::vector<std::string> model_names;
  for (const auto& name : cfg.evaluation.estimators) {
    if (name == "llknn") {
      needs_dataset = true;
    } else if (name != "true" && name != "broyden") {
      model_names.push_back(name);
    }
  }

  EstimatorResources res;
  for (std::uint64_t seed : seeds) {
    if (needs_dataset) {
      const std::string p = paths.dataset(seed);
      if (!fs::exists(p)) {
        throw std::runtime_error("missing dataset file " + p);
      }
      res.datasets[seed] = std::make_shared<Dataset>(load_dataset(p));
    }
    for (const auto& name : model_names) {
      const std::string p = paths.model(name, seed);
      if (!fs::exists(p)) {
        throw std::runtime_error("missing model file " + p);
      }
      res.models[{name, seed}] = std::make_shared<Mlp>(load_mlp(p));
    }
  }

  // Targets per seed from a dedicated RNG stream.
  std::map<std::uint64_t, std::vector<std::vector<double>>> targets;
  for (std::uint64_t seed : seeds) {
    Environment env = cfg.make_env();
    Rng rng(Rng::derive(seed, kTargetStream));
    auto& list = targets[seed];
    list.reserve(cfg.evaluation.targets_per_seed);
    for (int t = 0; t < cfg.evaluation.targets_per_seed; ++t) {
      list.push_back(env.sample_target(rng));
    }
  }

  // Canonical order (seed, target, estimator); the row index is the
  // trajectory id regardless of how jobs are scheduled.
  std::vector<EvalJob> job_list;
  for (std::uint64_t seed : seeds) {
    for (int t = 0; t < cfg.evaluation.targets_per_seed; ++t) {
      for (const auto& name : cfg.evaluation.estimators) {
        job_list.push_back({seed, t, name, &targets[seed][t]});
      }
    }
  }

  std::vector<TrajResult> results(job_list.size());
  const int n_workers = std::max(1, jobs);
  if (n_workers == 1) {
    for (std::size_t i = 0; i < job_list.size(); ++i) {
      results[i] = run_eval_job(cfg, res, job_list[i]);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    workers.reserve(n_workers);
    for (int w = 0; w < n_workers; ++w) {
      workers.emplace_back([&]() {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= job_list.size()) return;
          results[i] = run_eval_job(cfg, res, job_list[i]);
        }
      });
    }
    for (auto& w : workers) w.join();
  }

  {
    std::ofstream f(paths.trajectories_csv(), std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write trajectories.csv");
    f << results_metadata_line(cfg, seeds) << "\n";
    f << "trajectory_id,estimator,seed,target_id,initial_distance,"
         "final_distance,steps,failure\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      f << i << "," << r.estimator << "," << r.seed << "," << r.target_id
        << "," << format_csv_value(r.initial_distance) << ","
        << format_csv_value(r.final_distance) << "," << r.steps << ","
        << sanitize_csv_field(r.failure) << "\n";
    }
  }
  {
    std::ofstream f(paths.steps_csv(), std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write steps.csv");
    f << results_metadata_line(cfg, seeds) << "\n";
    f << "trajectory_id,step,distance,frobenius_error,cond,pd_flag\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& rows = results[i].rows;
      for (std::size_t s = 0; s < rows.size(); ++s) {
        f << i << "," << (s + 1) << "," << format_csv_value(rows[s].distance)
          << "," << format_csv_value(rows[s].frob) << ","
          << format_csv_value(rows[s].cond_value) << ","
          << (rows[s].pd ? 1 : 0) << "\n";
      }
    }
  }

  // Summary table: estimator rows, initial-distance bucket columns plus the
  // all-range column, each cell a threshold-averaged success percentage.
  {
    std::ofstream f(paths.summary_csv(), std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write summary.csv");
    f << results_metadata_line(cfg, seeds) << "\n";
    f << "estimator";
    BucketResult proto;
    for (std::size_t b = 0; b + 1 < cfg.evaluation.buckets.edges.size(); ++b) {
      f << "," << proto.label(cfg.evaluation.buckets, b);
    }
    f << ",overall\n";
    for (const auto& name : cfg.evaluation.estimators) {
      std::vector<double> initials, finals;
      for (const auto& r : results) {
        if (r.estimator != name) continue;
        initials.push_back(r.initial_distance);
        finals.push_back(r.final_distance);
      }
      const BucketResult buckets = bucketize(initials, cfg.evaluation.buckets);
      f << name;
      for (const auto& group : buckets.groups) {
        if (group.empty()) {
          f << ",";
          continue;
        }
        std::vector<double> bucket_finals;
        bucket_finals.reserve(group.size());
        for (std::size_t idx : group) bucket_finals.push_back(finals[idx]);
        f << ","
          << format_csv_value(
                 mean_success(bucket_finals, cfg.evaluation.thresholds));
      }
      f << ","
        << format_csv_value(mean_success(finals, cfg.evaluation.thresholds))
        << "\n";
    }
  }
  {
    // Bucket membership depends only on the targets, not the estimator.
    std::ofstream f(paths.bucket_counts_csv(), std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write bucket_counts.csv");
    f << results_metadata_line(cfg, seeds) << "\n";
    std::vector<double> initials;
    for (const auto& r : results) {
      if (r.estimator == cfg.evaluation.estimators.front()) {
        initials.push_back(r.initial_distance);
      }
    }
    const BucketResult buckets = bucketize(initials, cfg.evaluation.buckets);
    f << "bucket,count\n";
    for (std::size_t b = 0; b < buckets.groups.size(); ++b) {
      f << buckets.label(cfg.evaluation.buckets, b) << ","
        << buckets.groups[b].size() << "\n";
    }
    f << "overflow," << buckets.overflow.size() << "\n";
    f << "total," << initials.size() << "\n";
  }

  std::printf("eval: %zu trajectories (%zu seeds x %d targets x %zu "
              "estimators) -> %s\n",
              results.size(), seeds.size(), cfg.evaluation.targets_per_seed,
              cfg.evaluation.estimators.size(), paths.results_dir().c_str());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_csv_double(const std::string& s) {
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::stod(s);
}

struct LoadedStepRow {
  std::size_t trajectory_id = 0;
  int step = 0;
  double distance = 0.0;
  double frob = 0.0;
  double cond_value = 0.0;
  bool pd = false;
};

struct MeanStderr {
  double mean = 0.0;
  double stderr_value = 0.0;
  std::size_t n = 0;
};

MeanStderr mean_stderr(const std::vector<double>& values) {
  MeanStderr out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double var = 0.0;
    for (double v : values) var += (v - out.mean) * (v - out.mean);
    var /= static_cast<double>(values.size() - 1);
    out.stderr_value = std::sqrt(var / static_cast<double>(values.size()));
  }
  return out;
}

}  // namespace

void run_analyze(const std::string& out_dir) {
  ExperimentPaths paths{out_dir};
  std::ifstream traj_file(paths.trajectories_csv());
  if (!traj_file) {
    throw std::runtime_error("missing results file " + paths.trajectories_csv());
  }
  std::ifstream steps_file(paths.steps_csv());
  if (!steps_file) {
    throw std::runtime_error("missing results file " + paths.steps_csv());
  }
  fs::create_directories(paths.analysis_dir());

  std::vector<std::string> traj_estimator;  // indexed by trajectory id
  std::vector<std::string> estimator_order;
  {
    std::string line;
    while (std::getline(traj_file, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (line.rfind("trajectory_id", 0) == 0) continue;  // header
      const auto fields = split_csv_line(line);
      const std::size_t id = std::stoul(fields[0]);
      if (traj_estimator.size() <= id) traj_estimator.resize(id + 1);
      traj_estimator[id] = fields[1];
      if (std::find(estimator_order.begin(), estimator_order.end(),
                    fields[1]) == estimator_order.end()) {
        estimator_order.push_back(fields[1]);
      }
    }
  }

  std::vector<LoadedStepRow> rows;
  {
    std::string line;
    while (std::getline(steps_file, line)) {
      if (line.empty() || line[0] == '#') continue;
      if (line.rfind("trajectory_id", 0) == 0) continue;  // header
      const auto fields = split_csv_line(line);
      LoadedStepRow r;
      r.trajectory_id = std::stoul(fields[0]);
      r.step = std::stoi(fields[1]);
      r.distance = parse_csv_double(fields[2]);
      r.frob = parse_csv_double(fields[3]);
      r.cond_value = parse_csv_double(fields[4]);
      r.pd = fields[5] == "1";
      rows.push_back(r);
    }
  }

  auto estimator_of = [&](std::size_t traj_id) -> const std::string& {
    return traj_estimator.at(traj_id);
  };

  {
    std::ofstream f(paths.analysis_dir() + "/frobenius_over_time.csv",
                    std::ios::trunc);
    f << "estimator,step,mean_frobenius,stderr,n\n";
    for (const auto& est : estimator_order) {
      std::map<int, std::vector<double>> by_step;
      for (const auto& r : rows) {
        if (estimator_of(r.trajectory_id) == est) {
          by_step[r.step].push_back(r.frob);
        }
      }
      for (const auto& [step, values] : by_step) {
        const MeanStderr ms = mean_stderr(values);
        f << est << "," << step << "," << format_csv_value(ms.mean) << ","
          << format_csv_value(ms.stderr_value) << "," << ms.n << "\n";
      }
    }
  }

  {
    std::ofstream f(paths.analysis_dir() + "/condition_stats.csv",
                    std::ios::trunc);
    std::ofstream flog(paths.analysis_dir() + "/condition_log_values.csv",
                       std::ios::trunc);
    f << "estimator,mean,median,stddev,fraction_infinite,n_finite,n_total\n";
    flog << "estimator,ln_cond\n";
    for (const auto& est : estimator_order) {
      std::vector<double> conds;
      for (const auto& r : rows) {
        if (estimator_of(r.trajectory_id) == est) conds.push_back(r.cond_value);
      }
      if (conds.empty()) continue;
      const ConditionStats cs = condition_stats(conds);
      f << est << "," << format_csv_value(cs.mean) << ","
        << format_csv_value(cs.median) << "," << format_csv_value(cs.stddev)
        << "," << format_csv_value(cs.fraction_infinite) << ","
        << cs.log_values.size() << "," << conds.size() << "\n";
      for (double lv : cs.log_values) {
        flog << est << "," << format_csv_value(lv) << "\n";
      }
    }
  }

  {
    // Per-trajectory PD flags, then the partition plus per-step distance
    // curves for each side of it.
    std::map<std::size_t, std::vector<bool>> traj_pd;
    std::map<std::size_t, std::vector<std::pair<int, double>>> traj_dist;
    for (const auto& r : rows) {
      traj_pd[r.trajectory_id].push_back(r.pd);
      traj_dist[r.trajectory_id].push_back({r.step, r.distance});
    }
    std::ofstream f(paths.analysis_dir() + "/pd_partition.csv",
                    std::ios::trunc);
    f << "estimator,pct_always_pd,pct_not_always_pd,n_always,n_not_always\n";
    std::ofstream fc(paths.analysis_dir() + "/pd_distance_by_partition.csv",
                     std::ios::trunc);
    fc << "estimator,partition,step,mean_distance,stderr,n\n";
    for (const auto& est : estimator_order) {
      std::vector<std::size_t> ids;
      std::vector<std::vector<bool>> flags;
      for (const auto& [id, pd] : traj_pd) {
        if (estimator_of(id) == est) {
          ids.push_back(id);
          flags.push_back(pd);
        }
      }
      if (ids.empty()) continue;
      const PdPartition part = classify_pd_trajectories(flags);
      f << est << "," << format_csv_value(part.pct_always) << ","
        << format_csv_value(part.pct_not_always) << ","
        << part.always_pd.size() << "," << part.not_always_pd.size() << "\n";
      const std::pair<const char*, const std::vector<std::size_t>*> sides[2] = {
          {"always_pd", &part.always_pd},
          {"not_always_pd", &part.not_always_pd}};
      for (const auto& [label, members] : sides) {
        std::map<int, std::vector<double>> by_step;
        for (std::size_t local : *members) {
          for (const auto& [step, dist] : traj_dist[ids[local]]) {
            by_step[step].push_back(dist);
          }
        }
        for (const auto& [step, values] : by_step) {
          const MeanStderr ms = mean_stderr(values);
          fc << est << "," << label << "," << step << ","
             << format_csv_value(ms.mean) << ","
             << format_csv_value(ms.stderr_value) << "," << ms.n << "\n";
        }
      }
    }
  }

  std::printf("analyze: wrote %s\n", paths.analysis_dir().c_str());
}

ExperimentConfig demo_config() {
  ExperimentConfig cfg = default_config(EnvKind::Planar2);
  cfg.seeds = {0};
  cfg.collection.n_trajectories = 100;  // 10,000 samples
  const TrainingEntry* tanh_nk = cfg.find_training("tanh_nk");
  cfg.training = {*tanh_nk};
  cfg.evaluation.targets_per_seed = 50;
  cfg.evaluation.estimators = {"true", "tanh_nk"};
  return cfg;
}

void run_demo(const std::string& out_dir, int jobs) {
  const ExperimentConfig cfg = demo_config();
  run_collect(cfg, out_dir);
  run_train(cfg, out_dir, "tanh_nk", /*force=*/true);
  run_eval(cfg, out_dir, jobs);
  run_analyze(out_dir);

  // Overall mean-success summary straight from the results file.
  ExperimentPaths paths{out_dir};
  std::ifstream f(paths.trajectories_csv());
  std::string line;
  std::map<std::string, std::vector<double>> finals;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("trajectory_id", 0) == 0) continue;
    const auto fields = split_csv_line(line);
    finals[fields[1]].push_back(parse_csv_double(fields[5]));
  }
  for (const auto& name : cfg.evaluation.estimators) {
    std::printf("demo: %s mean success = %.2f%% over %zu targets\n",
                name.c_str(),
                mean_success(finals.at(name), cfg.evaluation.thresholds),
                finals.at(name).size());
  }
}

}  // namespace jaclab
