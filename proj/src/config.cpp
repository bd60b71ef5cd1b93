#include "meanfield/config.hpp"

#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>

#include "meanfield/errors.hpp"
#include "meanfield/io.hpp"

namespace meanfield {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where,
                const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("config: " + where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key))
      throw ConfigError("config: unknown key '" + key + "' in " + where);
  }
}

Activation parse_activation(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw ConfigError("config: unknown activation '" + name + "'");
}

}  // namespace

void ExperimentConfig::validate() const {
  system.validate();
  if (num_particles < 1) throw ConfigError("config: N must be >= 1");
  if (num_trajectories < 1) throw ConfigError("config: M must be >= 1");
  if (num_steps < 1) throw ConfigError("config: L must be >= 1");
  if (dt <= 0.0) throw ConfigError("config: dt must be positive");
  if (train_count + test_count != num_trajectories)
    throw ConfigError("config: split counts must sum to M");
  if (optim.epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (model.k < 1) throw ConfigError("config: k must be >= 1");
  if (init.dimension() != system.dimension)
    throw ConfigError("config: init dimension does not match system dimension");
  if (system.order == Order::kSecond && !init.velocity)
    throw ConfigError("config: second-order system needs velocity init");
}

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad JSON: ") + e.what());
  }
  check_keys(j, "root",
             {"system", "init", "N", "M", "L", "dt", "split", "model", "optim", "eval",
              "chaos", "seed"});

  ExperimentConfig cfg;
  try {
    // Kernel/system/init checks live in their own strict parsers.
    check_keys(j.at("system"), "system",
               {"order", "dimension", "drift_form", "kernel", "sigma", "multigroup"});
    cfg.system = system_from_json(j.at("system"));
    cfg.init = init_from_json(j.at("init"));
    cfg.num_particles = j.at("N").get<int>();
    cfg.num_trajectories = j.at("M").get<int>();
    cfg.num_steps = j.at("L").get<int>();
    cfg.dt = j.at("dt").get<double>();
    check_keys(j.at("split"), "split", {"train", "test"});
    cfg.train_count = j.at("split").at("train").get<int>();
    cfg.test_count = j.at("split").at("test").get<int>();

    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, "model", {"k", "emb_hidden", "int_hidden", "activation", "embed_dims"});
      cfg.model.k = m.value("k", cfg.model.k);
      if (m.contains("emb_hidden"))
        cfg.model.emb_hidden = m.at("emb_hidden").get<std::vector<int>>();
      if (m.contains("int_hidden"))
        cfg.model.int_hidden = m.at("int_hidden").get<std::vector<int>>();
      if (m.contains("activation"))
        cfg.model.activation = parse_activation(m.at("activation").get<std::string>());
      if (m.contains("embed_dims"))
        cfg.model.embed_dims = m.at("embed_dims").get<std::vector<int>>();
    }
    if (j.contains("optim")) {
      const auto& o = j.at("optim");
      check_keys(o, "optim",
                 {"lr", "beta1", "beta2", "eps", "weight_decay", "batch_snapshots", "epochs", "seed"});
      cfg.optim.lr = o.value("lr", cfg.optim.lr);
      cfg.optim.beta1 = o.value("beta1", cfg.optim.beta1);
      cfg.optim.beta2 = o.value("beta2", cfg.optim.beta2);
      cfg.optim.eps = o.value("eps", cfg.optim.eps);
      cfg.optim.weight_decay = o.value("weight_decay", cfg.optim.weight_decay);
      cfg.optim.batch_snapshots = o.value("batch_snapshots", cfg.optim.batch_snapshots);
      cfg.optim.epochs = o.value("epochs", cfg.optim.epochs);
      cfg.optim.seed = o.value("seed", cfg.optim.seed);
    }
    if (j.contains("eval")) {
      const auto& e = j.at("eval");
      check_keys(e, "eval", {"grid", "bandwidth", "times", "n_proj"});
      cfg.eval.grid = e.value("grid", cfg.eval.grid);
      cfg.eval.bandwidth = e.value("bandwidth", cfg.eval.bandwidth);
      if (e.contains("times")) cfg.eval.times = e.at("times").get<std::vector<double>>();
      cfg.eval.n_proj = e.value("n_proj", cfg.eval.n_proj);
    }
    if (j.contains("chaos")) {
      const auto& c = j.at("chaos");
      check_keys(c, "chaos", {"ladder", "n_rep"});
      if (c.contains("ladder")) cfg.chaos.ladder = c.at("ladder").get<std::vector<int>>();
      cfg.chaos.n_rep = c.value("n_rep", cfg.chaos.n_rep);
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string config_hash(const ExperimentConfig& config) {
  json j{{"system", system_to_json(config.system)},
         {"init", init_to_json(config.init)},
         {"N", config.num_particles},
         {"M", config.num_trajectories},
         {"L", config.num_steps},
         {"dt", config.dt},
         {"split", {{"train", config.train_count}, {"test", config.test_count}}},
         {"model",
          {{"k", config.model.k},
           {"emb_hidden", config.model.emb_hidden},
           {"int_hidden", config.model.int_hidden},
           {"activation", config.model.activation == Activation::kRelu ? "relu" : "tanh"},
           {"embed_dims", config.model.embed_dims}}},
         {"optim",
          {{"lr", config.optim.lr},
           {"beta1", config.optim.beta1},
           {"beta2", config.optim.beta2},
           {"eps", config.optim.eps},
           {"weight_decay", config.optim.weight_decay},
           {"batch_snapshots", config.optim.batch_snapshots},
           {"epochs", config.optim.epochs},
           {"seed", config.optim.seed}}},
         {"seed", config.seed}};
  const std::string text = j.dump();
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001B3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace meanfield
