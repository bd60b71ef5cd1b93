#include "meanfield/io.hpp"

#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>

#include "meanfield/errors.hpp"

namespace meanfield {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'M', 'V', 'N', 'T'};
constexpr std::uint32_t kTrajectoryVersion = 1;
constexpr int kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw FormatError("trajectory file truncated");
  return value;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  // Column-major d x N storage is particle-major, coordinate-major on disk.
  out.write(reinterpret_cast<const char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
}

void read_matrix(std::istream& in, Eigen::MatrixXd& m) {
  in.read(reinterpret_cast<char*>(m.data()),
          static_cast<std::streamsize>(sizeof(double) * m.size()));
  if (!in) throw FormatError("trajectory file truncated");
}

}  // namespace

json kernel_to_json(const KernelSpec& spec) {
  return std::visit(
      [](const auto& k) -> json {
        using T = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<T, GaussianKernel>) {
          return {{"type", "gaussian"}, {"length", k.length}};
        } else if constexpr (std::is_same_v<T, AttractionRepulsionKernel>) {
          return {{"type", "attraction_repulsion"},
                  {"c_rep", k.c_rep},
                  {"l_rep", k.l_rep},
                  {"c_att", k.c_att},
                  {"l_att", k.l_att}};
        } else {
          return {{"type", "compact_bump"},
                  {"strength", k.strength},
                  {"radius", k.radius},
                  {"exponent", k.exponent}};
        }
      },
      spec);
}

KernelSpec kernel_from_json(const json& j) {
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian") return GaussianKernel{j.at("length").get<double>()};
  if (type == "attraction_repulsion")
    return AttractionRepulsionKernel{j.at("c_rep").get<double>(), j.at("l_rep").get<double>(),
                                     j.at("c_att").get<double>(), j.at("l_att").get<double>()};
  if (type == "compact_bump")
    return CompactBumpKernel{j.at("strength").get<double>(), j.at("radius").get<double>(),
                             j.at("exponent").get<int>()};
  throw FormatError("unknown kernel type: " + type);
}

namespace {

const char* drift_form_name(DriftForm f) {
  switch (f) {
    case DriftForm::kPairwisePosition: return "pairwise_position";
    case DriftForm::kMotschTadmor: return "motsch_tadmor";
    case DriftForm::kCuckerSmale: return "cucker_smale";
    case DriftForm::kMultigroup: return "multigroup";
    case DriftForm::kLearned: return "learned";
  }
  throw ConfigError("unknown drift form");
}

DriftForm drift_form_from_name(const std::string& name) {
  if (name == "pairwise_position") return DriftForm::kPairwisePosition;
  if (name == "motsch_tadmor") return DriftForm::kMotschTadmor;
  if (name == "cucker_smale") return DriftForm::kCuckerSmale;
  if (name == "multigroup") return DriftForm::kMultigroup;
  if (name == "learned") return DriftForm::kLearned;
  throw FormatError("unknown drift form: " + name);
}

}  // namespace

json system_to_json(const SystemSpec& spec) {
  json j{{"order", spec.order == Order::kFirst ? 1 : 2},
         {"dimension", spec.dimension},
         {"drift_form", drift_form_name(spec.drift_form)},
         {"kernel", kernel_to_json(spec.kernel)},
         {"sigma", spec.sigma}};
  if (spec.multigroup) {
    const auto& mg = *spec.multigroup;
    json influence = json::array();
    for (int r = 0; r < mg.influence.rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < mg.influence.cols(); ++c) row.push_back(mg.influence(r, c));
      influence.push_back(row);
    }
    j["multigroup"] = {{"group_sizes", mg.group_sizes},
                       {"influence", influence},
                       {"radii", mg.radii},
                       {"exponent", mg.exponent},
                       {"sign", mg.sign}};
  }
  return j;
}

SystemSpec system_from_json(const json& j) {
  SystemSpec spec;
  spec.order = j.at("order").get<int>() == 2 ? Order::kSecond : Order::kFirst;
  spec.dimension = j.at("dimension").get<int>();
  spec.drift_form = drift_form_from_name(j.at("drift_form").get<std::string>());
  spec.kernel = kernel_from_json(j.at("kernel"));
  spec.sigma = j.at("sigma").get<double>();
  if (j.contains("multigroup")) {
    const auto& m = j.at("multigroup");
    MultigroupSpec mg;
    mg.group_sizes = m.at("group_sizes").get<std::vector<int>>();
    const auto rows = m.at("influence");
    const int k = static_cast<int>(rows.size());
    mg.influence.resize(k, k);
    for (int r = 0; r < k; ++r)
      for (int c = 0; c < k; ++c) mg.influence(r, c) = rows[r][c].get<double>();
    mg.radii = m.at("radii").get<std::vector<double>>();
    mg.exponent = m.value("exponent", 10);
    mg.sign = m.value("sign", 1.0);
    spec.multigroup = std::move(mg);
  }
  return spec;
}

json init_to_json(const InitSpec& spec) {
  json j = std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, GaussianMixtureInit>) {
          return {{"type", "gaussian_mixture"},
                  {"min_components", p.min_components},
                  {"max_components", p.max_components},
                  {"mean_lo", p.mean_lo},
                  {"mean_hi", p.mean_hi},
                  {"variance", p.variance}};
        } else if constexpr (std::is_same_v<T, AnnulusInit>) {
          return {{"type", "annulus"},   {"radius", p.radius},
                  {"width", p.width},    {"noise", p.noise},
                  {"center_x", p.center_x}, {"center_y", p.center_y}};
        } else if constexpr (std::is_same_v<T, DoubleAnnulusInit>) {
          return {{"type", "double_annulus"},
                  {"first", init_to_json(InitSpec{p.first, {}})},
                  {"second", init_to_json(InitSpec{p.second, {}})}};
        } else if constexpr (std::is_same_v<T, DiskInit>) {
          return {{"type", "disk"},
                  {"radius", p.radius},
                  {"center_x", p.center_x},
                  {"center_y", p.center_y}};
        } else if constexpr (std::is_same_v<T, BinaryAsymmetricInit>) {
          return {{"type", "binary_asymmetric"},
                  {"left_fraction", p.left_fraction},
                  {"left_box", {p.left_lo_x, p.left_hi_x, p.left_lo_y, p.left_hi_y}},
                  {"right_box", {p.right_lo_x, p.right_hi_x, p.right_lo_y, p.right_hi_y}}};
        } else if constexpr (std::is_same_v<T, ScaledGaussianInit>) {
          return {{"type", "scaled_gaussian"},
                  {"mean", p.mean},
                  {"sigma", p.sigma},
                  {"s_min", p.s_min},
                  {"s_max", p.s_max}};
        } else {
          return {{"type", "scaled_gaussian_mixture2"},
                  {"first", init_to_json(InitSpec{p.first, {}})},
                  {"second", init_to_json(InitSpec{p.second, {}})}};
        }
      },
      spec.position);
  if (spec.velocity) j["velocity_variance"] = spec.velocity->variance;
  return j;
}

InitSpec init_from_json(const json& j) {
  InitSpec spec;
  const std::string type = j.at("type").get<std::string>();
  if (type == "gaussian_mixture") {
    GaussianMixtureInit p;
    p.min_components = j.value("min_components", p.min_components);
    p.max_components = j.value("max_components", p.max_components);
    p.mean_lo = j.value("mean_lo", p.mean_lo);
    p.mean_hi = j.value("mean_hi", p.mean_hi);
    p.variance = j.value("variance", p.variance);
    spec.position = p;
  } else if (type == "annulus") {
    AnnulusInit p;
    p.radius = j.value("radius", p.radius);
    p.width = j.value("width", p.width);
    p.noise = j.value("noise", p.noise);
    p.center_x = j.value("center_x", p.center_x);
    p.center_y = j.value("center_y", p.center_y);
    spec.position = p;
  } else if (type == "double_annulus") {
    DoubleAnnulusInit p;
    p.first = std::get<AnnulusInit>(init_from_json(j.at("first")).position);
    p.second = std::get<AnnulusInit>(init_from_json(j.at("second")).position);
    spec.position = p;
  } else if (type == "disk") {
    DiskInit p;
    p.radius = j.value("radius", p.radius);
    p.center_x = j.value("center_x", p.center_x);
    p.center_y = j.value("center_y", p.center_y);
    spec.position = p;
  } else if (type == "binary_asymmetric") {
    BinaryAsymmetricInit p;
    p.left_fraction = j.value("left_fraction", p.left_fraction);
    if (j.contains("left_box")) {
      const auto& b = j.at("left_box");
      p.left_lo_x = b[0]; p.left_hi_x = b[1]; p.left_lo_y = b[2]; p.left_hi_y = b[3];
    }
    if (j.contains("right_box")) {
      const auto& b = j.at("right_box");
      p.right_lo_x = b[0]; p.right_hi_x = b[1]; p.right_lo_y = b[2]; p.right_hi_y = b[3];
    }
    spec.position = p;
  } else if (type == "scaled_gaussian") {
    ScaledGaussianInit p;
    p.mean = j.at("mean").get<std::vector<double>>();
    p.sigma = j.value("sigma", p.sigma);
    p.s_min = j.value("s_min", p.s_min);
    p.s_max = j.value("s_max", p.s_max);
    spec.position = p;
  } else if (type == "scaled_gaussian_mixture2") {
    ScaledGaussianMixture2Init p;
    p.first = std::get<ScaledGaussianInit>(init_from_json(j.at("first")).position);
    p.second = std::get<ScaledGaussianInit>(init_from_json(j.at("second")).position);
    spec.position = p;
  } else {
    throw FormatError("unknown init type: " + type);
  }
  if (j.contains("velocity_variance"))
    spec.velocity = VelocityInit{j.at("velocity_variance").get<double>()};
  return spec;
}

void write_trajectory(const std::string& path, const Trajectory& traj) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out.write(kMagic, 4);
  write_pod<std::uint32_t>(out, kTrajectoryVersion);
  write_pod<std::uint32_t>(out, traj.spec.order == Order::kFirst ? 1 : 2);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(traj.spec.dimension));
  const auto& groups = traj.spec.multigroup ? traj.spec.multigroup->group_sizes
                                            : std::vector<int>{};
  std::uint32_t num_groups = static_cast<std::uint32_t>(groups.size());
  if (num_groups == 0) {
    num_groups = 1;
    write_pod<std::uint32_t>(out, 1);
    write_pod<std::uint32_t>(out,
                             static_cast<std::uint32_t>(traj.states.front().num_particles()));
  } else {
    write_pod<std::uint32_t>(out, num_groups);
    for (int g : groups) write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(g));
  }
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(traj.num_steps()));
  write_pod<double>(out, traj.dt);
  write_pod<double>(out, traj.spec.sigma);
  write_pod<std::uint64_t>(out, traj.seed);
  json blob_json = system_to_json(traj.spec);
  if (!traj.config_hash.empty()) blob_json["config_hash"] = traj.config_hash;
  const std::string blob = blob_json.dump();
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(blob.size()));
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  const bool second = traj.spec.order == Order::kSecond;
  for (const auto& state : traj.states) {
    write_matrix(out, state.positions);
    if (second) write_matrix(out, *state.velocities);
  }
  if (!out) throw FormatError("write failed: " + path);
}

Trajectory read_trajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw FormatError("bad magic bytes: " + path);
  const auto version = read_pod<std::uint32_t>(in);
  if (version > kTrajectoryVersion)
    throw FormatError("unsupported trajectory version " + std::to_string(version));
  const auto order = read_pod<std::uint32_t>(in);
  if (order != 1 && order != 2) throw FormatError("bad order field");
  const auto d = read_pod<std::uint32_t>(in);
  const auto num_groups = read_pod<std::uint32_t>(in);
  std::vector<int> groups(num_groups);
  std::uint64_t n = 0;
  for (auto& g : groups) {
    g = static_cast<int>(read_pod<std::uint32_t>(in));
    n += static_cast<std::uint64_t>(g);
  }
  const auto num_steps = read_pod<std::uint32_t>(in);
  const double dt = read_pod<double>(in);
  const double sigma = read_pod<double>(in);
  const auto seed = read_pod<std::uint64_t>(in);
  const auto blob_len = read_pod<std::uint32_t>(in);
  std::string blob(blob_len, '\0');
  in.read(blob.data(), blob_len);
  if (!in) throw FormatError("trajectory file truncated");

  Trajectory traj;
  try {
    const json blob_json = json::parse(blob);
    traj.spec = system_from_json(blob_json);
    traj.config_hash = blob_json.value("config_hash", "");
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad system spec blob: ") + e.what());
  }
  traj.dt = dt;
  traj.seed = seed;
  traj.spec.sigma = sigma;
  const bool second = order == 2;
  traj.states.resize(num_steps + 1);
  for (auto& state : traj.states) {
    state.positions.resize(d, n);
    read_matrix(in, state.positions);
    if (second) {
      Eigen::MatrixXd vel(d, n);
      read_matrix(in, vel);
      state.velocities = std::move(vel);
    }
    if (num_groups > 1) state.group_sizes = groups;
  }
  return traj;
}

namespace {

json mlp_to_json(const MlpParams& p) {
  json weights = json::array();
  json biases = json::array();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    json w = json::array();
    for (int r = 0; r < p.weights[l].rows(); ++r) {
      json row = json::array();
      for (int c = 0; c < p.weights[l].cols(); ++c) row.push_back(p.weights[l](r, c));
      w.push_back(row);
    }
    weights.push_back(w);
    json b = json::array();
    for (int r = 0; r < p.biases[l].size(); ++r) b.push_back(p.biases[l](r));
    biases.push_back(b);
  }
  return {{"layer_dims", p.layer_dims}, {"weights", weights}, {"biases", biases}};
}

MlpParams mlp_from_json(const json& j, Activation activation) {
  MlpParams p;
  p.activation = activation;
  p.layer_dims = j.at("layer_dims").get<std::vector<int>>();
  const auto& weights = j.at("weights");
  const auto& biases = j.at("biases");
  for (std::size_t l = 0; l + 1 < p.layer_dims.size(); ++l) {
    const auto& w = weights.at(l);
    Eigen::MatrixXd wm(p.layer_dims[l + 1], p.layer_dims[l]);
    for (int r = 0; r < wm.rows(); ++r)
      for (int c = 0; c < wm.cols(); ++c) wm(r, c) = w.at(r).at(c).get<double>();
    p.weights.push_back(std::move(wm));
    Eigen::VectorXd bv(p.layer_dims[l + 1]);
    for (int r = 0; r < bv.size(); ++r) bv(r) = biases.at(l).at(r).get<double>();
    p.biases.push_back(std::move(bv));
  }
  return p;
}

const char* activation_name(Activation a) {
  return a == Activation::kRelu ? "relu" : "tanh";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  throw FormatError("unknown activation: " + name);
}

json load_checkpoint_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad checkpoint JSON: ") + e.what());
  }
  if (j.value("format_version", 0) != kCheckpointVersion)
    throw FormatError("unsupported checkpoint format_version");
  return j;
}

}  // namespace

void write_checkpoint(const std::string& path, const MvnnModel& model,
                      const std::string& config_hash) {
  json j{{"format_version", kCheckpointVersion},
         {"model_kind", model.order == Order::kFirst ? "mvnn" : "mvnn2"},
         {"order", model.order == Order::kFirst ? 1 : 2},
         {"d", model.d},
         {"k", model.k},
         {"activation", activation_name(model.emb.activation)},
         {"emb", mlp_to_json(model.emb)},
         {"int", mlp_to_json(model.int_net)}};
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

void write_checkpoint(const std::string& path, const MgMvnnModel& model,
                      const std::string& config_hash) {
  json embs = json::array();
  json ints = json::array();
  for (int g = 0; g < model.num_groups(); ++g) {
    embs.push_back(mlp_to_json(model.emb[g]));
    ints.push_back(mlp_to_json(model.int_nets[g]));
  }
  json j{{"format_version", kCheckpointVersion},
         {"model_kind", "mg_mvnn"},
         {"order", 1},
         {"d", model.d},
         {"embed_dims", model.embed_dims},
         {"group_count", model.num_groups()},
         {"activation", activation_name(model.emb.front().activation)},
         {"emb", embs},
         {"int", ints}};
  if (!config_hash.empty()) j["config_hash"] = config_hash;
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

std::string checkpoint_kind(const std::string& path) {
  return load_checkpoint_json(path).at("model_kind").get<std::string>();
}

std::string checkpoint_config_hash(const std::string& path) {
  return load_checkpoint_json(path).value("config_hash", "");
}

MvnnModel read_mvnn_checkpoint(const std::string& path) {
  const json j = load_checkpoint_json(path);
  const std::string kind = j.at("model_kind").get<std::string>();
  if (kind != "mvnn" && kind != "mvnn2")
    throw FormatError("checkpoint is not a single-group model: " + kind);
  MvnnModel model;
  model.order = j.at("order").get<int>() == 2 ? Order::kSecond : Order::kFirst;
  model.d = j.at("d").get<int>();
  model.k = j.at("k").get<int>();
  const Activation act = activation_from_name(j.at("activation").get<std::string>());
  model.emb = mlp_from_json(j.at("emb"), act);
  model.int_net = mlp_from_json(j.at("int"), act);
  model.validate();
  return model;
}

MgMvnnModel read_mg_checkpoint(const std::string& path) {
  const json j = load_checkpoint_json(path);
  if (j.at("model_kind").get<std::string>() != "mg_mvnn")
    throw FormatError("checkpoint is not a multigroup model");
  MgMvnnModel model;
  model.d = j.at("d").get<int>();
  model.embed_dims = j.at("embed_dims").get<std::vector<int>>();
  const Activation act = activation_from_name(j.at("activation").get<std::string>());
  for (const auto& e : j.at("emb")) model.emb.push_back(mlp_from_json(e, act));
  for (const auto& i : j.at("int")) model.int_nets.push_back(mlp_from_json(i, act));
  model.validate();
  return model;
}

}  // namespace meanfield
