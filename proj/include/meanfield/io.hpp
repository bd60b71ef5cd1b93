#ifndef MEANFIELD_IO_HPP
#define MEANFIELD_IO_HPP

#include <nlohmann/json_fwd.hpp>
#include <string>

#include "meanfield/data.hpp"
#include "meanfield/mvnn.hpp"
#include "meanfield/system.hpp"

namespace meanfield {

// JSON encodings shared by the trajectory header, checkpoints, and configs.
nlohmann::json kernel_to_json(const KernelSpec& spec);
KernelSpec kernel_from_json(const nlohmann::json& j);
nlohmann::json system_to_json(const SystemSpec& spec);
SystemSpec system_from_json(const nlohmann::json& j);
nlohmann::json init_to_json(const InitSpec& spec);
InitSpec init_from_json(const nlohmann::json& j);

// Trajectory binary format "MVNT" v1:
//   magic "MVNT", u32 version, u32 order, u32 d, u32 K, u32 group_sizes[K],
//   u32 L, f64 dt, f64 sigma, u64 seed, u32 json_len, SystemSpec JSON blob,
//   then per snapshot (time-major) the positions as N*d little-endian f64
//   (particle-major, coordinate-major), followed by velocities likewise when
//   order = 2.
void write_trajectory(const std::string& path, const Trajectory& traj);
Trajectory read_trajectory(const std::string& path);

// Checkpoint JSON: format_version 1, activation, per-network layer dims and
// row-major weights/biases, plus model metadata.
void write_checkpoint(const std::string& path, const MvnnModel& model,
                      const std::string& config_hash = "");
void write_checkpoint(const std::string& path, const MgMvnnModel& model,
                      const std::string& config_hash = "");
// Empty when the checkpoint carries no hash.
std::string checkpoint_config_hash(const std::string& path);
MvnnModel read_mvnn_checkpoint(const std::string& path);
MgMvnnModel read_mg_checkpoint(const std::string& path);
// "mvnn", "mvnn2", or "mg_mvnn".
std::string checkpoint_kind(const std::string& path);

}  // namespace meanfield

#endif
