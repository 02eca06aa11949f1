#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tnad/legendre.hpp"
#include "tnad/mps.hpp"
#include "tnad/ttn.hpp"

namespace tnad {

enum class ModelKind : std::uint8_t { mps = 0, ttn = 1 };

const char* to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// A trained network together with the encoder it was trained with.
struct AnomalyModel {
  std::variant<MpsModel, TtnModel> network;
  LegendreFeatureMap encoder;

  ModelKind kind() const noexcept { return network.index() == 0 ? ModelKind::mps : ModelKind::ttn; }
  const TensorTree& tree() const;
  TensorTree& tree();
  std::size_t num_features() const;
  std::size_t padding() const;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

/// Binary layout, all integers little-endian:
///   "TNAD" | u32 version | u8 kind | u32 L | u32 N | u32 padding
///   | L x (f64 min, f64 max)
///   | MPS: u32 center, (L-1) x u32 bond
///     TTN: u32 nodes, u32 center, nodes x i32 parent (-1 root), nodes x u32 parent bond (0 root)
///   | cores as f64 row-major (site order, or pre-order for trees)
///   | u32 CRC32 of everything before it
std::vector<std::uint8_t> serialize_model(const AnomalyModel& model);
/// Throws DataError on a malformed, truncated or corrupted buffer.
AnomalyModel deserialize_model(std::span<const std::uint8_t> bytes);

void save_model(const AnomalyModel& model, const std::string& path);
AnomalyModel load_model(const std::string& path);

}  // namespace tnad
