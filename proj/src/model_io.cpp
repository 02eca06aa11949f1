#include "tnad/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include <zlib.h>

#include "tnad/errors.hpp"

namespace tnad {

namespace {

constexpr char kMagic[4] = {'T', 'N', 'A', 'D'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    buf_.insert(buf_.end(), b, b + n);
  }
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void tensor(const DenseTensor& t) {
    for (double x : t.data()) f64(x);
  }
  std::vector<std::uint8_t> take() { return std::move(buf_); }
  const std::vector<std::uint8_t>& view() const { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw DataError("model file truncated at byte " + std::to_string(pos_));
  }
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return std::bit_cast<double>(v);
  }
  DenseTensor tensor(Shape shape) {
    DenseTensor t(std::move(shape));
    need(8 * t.size());
    for (double& x : t.data()) x = f64();
    return t;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

// Reasonable ceiling on any stored extent, so corrupt headers cannot trigger huge allocations.
constexpr std::uint32_t kMaxExtent = 1u << 16;

std::uint32_t checked_extent(std::uint32_t v, const char* what) {
  if (v == 0 || v > kMaxExtent) throw DataError(std::string("model file has an invalid ") + what);
  return v;
}

}  // namespace

const char* to_string(ModelKind kind) { return kind == ModelKind::mps ? "mps" : "ttn"; }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "mps") return ModelKind::mps;
  if (name == "ttn") return ModelKind::ttn;
  throw ArgumentError("unknown model kind '" + name + "' (expected mps or ttn)");
}

const TensorTree& AnomalyModel::tree() const {
  return std::visit([](const auto& m) -> const TensorTree& { return m.tree(); }, network);
}

TensorTree& AnomalyModel::tree() {
  return std::visit([](auto& m) -> TensorTree& { return m.tree(); }, network);
}

std::size_t AnomalyModel::num_features() const { return tree().num_input_slots(); }

std::size_t AnomalyModel::padding() const { return tree().num_slots() - tree().num_input_slots(); }

std::vector<std::uint8_t> serialize_model(const AnomalyModel& model) {
  const TensorTree& tree = model.tree();
  const std::size_t l = model.num_features();
  const auto& rescaler = model.encoder.rescaler();
  if (rescaler.num_features() != l) throw ArgumentError("encoder and network disagree on the feature count");
  if (model.encoder.n_functions() != tree.phys_dim()) throw ArgumentError("encoder N differs from the network");

  Writer w;
  w.bytes(kMagic, 4);
  w.u32(kModelFormatVersion);
  w.u8(static_cast<std::uint8_t>(model.kind()));
  w.u32(static_cast<std::uint32_t>(l));
  w.u32(static_cast<std::uint32_t>(tree.phys_dim()));
  w.u32(static_cast<std::uint32_t>(model.padding()));
  for (std::size_t i = 0; i < l; ++i) {
    w.f64(rescaler.min(i));
    w.f64(rescaler.max(i));
  }
  if (model.kind() == ModelKind::mps) {
    const auto& mps = std::get<MpsModel>(model.network);
    w.u32(static_cast<std::uint32_t>(mps.center()));
    for (std::size_t d : mps.bond_dims()) w.u32(static_cast<std::uint32_t>(d));
  } else {
    const auto& ttn = std::get<TtnModel>(model.network);
    w.u32(static_cast<std::uint32_t>(tree.num_nodes()));
    w.u32(static_cast<std::uint32_t>(ttn.center()));
    for (int p : ttn.parents()) w.i32(p);
    for (int i = 0; i < static_cast<int>(tree.num_nodes()); ++i) {
      const int p = ttn.parent(i);
      w.u32(p < 0 ? 0u : static_cast<std::uint32_t>(tree.bond_dim(i, p)));
    }
  }
  for (int i = 0; i < static_cast<int>(tree.num_nodes()); ++i) w.tensor(tree.node(i).tensor);
  w.u32(crc_of(w.view()));
  return w.take();
}

AnomalyModel deserialize_model(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw DataError("not a model file (bad magic)");
  if (bytes.size() < 4 + 4 + 1 + 12 + 4) throw DataError("model file truncated");
  const auto body = bytes.first(bytes.size() - 4);
  Reader tail(bytes.last(4));
  if (tail.u32() != crc_of(body)) throw DataError("model file checksum mismatch");

  Reader r(body);
  r.need(4);
  for (int i = 0; i < 4; ++i) r.u8();
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) throw DataError("unsupported model format version " + std::to_string(version));
  const std::uint8_t kind = r.u8();
  if (kind > 1) throw DataError("unknown model kind byte " + std::to_string(kind));
  const std::size_t l = checked_extent(r.u32(), "feature count");
  const std::size_t n = checked_extent(r.u32(), "physical dimension");
  const std::uint32_t padding = r.u32();
  std::vector<double> mins(l), maxs(l);
  for (std::size_t i = 0; i < l; ++i) {
    mins[i] = r.f64();
    maxs[i] = r.f64();
  }

  AnomalyModel model;
  try {
    model.encoder = LegendreFeatureMap(n, FeatureRescaler(std::move(mins), std::move(maxs)));
    if (kind == 0) {
      if (padding != 0) throw DataError("MPS model with padding");
      const std::size_t center = r.u32();
      std::vector<std::size_t> bonds{1};
      for (std::size_t i = 0; i + 1 < l; ++i) bonds.push_back(checked_extent(r.u32(), "bond dimension"));
      bonds.push_back(1);
      if (center >= l) throw DataError("MPS center out of range");
      std::vector<TreeNode> nodes;
      for (std::size_t i = 0; i < l; ++i) {
        const int si = static_cast<int>(i);
        nodes.push_back({r.tensor({bonds[i], n, bonds[i + 1]}),
                         {i == 0 ? AxisLabel::dummy() : AxisLabel::bond(si - 1), AxisLabel::physical(si),
                          i + 1 == l ? AxisLabel::dummy() : AxisLabel::bond(si + 1)}});
      }
      model.network = MpsModel(TensorTree(std::move(nodes), n, l, static_cast<int>(center)));
    } else {
      if (padding > 1 || (l + padding) % 2 != 0) throw DataError("TTN padding inconsistent with feature count");
      const std::size_t count = checked_extent(r.u32(), "node count");
      const std::size_t center = r.u32();
      if (center >= count) throw DataError("TTN center out of range");
      std::vector<int> parent(count);
      std::vector<std::size_t> bond(count);
      for (auto& p : parent) p = r.i32();
      for (auto& b : bond) b = r.u32();
      std::vector<std::vector<int>> children(count);
      for (std::size_t i = 0; i < count; ++i) {
        if ((i == 0) != (parent[i] < 0)) throw DataError("TTN parent array must have exactly the root at 0");
        if (i > 0) {
          if (parent[i] >= static_cast<int>(i)) throw DataError("TTN nodes not in pre-order");
          checked_extent(static_cast<std::uint32_t>(bond[i]), "bond dimension");
          children[static_cast<std::size_t>(parent[i])].push_back(static_cast<int>(i));
        }
      }
      std::vector<TreeNode> nodes;
      int leaf = 0;
      for (std::size_t i = 0; i < count; ++i) {
        TreeNode node;
        Shape shape;
        if (parent[i] >= 0) {
          node.axes.push_back(AxisLabel::bond(parent[i]));
          shape.push_back(bond[i]);
        }
        if (children[i].empty()) {
          node.axes.push_back(AxisLabel::physical(2 * leaf));
          node.axes.push_back(AxisLabel::physical(2 * leaf + 1));
          shape.push_back(n);
          shape.push_back(n);
          ++leaf;
        } else {
          if (children[i].size() != 2) throw DataError("TTN node " + std::to_string(i) + " is not binary");
          for (int c : children[i]) {
            node.axes.push_back(AxisLabel::bond(c));
            shape.push_back(bond[static_cast<std::size_t>(c)]);
          }
        }
        node.tensor = r.tensor(std::move(shape));
        nodes.push_back(std::move(node));
      }
      const std::size_t slots = 2 * static_cast<std::size_t>(leaf);
      if (slots != l + padding) throw DataError("TTN leaf count does not match the feature count");
      TensorTree tree(std::move(nodes), n, slots, static_cast<int>(center));
      if (padding == 1) tree.fix_slot(slots - 1, legendre_basis(n, 0.5));
      model.network = TtnModel(std::move(tree), l);
    }
  } catch (const DataError&) {
    throw;
  } catch (const Error& e) {
    throw DataError(std::string("invalid model file: ") + e.what());
  }
  if (r.pos() != body.size()) throw DataError("model file has trailing bytes");
  return model;
}

void save_model(const AnomalyModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path);
}

AnomalyModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace tnad
