#include "supermask/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "supermask/errors.hpp"

namespace supermask {

namespace {

constexpr char kMagic[4] = {'S', 'M', 'C', 'K'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& buffer() { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() { return *take(1); }
  std::uint32_t u32() {
    const auto* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    const auto* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  const std::uint8_t* take(std::size_t n) {
    if (n > size_ - pos_) throw FormatError("checkpoint truncated at byte " + std::to_string(pos_));
    const auto* p = data_ + pos_;
    pos_ += n;
    return p;
  }
  std::size_t position() const { return pos_; }
  bool done() const { return pos_ == size_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::vector<std::uint8_t> encode_payload(const Container::Payload& p, std::uint8_t& kind) {
  Writer w;
  if (const auto* a = std::get_if<DenseArray<float>>(&p)) {
    kind = 0;
    w.u32(static_cast<std::uint32_t>(a->rank()));
    for (Index d : a->shape()) w.u32(static_cast<std::uint32_t>(d));
    for (Index i = 0; i < a->size(); ++i) w.f32((*a)[i]);
  } else if (const auto* t = std::get_if<std::string>(&p)) {
    kind = 1;
    w.bytes(t->data(), t->size());
  } else {
    const auto& v = std::get<std::vector<std::int32_t>>(p);
    kind = 2;
    w.u32(static_cast<std::uint32_t>(v.size()));
    for (std::int32_t x : v) w.u32(static_cast<std::uint32_t>(x));
  }
  return std::move(w.buffer());
}

Container::Payload decode_payload(std::uint8_t kind, const std::uint8_t* data, std::size_t size,
                                  const std::string& name) {
  Reader r(data, size);
  Container::Payload out;
  switch (kind) {
    case 0: {
      const std::uint32_t rank = r.u32();
      Shape shape;
      for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(static_cast<Index>(r.u32()));
      DenseArray<float> a(shape);
      for (Index i = 0; i < a.size(); ++i) a[i] = r.f32();
      out = std::move(a);
      break;
    }
    case 1:
      out = std::string(reinterpret_cast<const char*>(data), size);
      r.take(size);
      break;
    case 2: {
      std::vector<std::int32_t> v(r.u32());
      for (auto& x : v) x = static_cast<std::int32_t>(r.u32());
      out = std::move(v);
      break;
    }
    default:
      throw FormatError("section '" + name + "' has unknown kind " + std::to_string(kind));
  }
  if (!r.done()) throw FormatError("section '" + name + "' has trailing bytes");
  return out;
}

std::string layer_key(std::size_t i, const char* what) { return "layer." + std::to_string(i) + "." + what; }

}  // namespace

void Container::put(std::string name, Payload payload) {
  for (auto& s : sections_)
    if (s.name == name) {
      s.payload = std::move(payload);
      return;
    }
  sections_.push_back({std::move(name), std::move(payload)});
}

const Container::Section* Container::find(const std::string& name) const {
  for (const auto& s : sections_)
    if (s.name == name) return &s;
  return nullptr;
}

const DenseArray<float>& Container::array(const std::string& name) const {
  const auto* s = find(name);
  if (!s || !std::holds_alternative<DenseArray<float>>(s->payload))
    throw FormatError("checkpoint has no array section '" + name + "'");
  return std::get<DenseArray<float>>(s->payload);
}

const std::string& Container::text(const std::string& name) const {
  const auto* s = find(name);
  if (!s || !std::holds_alternative<std::string>(s->payload))
    throw FormatError("checkpoint has no text section '" + name + "'");
  return std::get<std::string>(s->payload);
}

const std::vector<std::int32_t>& Container::ints(const std::string& name) const {
  const auto* s = find(name);
  if (!s || !std::holds_alternative<std::vector<std::int32_t>>(s->payload))
    throw FormatError("checkpoint has no integer section '" + name + "'");
  return std::get<std::vector<std::int32_t>>(s->payload);
}

std::vector<std::uint8_t> Container::encode() const {
  Writer w;
  w.bytes(kMagic, 4);
  w.u8(kVersion);
  w.u32(static_cast<std::uint32_t>(sections_.size()));
  for (const auto& s : sections_) {
    w.u32(static_cast<std::uint32_t>(s.name.size()));
    w.bytes(s.name.data(), s.name.size());
    std::uint8_t kind = 0;
    const auto payload = encode_payload(s.payload, kind);
    w.u8(kind);
    w.u64(payload.size());
    w.bytes(payload.data(), payload.size());
  }
  return std::move(w.buffer());
}

Container Container::decode(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes.data(), bytes.size());
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError("not a checkpoint: bad magic");
  const std::uint8_t version = r.u8();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Container c;
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint32_t name_len = r.u32();
    const auto* name_bytes = r.take(name_len);
    std::string name(reinterpret_cast<const char*>(name_bytes), name_len);
    const std::uint8_t kind = r.u8();
    const std::uint64_t len = r.u64();
    if (len > bytes.size()) throw FormatError("section '" + name + "' length exceeds file size");
    const auto* payload = r.take(static_cast<std::size_t>(len));
    c.sections_.push_back({name, decode_payload(kind, payload, static_cast<std::size_t>(len), name)});
  }
  if (!r.done()) throw FormatError("trailing bytes after last checkpoint section");
  return c;
}

void Container::save(const std::filesystem::path& path) const {
  const auto bytes = encode();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Container Container::load(const std::filesystem::path& path) { return decode(read_bytes(path)); }

Container network_checkpoint(const Network<Real>& net, const std::string& config_echo) {
  Container c;
  c.put("config", config_echo);
  const auto layers = net.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = *layers[i];
    c.put(layer_key(i, "weights"), l.weights());
    if (l.bias) c.put(layer_key(i, "bias"), l.bias->value());
    c.put(layer_key(i, "mask"), l.mask.values());
    if (l.rescale.strategy == RescaleStrategy::smart) c.put(layer_key(i, "scale"), l.rescale.factor.value());
  }
  return c;
}

void restore_network(Network<Real>& net, const Container& c) {
  auto layers = net.layers();
  auto load = [&](const std::string& key, DenseArray<Real>& into) {
    const auto& a = c.array(key);
    if (a.shape() != into.shape())
      throw FormatError("section '" + key + "' has shape " + shape_string(a.shape()) + ", network expects " +
                        shape_string(into.shape()));
    into = a;
  };
  for (std::size_t i = 0; i < layers.size(); ++i) {
    auto& l = *layers[i];
    load(layer_key(i, "weights"), l.frozen_weights.mutable_value());
    if (l.bias) load(layer_key(i, "bias"), l.bias->mutable_value());
    load(layer_key(i, "mask"), l.mask.mutable_values());
    if (l.rescale.strategy == RescaleStrategy::smart) load(layer_key(i, "scale"), l.rescale.factor.mutable_value());
  }
  if (c.contains(layer_key(layers.size(), "weights")))
    throw FormatError("checkpoint has more layers than the network");
}

void put_dataset(Container& c, const std::string& prefix, const LabeledDataset& d) {
  c.put(prefix + ".images", d.images);
  c.put(prefix + ".labels", std::vector<std::int32_t>(d.labels.begin(), d.labels.end()));
}

LabeledDataset get_dataset(const Container& c, const std::string& prefix, Split split) {
  LabeledDataset d;
  d.images = c.array(prefix + ".images");
  const auto& labels = c.ints(prefix + ".labels");
  d.labels.assign(labels.begin(), labels.end());
  d.split = split;
  if (d.images.dim(0) != d.size()) throw FormatError("dataset '" + prefix + "' image/label count mismatch");
  return d;
}

}  // namespace supermask
