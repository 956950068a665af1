/* Copyright 2026 The DVG Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "dvg/checkpoint.hpp"

#include <cstring>
#include <sstream>

#include "dvg/binary_io.hpp"
#include "dvg/error.hpp"
#include "dvg/hash.hpp"

namespace dvg::ckpt {

namespace {

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

void put_name(io::Writer& w, const std::string& name) {
  if (name.size() > 0xffff) throw ConfigError("checkpoint name too long: " + name.substr(0, 40) + "...");
  w.u16(static_cast<std::uint16_t>(name.size()));
  w.str(name);
}

void put_tensor(io::Writer& w, const Tensor& t) {
  if (t.rank() > 0xff) throw ShapeError("tensor rank above 255");
  w.u8(static_cast<std::uint8_t>(t.rank()));
  for (std::size_t d : t.shape()) w.u32(static_cast<std::uint32_t>(d));
  for (double v : t.data()) w.f64(v);
}

Tensor get_tensor(io::Reader& r) {
  const std::uint8_t rank = r.u8("tensor rank");
  Shape shape(rank);
  std::size_t numel = 1;
  for (auto& d : shape) {
    d = r.u32("tensor dim");
    numel *= d;
  }
  if (numel * 8 > r.remaining()) {
    throw FormatError(r.source() + ": tensor of " + shape_string(shape) + " overruns the file");
  }
  std::vector<double> data(numel);
  for (auto& v : data) v = r.f64("tensor data");
  return Tensor(std::move(shape), std::move(data));
}

// Appends a record and its checksum.
void seal(io::Writer& out, const io::Writer& record) {
  out.bytes(record.buffer().data(), record.size());
  out.u64(fnv1a64(std::span<const unsigned char>(record.buffer())));
}

void check(io::Reader& r, std::size_t begin, const unsigned char* base, const std::string& what) {
  const std::uint64_t expected = fnv1a64(std::span<const unsigned char>(base + begin, r.position() - begin));
  if (r.u64("checksum") != expected) throw FormatError(r.source() + ": " + what + " failed its checksum");
}

template <typename T>
const T& find(const std::vector<std::pair<std::string, T>>& list, const std::string& name, const char* what) {
  for (const auto& [n, v] : list) {
    if (n == name) return v;
  }
  throw FormatError(std::string("checkpoint has no ") + what + " record '" + name + "'");
}

}  // namespace

void Checkpoint::add_parameters(const std::vector<const Parameter*>& params) {
  for (const Parameter* p : params) tensors.emplace_back(p->name, p->value);
}

void Checkpoint::add_parameters(const std::vector<Parameter*>& params) {
  for (const Parameter* p : params) tensors.emplace_back(p->name, p->value);
}

void Checkpoint::restore_parameters(const std::vector<Parameter*>& params) const {
  for (Parameter* p : params) {
    const Tensor& t = tensor(p->name);
    if (t.shape() != p->value.shape()) {
      throw FormatError("checkpoint tensor '" + p->name + "' has shape " + shape_string(t.shape()) +
                        ", model expects " + shape_string(p->value.shape()));
    }
    p->value = t;
  }
}

const Tensor& Checkpoint::tensor(const std::string& name) const { return find(tensors, name, "tensor"); }

const OptimizerState& Checkpoint::optimizer(const std::string& name) const {
  return find(optimizers, name, "optimizer");
}

const RandomSource& Checkpoint::rng(const std::string& name) const { return find(rngs, name, "rng"); }

std::vector<unsigned char> encode(const Checkpoint& ckpt) {
  io::Writer out;
  {
    io::Writer h;
    h.bytes(kMagic, 4);
    h.u32(kVersion);
    h.u64(ckpt.config_hash);
    put_name(h, ckpt.kind);
    h.u64(ckpt.step);
    h.u32(static_cast<std::uint32_t>(ckpt.meta.size()));
    h.str(ckpt.meta);
    seal(out, h);
  }
  out.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    io::Writer rec;
    put_name(rec, name);
    put_tensor(rec, t);
    seal(out, rec);
  }
  out.u32(static_cast<std::uint32_t>(ckpt.optimizers.size()));
  for (const auto& [name, s] : ckpt.optimizers) {
    io::Writer rec;
    put_name(rec, name);
    rec.u8(static_cast<std::uint8_t>(s.kind));
    rec.f64(s.lr);
    rec.f64(s.beta1);
    rec.f64(s.beta2);
    rec.f64(s.eps);
    rec.f64(s.weight_decay);
    rec.u64(s.step);
    for (const auto* buffers : {&s.first, &s.second}) {
      rec.u32(static_cast<std::uint32_t>(buffers->size()));
      for (const Tensor& t : *buffers) put_tensor(rec, t);
    }
    seal(out, rec);
  }
  out.u32(static_cast<std::uint32_t>(ckpt.rngs.size()));
  for (const auto& [name, rng] : ckpt.rngs) {
    io::Writer rec;
    put_name(rec, name);
    put_name(rec, std::string(RandomSource::kAlgorithm));
    rec.u64(rng.seed());
    for (std::uint64_t s : rng.state()) rec.u64(s);
    seal(out, rec);
  }
  return out.buffer();
}

Checkpoint decode(const std::vector<unsigned char>& bytes, const std::string& source) {
  io::Reader r(bytes.data(), bytes.size(), source);
  const unsigned char* base = bytes.data();
  Checkpoint c;

  std::size_t begin = r.position();
  if (std::memcmp(r.raw(4, "magic"), kMagic, 4) != 0) {
    throw FormatError(source + ": bad magic, expected \"DVGC\"");
  }
  const std::uint32_t version = r.u32("version");
  if (version != kVersion) {
    throw FormatError(source + ": checkpoint version " + std::to_string(version) + ", expected " +
                      std::to_string(kVersion));
  }
  c.config_hash = r.u64("config hash");
  c.kind = r.str(r.u16("kind length"), "kind");
  c.step = r.u64("step");
  c.meta = r.str(r.u32("meta length"), "meta");
  check(r, begin, base, "header");

  const std::uint32_t n_tensors = r.u32("tensor count");
  for (std::uint32_t i = 0; i < n_tensors; ++i) {
    begin = r.position();
    std::string name = r.str(r.u16("name length"), "tensor name");
    Tensor t = get_tensor(r);
    check(r, begin, base, "tensor record '" + name + "'");
    c.tensors.emplace_back(std::move(name), std::move(t));
  }

  const std::uint32_t n_opt = r.u32("optimizer count");
  for (std::uint32_t i = 0; i < n_opt; ++i) {
    begin = r.position();
    std::string name = r.str(r.u16("name length"), "optimizer name");
    OptimizerState s;
    const std::uint8_t kind = r.u8("optimizer kind");
    if (kind > 1) throw FormatError(source + ": optimizer record '" + name + "' has unknown kind");
    s.kind = static_cast<OptimizerKind>(kind);
    s.lr = r.f64("lr");
    s.beta1 = r.f64("beta1");
    s.beta2 = r.f64("beta2");
    s.eps = r.f64("eps");
    s.weight_decay = r.f64("weight decay");
    s.step = r.u64("optimizer step");
    for (auto* buffers : {&s.first, &s.second}) {
      const std::uint32_t n = r.u32("buffer count");
      if (n > r.remaining()) throw FormatError(source + ": optimizer record '" + name + "' overruns the file");
      for (std::uint32_t k = 0; k < n; ++k) buffers->push_back(get_tensor(r));
    }
    check(r, begin, base, "optimizer record '" + name + "'");
    c.optimizers.emplace_back(std::move(name), std::move(s));
  }

  const std::uint32_t n_rng = r.u32("rng count");
  for (std::uint32_t i = 0; i < n_rng; ++i) {
    begin = r.position();
    std::string name = r.str(r.u16("name length"), "rng name");
    const std::string algorithm = r.str(r.u16("algorithm length"), "rng algorithm");
    const std::uint64_t seed = r.u64("rng seed");
    std::array<std::uint64_t, 4> state{};
    for (auto& s : state) s = r.u64("rng state");
    check(r, begin, base, "rng record '" + name + "'");
    c.rngs.emplace_back(std::move(name), RandomSource::restore(algorithm, seed, state));
  }
  if (r.remaining() != 0) {
    throw FormatError(source + ": " + std::to_string(r.remaining()) + " trailing bytes");
  }
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const auto bytes = encode(ckpt);
  io::write_file(path, bytes.data(), bytes.size());
}

Checkpoint load_checkpoint(const std::string& path, std::optional<std::uint64_t> expected_hash) {
  Checkpoint c = decode(io::read_file(path), path);
  if (expected_hash && c.config_hash != *expected_hash) {
    throw LineageError(path + ": produced by config " + hex(c.config_hash) + ", current config is " +
                       hex(*expected_hash));
  }
  return c;
}

}  // namespace dvg::ckpt
