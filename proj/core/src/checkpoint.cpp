#include <cstring>

#include "binary_io.hpp"
#include "crda/nn.hpp"

namespace crda {

void save_ckpt(const Model& model, const std::filesystem::path& path) {
  io::Writer w;
  w.bytes("CKPT", 4);
  w.u64(model.architecture_hash());
  w.str(std::string(role_name(model.role())));
  const auto params = model.parameters();
  w.u32(static_cast<std::uint32_t>(params.size()));
  for (const Tensor* t : params) {
    w.u64(t->size());
    for (double v : t->data()) w.f64(v);
  }
  w.write_file(path);
}

Role load_ckpt(Model& model, const std::filesystem::path& path) {
  io::Reader r(io::read_file(path), path.string());
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, "CKPT", 4) != 0) throw FormatError(path.string() + ": bad magic");
  const std::uint64_t hash = r.u64();
  if (hash != model.architecture_hash()) {
    throw FormatError(path.string() + ": architecture hash mismatch");
  }
  const std::string role_tag = r.str();
  const auto role = parse_role(role_tag);
  if (!role) throw FormatError(path.string() + ": unknown role tag '" + role_tag + "'");
  auto params = model.parameters();
  if (r.u32() != params.size()) throw FormatError(path.string() + ": parameter blob count mismatch");
  // Decode into scratch first so a truncated file leaves the model untouched.
  std::vector<std::vector<double>> blobs;
  for (Tensor* t : params) {
    if (r.u64() != t->size()) throw FormatError(path.string() + ": parameter blob size mismatch");
    std::vector<double> blob(t->size());
    for (double& v : blob) v = r.f64();
    blobs.push_back(std::move(blob));
  }
  for (std::size_t i = 0; i < params.size(); ++i) std::copy(blobs[i].begin(), blobs[i].end(), params[i]->raw());
  return *role;
}

}  // namespace crda
