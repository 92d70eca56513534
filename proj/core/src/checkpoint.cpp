#include "traceforge/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace traceforge::ckpt {

using json = nlohmann::json;

namespace {

constexpr char kMagic[8] = {'T', 'F', 'C', 'K', 'P', 'T', '0', '1'};

struct NamedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<double> data;
};

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}

void write_archive(const std::string& path, const json& meta,
                   const std::vector<NamedTensor>& tensors) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
  os.write(kMagic, 8);
  const std::string meta_s = meta.dump();
  write_u32(os, static_cast<std::uint32_t>(meta_s.size()));
  os.write(meta_s.data(), static_cast<std::streamsize>(meta_s.size()));
  write_u32(os, static_cast<std::uint32_t>(tensors.size()));
  for (const NamedTensor& t : tensors) {
    write_u32(os, static_cast<std::uint32_t>(t.name.size()));
    os.write(t.name.data(), static_cast<std::streamsize>(t.name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
    for (int d : t.shape) write_u32(os, static_cast<std::uint32_t>(d));
    write_u32(os, static_cast<std::uint32_t>(t.data.size()));
    os.write(reinterpret_cast<const char*>(t.data.data()),
             static_cast<std::streamsize>(t.data.size() * sizeof(double)));
  }
  if (!os) throw std::runtime_error("checkpoint write failed: " + path);
}

std::pair<json, std::vector<NamedTensor>> read_archive(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("not a checkpoint file: " + path);
  }
  const std::uint32_t meta_len = read_u32(is);
  std::string meta_s(meta_len, '\0');
  is.read(meta_s.data(), meta_len);
  const json meta = json::parse(meta_s);
  const std::uint32_t n = read_u32(is);
  std::vector<NamedTensor> tensors(n);
  for (auto& t : tensors) {
    const std::uint32_t name_len = read_u32(is);
    t.name.resize(name_len);
    is.read(t.name.data(), name_len);
    const std::uint32_t ndim = read_u32(is);
    t.shape.resize(ndim);
    for (auto& d : t.shape) d = static_cast<int>(read_u32(is));
    const std::uint32_t count = read_u32(is);
    t.data.resize(count);
    is.read(reinterpret_cast<char*>(t.data.data()),
            static_cast<std::streamsize>(count * sizeof(double)));
  }
  if (!is) throw std::runtime_error("truncated checkpoint: " + path);
  return {meta, tensors};
}

std::vector<NamedTensor> net_tensors(const nn::Net<float>& net, const std::string& prefix) {
  std::vector<NamedTensor> out;
  for (const nn::ParamBlock& b : net.blocks()) {
    NamedTensor t;
    t.name = prefix + b.name;
    t.shape = b.shape;
    t.data.resize(b.count);
    for (std::size_t i = 0; i < b.count; ++i) {
      t.data[i] = static_cast<double>(net.params()[b.offset + i]);
    }
    out.push_back(std::move(t));
  }
  return out;
}

void fill_net(nn::Net<float>& net, const std::string& prefix,
              const std::vector<NamedTensor>& tensors) {
  for (const nn::ParamBlock& b : net.blocks()) {
    const std::string want = prefix + b.name;
    const NamedTensor* found = nullptr;
    for (const NamedTensor& t : tensors) {
      if (t.name == want) {
        found = &t;
        break;
      }
    }
    if (!found) throw std::runtime_error("checkpoint missing tensor: " + want);
    if (found->data.size() != b.count) {
      throw std::runtime_error("checkpoint tensor size mismatch: " + want);
    }
    for (std::size_t i = 0; i < b.count; ++i) {
      net.params()[b.offset + i] = static_cast<float>(found->data[i]);
    }
  }
}

}  // namespace

void save_generator(const nets::Generator<float>& g, const std::string& path) {
  json meta{{"kind", "generator"}, {"channels", g.arch.channels}, {"blocks", g.arch.blocks}};
  write_archive(path, meta, net_tensors(g.net, ""));
}

nets::Generator<float> load_generator(const std::string& path) {
  const auto [meta, tensors] = read_archive(path);
  if (meta.at("kind") != "generator") throw std::runtime_error("checkpoint is not a generator");
  nets::GeneratorArch arch;
  arch.channels = meta.at("channels").get<int>();
  arch.blocks = meta.at("blocks").get<int>();
  nets::Generator<float> g =
      nets::build_generator<float>(Rng(0), nets::GeneratorInit::random, arch);
  fill_net(g.net, "", tensors);
  return g;
}

void save_classifier(const nets::Classifier<float>& c, const std::string& path) {
  json meta{{"kind", "classifier"},
            {"input", c.arch.input},
            {"channels", c.arch.channels},
            {"pools", c.arch.pools},
            {"hidden", c.arch.hidden},
            {"class_labels", c.class_labels}};
  write_archive(path, meta, net_tensors(c.net, ""));
}

nets::Classifier<float> load_classifier(const std::string& path) {
  const auto [meta, tensors] = read_archive(path);
  if (meta.at("kind") != "classifier") throw std::runtime_error("checkpoint is not a classifier");
  nets::ClassifierArch arch;
  arch.input = meta.at("input").get<int>();
  arch.channels = meta.at("channels").get<std::vector<int>>();
  arch.pools = meta.at("pools").get<std::vector<int>>();
  arch.hidden = meta.at("hidden").get<int>();
  nets::Classifier<float> c =
      nets::build_classifier<float>(Rng(0), meta.at("class_labels").get<std::vector<int>>(), arch);
  fill_net(c.net, "", tensors);
  return c;
}

void save_siamese(const nets::Siamese<float>& s, const std::string& path) {
  json meta{{"kind", "siamese"},
            {"input", s.arch.input},
            {"channels", s.arch.channels},
            {"pools", s.arch.pools},
            {"embed_dim", s.arch.embed_dim},
            {"head_hidden", s.arch.head_hidden},
            {"objective", nets::to_string(s.objective)},
            {"train_profile_ids", s.train_profile_ids}};
  std::vector<NamedTensor> tensors = net_tensors(s.extractor, "extractor.");
  std::vector<NamedTensor> head = net_tensors(s.head, "head.");
  tensors.insert(tensors.end(), head.begin(), head.end());
  write_archive(path, meta, tensors);
}

nets::Siamese<float> load_siamese(const std::string& path) {
  const auto [meta, tensors] = read_archive(path);
  if (meta.at("kind") != "siamese") throw std::runtime_error("checkpoint is not a siamese network");
  nets::SiameseArch arch;
  arch.input = meta.at("input").get<int>();
  arch.channels = meta.at("channels").get<std::vector<int>>();
  arch.pools = meta.at("pools").get<std::vector<int>>();
  arch.embed_dim = meta.at("embed_dim").get<int>();
  arch.head_hidden = meta.at("head_hidden").get<int>();
  nets::Siamese<float> s = nets::build_siamese<float>(Rng(0), arch);
  s.objective = nets::siamese_objective_from_string(meta.at("objective").get<std::string>());
  s.train_profile_ids = meta.at("train_profile_ids").get<std::vector<int>>();
  fill_net(s.extractor, "extractor.", tensors);
  fill_net(s.head, "head.", tensors);
  return s;
}

std::string checkpoint_kind(const std::string& path) {
  const auto [meta, tensors] = read_archive(path);
  return meta.at("kind").get<std::string>();
}

}  // namespace traceforge::ckpt
