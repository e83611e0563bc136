#include "rankcf/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <vector>

#include "rankcf/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "checkpoint files assume a little-endian host");

namespace rankcf {

namespace {

void write_matrix_f32(std::ofstream& out, const Matrix& m) {
  std::vector<float> buf(m.a.size());
  for (std::size_t k = 0; k < m.a.size(); ++k) buf[k] = static_cast<float>(m.a[k]);
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
}

void read_matrix_f32(std::ifstream& in, Matrix& m) {
  std::vector<float> buf(m.a.size());
  in.read(reinterpret_cast<char*>(buf.data()),
          static_cast<std::streamsize>(buf.size() * sizeof(float)));
  if (!in) throw IoError("truncated checkpoint payload");
  for (std::size_t k = 0; k < buf.size(); ++k) m.a[k] = static_cast<double>(buf[k]);
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const EmbeddingTable& e0) {
  if (e0.item_emb.rows != meta.num_items || e0.item_emb.cols != meta.model.dim)
    throw ShapeError("checkpoint: item block does not match metadata");
  const bool with_users = meta.model.mode == Mode::kTransductive;
  if (with_users && (e0.user_emb.rows != meta.num_users || e0.user_emb.cols != meta.model.dim))
    throw ShapeError("checkpoint: user block does not match metadata");

  nlohmann::json header;
  header["format"] = "rankcf-checkpoint-v1";
  header["dim"] = meta.model.dim;
  header["layers"] = meta.model.layers;
  header["pooling"] = to_string(meta.model.pooling);
  header["mode"] = to_string(meta.model.mode);
  header["num_users"] = meta.num_users;
  header["num_items"] = meta.num_items;
  header["seed"] = meta.seed;
  if (!meta.extra.is_null()) header["extra"] = meta.extra;

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out << header.dump() << '\n';
  write_matrix_f32(out, e0.item_emb);
  if (with_users) write_matrix_f32(out, e0.user_emb);
  if (!out) throw IoError("short write on checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw IoError("checkpoint missing header: " + path);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("bad checkpoint header: " + std::string(e.what()));
  }

  Checkpoint c;
  try {
    if (header.at("format").get<std::string>() != "rankcf-checkpoint-v1")
      throw ParseError("unknown checkpoint format");
    c.meta.model.dim = header.at("dim").get<std::int32_t>();
    c.meta.model.layers = header.at("layers").get<int>();
    c.meta.model.pooling = pooling_from_string(header.at("pooling").get<std::string>());
    c.meta.model.mode = mode_from_string(header.at("mode").get<std::string>());
    c.meta.num_users = header.at("num_users").get<std::int32_t>();
    c.meta.num_items = header.at("num_items").get<std::int32_t>();
    c.meta.seed = header.at("seed").get<std::uint64_t>();
    if (header.contains("extra")) c.meta.extra = header["extra"];
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("checkpoint header missing field: " + std::string(e.what()));
  }

  c.e0 = make_table(c.meta.num_users, c.meta.num_items, c.meta.model.dim);
  read_matrix_f32(in, c.e0.item_emb);
  if (c.meta.model.mode == Mode::kTransductive) read_matrix_f32(in, c.e0.user_emb);
  return c;
}

EmbeddingTable quantize_f32(const EmbeddingTable& t) {
  EmbeddingTable q = t;
  for (auto& v : q.user_emb.a) v = static_cast<double>(static_cast<float>(v));
  for (auto& v : q.item_emb.a) v = static_cast<double>(static_cast<float>(v));
  return q;
}

}  // namespace rankcf
