#include "surprisenet/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace surprisenet {
namespace {

static_assert(sizeof(float) == 4);

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

template <typename U>
U get_le(const std::string& in, std::size_t pos) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

std::string content_hash(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return hex64(h);
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json header;
  header["config"] = to_json(ckpt.model.config());
  header["cell_type"] = nn::RecurrentLayer::kCellType;
  header["vocab_fingerprint"] = hex64(ckpt.vocabulary.fingerprint());
  header["vocabulary"] = ckpt.vocabulary.to_json();
  header["transitions"] = ckpt.transitions ? ckpt.transitions->to_json() : nlohmann::json(nullptr);
  header["max_training_surprise"] = ckpt.max_training_surprise;
  header["key_normalized"] = ckpt.key_normalized;
  header["epoch"] = ckpt.epoch;
  header["tensors"] = nlohmann::json::array();

  std::string data;
  for (const auto& p : ckpt.model.params()) {
    header["tensors"].push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", data.size()}});
    for (float f : p.value.values()) put_le<std::uint32_t>(data, std::bit_cast<std::uint32_t>(f));
  }
  header["data_bytes"] = data.size();

  const std::string text = header.dump();
  std::string out(kCheckpointMagic, 4);
  put_le<std::uint16_t>(out, kCheckpointVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(text.size()));
  out += text;
  out += data;
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes, const ChordVocabulary* expected_vocab) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  const auto version = get_le<std::uint16_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = get_le<std::uint32_t>(bytes, 6);
  if (bytes.size() < 10 + static_cast<std::size_t>(header_len)) throw CheckpointError("checkpoint truncated in header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(10, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const std::size_t data_start = 10 + header_len;

  try {
    if (header.at("cell_type") != nn::RecurrentLayer::kCellType) {
      throw CheckpointError("checkpoint uses unsupported cell type " + header.at("cell_type").dump());
    }
    const auto data_bytes = header.at("data_bytes").get<std::size_t>();
    if (bytes.size() != data_start + data_bytes) {
      throw CheckpointError("checkpoint truncated: expected " + std::to_string(data_start + data_bytes) +
                            " bytes, found " + std::to_string(bytes.size()));
    }

    Checkpoint ckpt;
    ckpt.vocabulary = ChordVocabulary::from_json(header.at("vocabulary"));
    const std::string fp = header.at("vocab_fingerprint").get<std::string>();
    if (fp != hex64(ckpt.vocabulary.fingerprint())) throw CheckpointError("embedded vocabulary does not match fingerprint");
    if (expected_vocab && fp != hex64(expected_vocab->fingerprint())) {
      throw CheckpointError("vocabulary fingerprint mismatch: checkpoint " + fp + ", supplied " +
                            hex64(expected_vocab->fingerprint()));
    }
    if (!header.at("transitions").is_null()) ckpt.transitions = TransitionModel::from_json(header.at("transitions"));
    ckpt.max_training_surprise = header.at("max_training_surprise").get<double>();
    ckpt.key_normalized = header.at("key_normalized").get<bool>();
    ckpt.epoch = header.at("epoch").get<int>();

    Cvae model(config_from_json(header.at("config")));
    const auto& tensors = header.at("tensors");
    if (static_cast<int>(tensors.size()) != model.params().size()) {
      throw CheckpointError("checkpoint tensor count does not match the configured model");
    }
    for (int i = 0; i < model.params().size(); ++i) {
      auto& p = model.params()[i];
      const auto& t = tensors[static_cast<std::size_t>(i)];
      if (t.at("name") != p.name || t.at("shape").get<std::vector<int>>() != p.value.shape()) {
        throw CheckpointError("tensor " + t.at("name").dump() + " does not match model parameter " + p.name);
      }
      const auto offset = t.at("offset").get<std::size_t>();
      if (offset + 4 * p.value.size() > data_bytes) throw CheckpointError("tensor " + p.name + " runs past the data");
      for (std::size_t k = 0; k < p.value.size(); ++k) {
        p.value[k] = std::bit_cast<float>(get_le<std::uint32_t>(bytes, data_start + offset + 4 * k));
      }
    }
    ckpt.model = std::move(model);
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint contents: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot write " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("write failed for " + path);
}

Checkpoint load_checkpoint(const std::string& path, const ChordVocabulary* expected_vocab) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return decode_checkpoint(ss.str(), expected_vocab);
}

}  // namespace surprisenet
