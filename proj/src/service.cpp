#include "surprisenet/service.hpp"

#include <cmath>

#include <httplib.h>

#include "surprisenet/eval.hpp"
#include "surprisenet/harmonizer.hpp"
#include "surprisenet/metrics.hpp"
#include "surprisenet/pipeline.hpp"

namespace surprisenet {
namespace {

using nlohmann::json;

ApiResponse error(int status, const std::string& message) { return {status, json{{"error", message}}}; }

std::vector<MelodyFrame> melody_from_json(const json& frames) {
  if (!frames.is_array() || frames.empty()) throw std::invalid_argument("melody_frames must be a nonempty array");
  std::vector<MelodyFrame> out;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto& row = frames[t];
    if (!row.is_array() || row.size() != kMelodyDim) {
      throw std::invalid_argument("melody frame " + std::to_string(t) + " must have 13 entries");
    }
    MelodyFrame f{};
    for (std::size_t k = 0; k < kMelodyDim; ++k) {
      const int bit = row[k].get<int>();
      if (bit != 0 && bit != 1) throw std::invalid_argument("melody bits must be 0 or 1");
      f[k] = static_cast<std::uint8_t>(bit);
    }
    const bool silent = std::all_of(f.begin(), f.begin() + 12, [](auto b) { return b == 0; });
    if (silent != (f[kRestBit] == 1)) {
      throw std::invalid_argument("melody frame " + std::to_string(t) + " violates the rest-bit rule");
    }
    out.push_back(f);
  }
  return out;
}

}  // namespace

HarmonizerService::HarmonizerService() : server_(std::make_unique<httplib::Server>()) { install_routes(); }

HarmonizerService::~HarmonizerService() { stop(); }

std::shared_ptr<const HarmonizerService::Loaded> HarmonizerService::current() const {
  std::shared_lock lock(mutex_);
  return loaded_;
}

std::string HarmonizerService::load(const std::string& checkpoint_path) {
  const std::string bytes = read_file(checkpoint_path);
  auto loaded = std::make_shared<Loaded>(Loaded{content_hash(bytes), decode_checkpoint(bytes)});
  if (!loaded->checkpoint.transitions) throw CheckpointError("checkpoint carries no transition model");
  std::unique_lock lock(mutex_);
  loaded_ = std::move(loaded);
  return loaded_->id;
}

ApiResponse HarmonizerService::health() const {
  ++requests_;
  auto l = current();
  return {200, json{{"status", "ok"},
                    {"version", kServiceVersion},
                    {"model_id", l ? json(l->id) : json(nullptr)},
                    {"requests", requests_.load()}}};
}

ApiResponse HarmonizerService::presets(const std::optional<std::string>& length,
                                       const std::optional<std::string>& amplitude) const {
  ++requests_;
  int frames = 0;
  try {
    frames = length ? std::stoi(*length) : 0;
  } catch (const std::exception&) {
    return error(422, "length must be an integer");
  }
  if (frames < 1) return error(422, "length must be >= 1");
  double m = 0.0;
  if (amplitude) {
    try {
      m = std::stod(*amplitude);
    } catch (const std::exception&) {
      return error(422, "amplitude must be a number");
    }
    if (!(m >= 0.0) || !std::isfinite(m)) return error(422, "amplitude must be >= 0");
  } else {
    auto l = current();
    if (!l) return error(409, "no model loaded; pass amplitude explicitly");
    m = l->checkpoint.max_training_surprise;
  }
  json out{{"length", frames}, {"amplitude", m}, {"presets", json::object()}};
  for (PresetKind kind : kAllPresets) {
    out["presets"][std::string(preset_name(kind))] = preset_contour({kind, m}, frames);
  }
  return {200, out};
}

ApiResponse HarmonizerService::harmonize(const std::string& body) const {
  ++requests_;
  auto l = current();
  if (!l) return error(409, "no model loaded");
  const Checkpoint& ckpt = l->checkpoint;
  try {
    json req;
    try {
      req = json::parse(body);
    } catch (const json::exception& e) {
      return error(422, std::string("request body is not valid JSON: ") + e.what());
    }
    HarmonizationRequest hr;
    LeadSheet sheet;
    bool have_sheet = false;
    if (req.contains("leadsheet")) {
      sheet = leadsheet_from_json(req["leadsheet"]);
      sheet.chords.clear();
      have_sheet = true;
      hr.melody = align_frames(sheet, ckpt.vocabulary, {ckpt.key_normalized, false}).melody;
    } else if (req.contains("melody_frames")) {
      hr.melody = melody_from_json(req["melody_frames"]);
    } else {
      return error(422, "request needs melody_frames or leadsheet");
    }
    const int frames = static_cast<int>(hr.melody.size());

    std::string preset_label;
    if (req.contains("contour")) {
      hr.contour = req["contour"].get<std::vector<double>>();
      for (double v : hr.contour) {
        if (!(v >= 0.0) || !std::isfinite(v)) return error(422, "contour values must be finite and >= 0");
      }
    } else if (req.contains("preset")) {
      preset_label = req["preset"].get<std::string>();
      const double m = req.contains("amplitude") ? req["amplitude"].get<double>() : ckpt.max_training_surprise;
      hr.contour = preset_contour({parse_preset(preset_label), m}, frames);
    } else {
      return error(422, "request needs contour or preset");
    }
    if (static_cast<int>(hr.contour.size()) != frames) {
      return error(422, "contour length " + std::to_string(hr.contour.size()) + " does not match melody length " +
                            std::to_string(frames));
    }
    hr.num_samples = req.value("samples", 1);
    if (hr.num_samples < 1 || hr.num_samples > 256) return error(422, "samples must be in [1, 256]");
    hr.seed = req.value("seed", std::uint64_t{0});
    const std::string mode = req.value("decode_mode", std::string("argmax"));
    if (mode == "sample") {
      hr.decode_mode = DecodeMode::kSample;
      hr.temperature = req.value("temperature", 1.0);
      if (!(hr.temperature > 0.0)) return error(422, "temperature must be positive");
    } else if (mode != "argmax") {
      return error(422, "decode_mode must be argmax or sample");
    }

    const auto results = surprisenet::harmonize(ckpt.model, *ckpt.transitions, hr);
    json out{{"model_id", l->id}, {"frames", frames}, {"given_contour", hr.contour}, {"samples", json::array()}};
    if (!preset_label.empty()) out["preset"] = preset_label;
    for (const auto& r : results) {
      json s{{"chords", r.chords}, {"realized_contour", r.realized}};
      json labels = json::array();
      for (int c : r.chords) labels.push_back(ckpt.vocabulary.label(c));
      s["labels"] = std::move(labels);
      FrameSequence seq;
      seq.melody = hr.melody;
      seq.chords = r.chords;
      try {
        s["metrics"] = to_json(report(seq, ckpt.vocabulary));
      } catch (const std::invalid_argument&) {
        s["metrics"] = nullptr;
      }
      try {
        s["adherence"] = to_json(spearman(hr.contour, r.realized));
      } catch (const std::invalid_argument&) {
        s["adherence"] = nullptr;
      }
      if (have_sheet) s["leadsheet"] = leadsheet_to_json(to_leadsheet(sheet, r.chords, ckpt.vocabulary, ckpt.key_normalized));
      out["samples"].push_back(std::move(s));
    }
    return {200, out};
  } catch (const json::exception& e) {
    return error(422, std::string("malformed request: ") + e.what());
  } catch (const std::invalid_argument& e) {
    return error(422, e.what());
  } catch (const ParseError& e) {
    return error(422, e.what());
  } catch (const ValidationError& e) {
    return error(422, e.what());
  } catch (const std::exception&) {
    return {500, json{{"error", "internal error"}, {"id", content_hash(body)}}};
  }
}

ApiResponse HarmonizerService::load_request(const std::string& body) {
  ++requests_;
  try {
    const auto req = json::parse(body);
    const std::string id = load(req.at("checkpoint").get<std::string>());
    return {200, json{{"model_id", id}}};
  } catch (const json::exception& e) {
    return error(422, std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    return error(422, e.what());
  }
}

void HarmonizerService::install_routes() {
  auto send = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server_->Get("/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server_->Get("/presets", [this, send](const httplib::Request& req, httplib::Response& res) {
    auto param = [&req](const char* key) -> std::optional<std::string> {
      if (!req.has_param(key)) return std::nullopt;
      return req.get_param_value(key);
    };
    send(res, presets(param("length"), param("amplitude")));
  });
  server_->Post("/harmonize",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, harmonize(req.body)); });
  server_->Post("/load",
                [this, send](const httplib::Request& req, httplib::Response& res) { send(res, load_request(req.body)); });
}

bool HarmonizerService::listen(const std::string& host, int port) { return server_->listen(host, port); }

int HarmonizerService::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }

bool HarmonizerService::serve() { return server_->listen_after_bind(); }

void HarmonizerService::stop() {
  if (server_) server_->stop();
}

}  // namespace surprisenet
