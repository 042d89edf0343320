#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "surprisenet/checkpoint.hpp"

namespace httplib {
class Server;
}

namespace surprisenet {

inline constexpr const char* kServiceVersion = "0.1.0";

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// HTTP facade over the harmoniser. Holds at most one immutable checkpoint;
/// request handlers only read it, so they run concurrently.
class HarmonizerService {
 public:
  HarmonizerService();
  ~HarmonizerService();

  /// Loads a checkpoint file, replacing the current one.
  std::string load(const std::string& checkpoint_path);

  ApiResponse health() const;
  ApiResponse presets(const std::optional<std::string>& length, const std::optional<std::string>& amplitude) const;
  ApiResponse harmonize(const std::string& body) const;
  ApiResponse load_request(const std::string& body);

  /// Binds routes and blocks until stop() is called.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it; call serve() to block.
  int bind_any(const std::string& host);
  bool serve();
  void stop();

 private:
  struct Loaded {
    std::string id;
    Checkpoint checkpoint;
  };

  std::shared_ptr<const Loaded> current() const;
  void install_routes();

  mutable std::shared_mutex mutex_;
  std::shared_ptr<const Loaded> loaded_;
  mutable std::atomic<long> requests_{0};
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace surprisenet
