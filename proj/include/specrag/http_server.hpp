#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "specrag/config.hpp"
#include "specrag/service.hpp"

namespace httplib {
class Server;
}

namespace specrag {

/// JSON API under /v1. Requests arriving before load() finishes get 503.
class HttpService {
  public:
    explicit HttpService(PipelineConfig cfg);
    ~HttpService();

    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Opens the configured index.
    void load();
    /// Uses an index that is already in memory.
    void load(std::shared_ptr<const HybridIndex> index);
    bool ready() const;

    /// Binds and serves on a background thread. Port 0 picks a free port;
    /// the bound port is returned.
    int start(const std::string& host, int port);
    /// Binds and serves on the calling thread until stop().
    bool listen(const std::string& host, int port);
    void stop();

  private:
    void routes();
    std::shared_ptr<const QueryService> service() const;

    PipelineConfig cfg_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    mutable std::mutex mu_;
    std::shared_ptr<const QueryService> service_;
    std::atomic<std::uint64_t> next_request_{1};
};

}  // namespace specrag
