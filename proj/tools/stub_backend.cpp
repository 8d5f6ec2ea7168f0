// Reference model server speaking the line protocol, backed by the in-process
// stubs. Serves stdin/stdout by default, or HTTP with --http.

#include <atomic>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>
#include <optional>

#include <CLI11.hpp>
#include <httplib.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "vsi/backends.hpp"

using nlohmann::json;

namespace {

/// Wraps a detector and fails once `limit` detect calls have been answered.
class FailingDetector final : public vsi::DetectorBackend {
public:
    FailingDetector(vsi::DetectorBackend& inner, long limit) : inner_(inner), limit_(limit) {}
    std::vector<vsi::Detection> detect(const std::vector<vsi::FrameIndex>& frames,
                                       const std::vector<std::string>& vocabulary) override {
        if (limit_ >= 0 && calls_++ >= limit_)
            throw vsi::BackendError("detector unavailable");
        return inner_.detect(frames, vocabulary);
    }

private:
    vsi::DetectorBackend& inner_;
    long limit_;
    long calls_ = 0;
};

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("stub-backend"));

    CLI::App app{"Stub model server for the vsi line protocol", "vsi-stub-backend"};
    std::string script_path, embeddings_path;
    std::optional<int> http_port;
    long fail_after = -1;
    long exit_after = -1;
    app.add_option("--script", script_path, "Detector script JSON (frame -> detections)");
    app.add_option("--embeddings", embeddings_path, "Encoder fixture JSON (text -> vector); hashed encoder otherwise");
    app.add_option("--http", http_port, "Serve HTTP on 127.0.0.1:PORT (0 picks a free port)");
    app.add_option("--fail-after", fail_after, "Answer detect requests with errors after N calls");
    app.add_option("--exit-after", exit_after, "Exit after answering N requests (stdio mode)");
    CLI11_PARSE(app, argc, argv);

    std::unique_ptr<vsi::TextEncoderBackend> encoder;
    std::unique_ptr<vsi::DetectorBackend> detector;
    std::unique_ptr<vsi::DetectorBackend> failing;
    try {
        if (embeddings_path.empty())
            encoder = std::make_unique<vsi::HashedBagOfWordsEncoder>();
        else
            encoder = std::make_unique<vsi::FixtureEncoder>(vsi::FixtureEncoder::load(embeddings_path));
        if (!script_path.empty()) {
            detector = std::make_unique<vsi::ScriptedDetector>(vsi::ScriptedDetector::load(script_path));
            failing = std::make_unique<FailingDetector>(*detector, fail_after);
        }
    } catch (const vsi::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }

    if (!http_port) {
        if (exit_after < 0) {
            vsi::protocol::serve_lines(std::cin, std::cout, encoder.get(), failing.get());
            return 0;
        }
        std::string line;
        for (long answered = 0; answered < exit_after && std::getline(std::cin, line); ++answered) {
            std::istringstream one(line + "\n");
            vsi::protocol::serve_lines(one, std::cout, encoder.get(), failing.get());
        }
        return 0;
    }

    httplib::Server server;
    std::mutex mu;
    server.Post(".*", [&](const httplib::Request& req, httplib::Response& res) {
        json reply;
        try {
            const auto request = json::parse(req.body);
            std::lock_guard lock(mu);
            reply = vsi::protocol::handle_request(request, encoder.get(), failing.get());
        } catch (const json::exception& e) {
            reply = vsi::protocol::error_response(std::string("malformed request: ") + e.what());
        }
        res.set_content(reply.dump(), "application/json");
    });
    int port = *http_port;
    if (port == 0) {
        port = server.bind_to_any_port("127.0.0.1");
    } else if (!server.bind_to_port("127.0.0.1", port)) {
        std::cerr << "error: cannot bind port " << port << '\n';
        return 3;
    }
    if (port < 0) {
        std::cerr << "error: cannot bind\n";
        return 3;
    }
    std::cout << "listening " << port << std::endl;
    server.listen_after_bind();
    return 0;
}
