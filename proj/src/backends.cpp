#include "vsi/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <httplib.h>

extern char** environ;

namespace vsi {

using nlohmann::json;

namespace protocol {

json embed_request(const std::vector<std::string>& texts) {
    return {{"op", "embed"}, {"texts", texts}};
}

json detect_request(const std::vector<FrameIndex>& frames, const std::vector<std::string>& vocabulary) {
    return {{"op", "detect"}, {"frames", frames}, {"vocabulary", vocabulary}};
}

namespace {

void throw_if_error(const json& response) {
    if (!response.is_object())
        throw BackendError("backend response is not a JSON object");
    if (response.contains("error")) {
        const auto& e = response.at("error");
        throw BackendError("backend error: " + (e.is_string() ? e.get<std::string>() : e.dump()));
    }
}

}  // namespace

std::vector<EmbeddingVector> parse_embed_response(const json& response) {
    throw_if_error(response);
    if (!response.contains("embeddings") || !response.at("embeddings").is_array())
        throw BackendError("embed response lacks an 'embeddings' array");
    std::vector<EmbeddingVector> out;
    for (const auto& row : response.at("embeddings")) {
        if (!row.is_array())
            throw BackendError("embedding is not an array");
        EmbeddingVector v;
        v.reserve(row.size());
        for (const auto& x : row) {
            if (!x.is_number())
                throw BackendError("embedding entry is not a number");
            v.push_back(x.get<double>());
        }
        out.push_back(std::move(v));
    }
    return out;
}

std::vector<Detection> parse_detect_response(const json& response) {
    throw_if_error(response);
    if (!response.contains("detections") || !response.at("detections").is_array())
        throw BackendError("detect response lacks a 'detections' array");
    std::vector<Detection> out;
    for (const auto& d : response.at("detections")) {
        if (!d.is_object() || !d.contains("frame") || !d.contains("name") || !d.contains("confidence") ||
            !d.at("frame").is_number_integer() || !d.at("name").is_string() || !d.at("confidence").is_number())
            throw BackendError("malformed detection: " + d.dump());
        out.push_back({d.at("frame").get<FrameIndex>(), d.at("name").get<std::string>(), d.at("confidence").get<double>()});
    }
    return out;
}

json embed_response(const std::vector<EmbeddingVector>& embeddings) {
    return {{"embeddings", embeddings}};
}

json detect_response(const std::vector<Detection>& detections) {
    auto arr = json::array();
    for (const auto& d : detections)
        arr.push_back({{"frame", d.frame}, {"name", d.object_name}, {"confidence", d.confidence}});
    return {{"detections", std::move(arr)}};
}

json error_response(const std::string& message) {
    return {{"error", message}};
}

json handle_request(const json& request, TextEncoderBackend* encoder, DetectorBackend* detector) {
    try {
        if (!request.is_object() || !request.contains("op") || !request.at("op").is_string())
            return error_response("request must be an object with a string 'op'");
        const auto op = request.at("op").get<std::string>();
        if (op == "embed") {
            if (!encoder)
                return error_response("no encoder configured");
            if (!request.contains("texts") || !request.at("texts").is_array())
                return error_response("embed requires a 'texts' array");
            return embed_response(encoder->embed(request.at("texts").get<std::vector<std::string>>()));
        }
        if (op == "detect") {
            if (!detector)
                return error_response("no detector configured");
            if (!request.contains("frames") || !request.at("frames").is_array() || !request.contains("vocabulary") ||
                !request.at("vocabulary").is_array())
                return error_response("detect requires 'frames' and 'vocabulary' arrays");
            return detect_response(detector->detect(request.at("frames").get<std::vector<FrameIndex>>(),
                                                    request.at("vocabulary").get<std::vector<std::string>>()));
        }
        return error_response("unknown op '" + op + "'");
    } catch (const std::exception& e) {
        return error_response(e.what());
    }
}

void serve_lines(std::istream& in, std::ostream& out, TextEncoderBackend* encoder, DetectorBackend* detector) {
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        json response;
        try {
            response = handle_request(json::parse(line), encoder, detector);
        } catch (const json::parse_error& e) {
            response = error_response(std::string("malformed request: ") + e.what());
        }
        out << response.dump() << '\n' << std::flush;
    }
}

}  // namespace protocol

// ----------------------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

namespace {

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace

HashedBagOfWordsEncoder::HashedBagOfWordsEncoder(std::size_t dim) : dim_(dim) {
    if (dim == 0)
        throw InvalidInput("encoder dimension must be positive");
}

EmbeddingVector HashedBagOfWordsEncoder::embed_one(std::string_view text) const {
    EmbeddingVector v(dim_, 0.0);
    for (const auto& token : tokenize(text)) {
        const auto h = fnv1a(token);
        v[h % dim_] += (h >> 63) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : v)
        norm += x * x;
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& x : v)
            x /= norm;
    }
    return v;
}

std::vector<EmbeddingVector> HashedBagOfWordsEncoder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts)
        out.push_back(embed_one(t));
    return out;
}

FixtureEncoder FixtureEncoder::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open encoder fixture '" + path + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError("encoder fixture '" + path + "' is not valid JSON: " + e.what());
    }
    if (!doc.is_object())
        throw ValidationError("encoder fixture must map text to vectors");
    std::map<std::string, EmbeddingVector> table;
    for (const auto& [text, vec] : doc.items()) {
        if (!vec.is_array() || vec.empty() || !std::all_of(vec.begin(), vec.end(), [](const json& v) { return v.is_number(); }))
            throw ValidationError("encoder fixture entry '" + text + "' must be a non-empty array of numbers");
        table.emplace(text, vec.get<EmbeddingVector>());
    }
    return FixtureEncoder(std::move(table));
}

std::vector<EmbeddingVector> FixtureEncoder::embed(const std::vector<std::string>& texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        const auto it = table_.find(t);
        if (it == table_.end())
            throw BackendError("encoder fixture has no vector for '" + t + "'");
        out.push_back(it->second);
    }
    return out;
}

// ----------------------------------------------------------------------------

DetectorScript detector_script_from_json(const json& doc) {
    if (!doc.is_object())
        throw ValidationError("detector script must map frame indices to detection lists");
    DetectorScript script;
    for (const auto& [key, list] : doc.items()) {
        FrameIndex frame = 0;
        try {
            std::size_t used = 0;
            frame = std::stoll(key, &used);
            if (used != key.size() || frame < 0)
                throw std::invalid_argument(key);
        } catch (const std::exception&) {
            throw ValidationError("detector script key '" + key + "' is not a frame index");
        }
        if (!list.is_array())
            throw ValidationError("detections for frame " + key + " must be an array");
        auto& out = script[frame];
        for (const auto& d : list) {
            if (!d.is_object() || !d.contains("name") || !d.at("name").is_string() || !d.contains("confidence") ||
                !d.at("confidence").is_number())
                throw ValidationError("malformed detection in frame " + key + ": " + d.dump());
            const auto conf = d.at("confidence").get<double>();
            if (!(conf >= 0.0 && conf <= 1.0))
                throw ValidationError("confidence outside [0, 1] in frame " + key);
            auto name = d.at("name").get<std::string>();
            if (name.empty())
                throw ValidationError("empty object name in frame " + key);
            out.push_back({frame, std::move(name), conf});
        }
    }
    return script;
}

json detector_script_to_json(const DetectorScript& script) {
    json doc = json::object();
    for (const auto& [frame, detections] : script) {
        auto arr = json::array();
        for (const auto& d : detections)
            arr.push_back({{"name", d.object_name}, {"confidence", d.confidence}});
        doc[std::to_string(frame)] = std::move(arr);
    }
    return doc;
}

ScriptedDetector ScriptedDetector::load(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ValidationError("cannot open detector script '" + path + "'");
    try {
        return ScriptedDetector(detector_script_from_json(json::parse(in)));
    } catch (const json::parse_error& e) {
        throw ValidationError("detector script '" + path + "' is not valid JSON: " + e.what());
    }
}

std::vector<Detection> ScriptedDetector::detect(const std::vector<FrameIndex>& frames,
                                                const std::vector<std::string>& vocabulary) {
    ++calls_;
    const std::set<std::string, std::less<>> vocab(vocabulary.begin(), vocabulary.end());
    std::vector<Detection> out;
    for (auto f : frames) {
        const auto it = script_.find(f);
        if (it == script_.end())
            continue;
        for (const auto& d : it->second)
            if (vocab.contains(d.object_name))
                out.push_back(d);
    }
    return out;
}

// ----------------------------------------------------------------------------

namespace {

void ignore_sigpipe_once() {
    static std::once_flag flag;
    std::call_once(flag, [] { std::signal(SIGPIPE, SIG_IGN); });
}

}  // namespace

ProcessChannel::ProcessChannel(const std::string& command_line, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
    ignore_sigpipe_once();
    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0)
        throw BackendError(std::string("pipe: ") + std::strerror(errno));
    if (pipe2(out_pipe, O_CLOEXEC) != 0) {
        close(in_pipe[0]);
        close(in_pipe[1]);
        throw BackendError(std::string("pipe: ") + std::strerror(errno));
    }

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);

    const char* argv[] = {"/bin/sh", "-c", command_line.c_str(), nullptr};
    pid_t pid = 0;
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, const_cast<char* const*>(argv), environ);
    posix_spawn_file_actions_destroy(&actions);
    close(in_pipe[0]);
    close(out_pipe[1]);
    if (rc != 0) {
        close(in_pipe[1]);
        close(out_pipe[0]);
        throw BackendError("cannot start backend '" + command_line + "': " + std::strerror(rc));
    }
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
}

ProcessChannel::~ProcessChannel() {
    if (to_child_ >= 0)
        close(to_child_);
    if (from_child_ >= 0)
        close(from_child_);
    if (pid_ > 0) {
        // Closing stdin asks the child to finish; give it a moment before forcing it.
        int status = 0;
        for (int i = 0; i < 50; ++i) {
            if (waitpid(pid_, &status, WNOHANG) == pid_)
                return;
            usleep(10'000);
        }
        kill(pid_, SIGKILL);
        waitpid(pid_, &status, 0);
    }
}

std::string ProcessChannel::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
        if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
            auto line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0)
            throw BackendError("backend process timed out");
        pollfd pfd{from_child_, POLLIN, 0};
        const int ready = poll(&pfd, 1, static_cast<int>(left.count()));
        if (ready < 0) {
            if (errno == EINTR)
                continue;
            throw BackendError(std::string("poll: ") + std::strerror(errno));
        }
        if (ready == 0)
            continue;
        char chunk[65536];
        const auto n = read(from_child_, chunk, sizeof chunk);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw BackendError(std::string("read from backend: ") + std::strerror(errno));
        }
        if (n == 0)
            throw BackendError("backend process closed its output");
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

json ProcessChannel::exchange(const json& request) {
    const auto line = request.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = write(to_child_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR)
                continue;
            throw BackendError(std::string("write to backend: ") + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    const auto reply = read_line();
    try {
        return json::parse(reply);
    } catch (const json::parse_error& e) {
        throw BackendError(std::string("backend sent malformed JSON: ") + e.what());
    }
}

HttpChannel::HttpChannel(const std::string& url, std::chrono::seconds timeout) : timeout_(timeout) {
    std::string_view rest = url;
    if (!rest.starts_with("http://"))
        throw InvalidInput("only http:// URLs are supported, got '" + url + "'");
    rest.remove_prefix(7);
    const auto slash = rest.find('/');
    const auto authority = rest.substr(0, slash);
    path_ = slash == std::string_view::npos ? "/" : std::string(rest.substr(slash));
    const auto colon = authority.rfind(':');
    if (colon == std::string_view::npos) {
        host_ = std::string(authority);
    } else {
        host_ = std::string(authority.substr(0, colon));
        try {
            port_ = std::stoi(std::string(authority.substr(colon + 1)));
        } catch (const std::exception&) {
            throw InvalidInput("bad port in URL '" + url + "'");
        }
    }
    if (host_.empty())
        throw InvalidInput("missing host in URL '" + url + "'");
}

json HttpChannel::exchange(const json& request) {
    httplib::Client client(host_, port_);
    client.set_connection_timeout(timeout_);
    client.set_read_timeout(timeout_);
    client.set_write_timeout(timeout_);
    auto res = client.Post(path_, request.dump(), "application/json");
    if (!res)
        throw BackendError("http backend " + host_ + ":" + std::to_string(port_) + " unreachable: " +
                           httplib::to_string(res.error()));
    if (res->status != 200 && res->body.empty())
        throw BackendError("http backend returned status " + std::to_string(res->status));
    try {
        return json::parse(res->body);
    } catch (const json::parse_error& e) {
        throw BackendError(std::string("http backend sent malformed JSON: ") + e.what());
    }
}

std::vector<EmbeddingVector> RemoteEncoder::embed(const std::vector<std::string>& texts) {
    auto out = protocol::parse_embed_response(channel_->exchange(protocol::embed_request(texts)));
    if (out.size() != texts.size())
        throw BackendError("encoder returned " + std::to_string(out.size()) + " vectors for " +
                           std::to_string(texts.size()) + " texts");
    return out;
}

std::vector<Detection> RemoteDetector::detect(const std::vector<FrameIndex>& frames,
                                              const std::vector<std::string>& vocabulary) {
    return protocol::parse_detect_response(channel_->exchange(protocol::detect_request(frames, vocabulary)));
}

// ----------------------------------------------------------------------------

BackendSpec parse_backend_spec(std::string_view spec) {
    if (spec == "stub")
        return {BackendSpec::Kind::stub, ""};
    if (spec.starts_with("http://"))
        return {BackendSpec::Kind::http, std::string(spec)};
    const auto colon = spec.find(':');
    if (colon == std::string_view::npos)
        throw InvalidInput("backend spec '" + std::string(spec) + "' must be stub[:PATH], proc:CMDLINE or http:URL");
    const auto scheme = spec.substr(0, colon);
    const auto target = std::string(spec.substr(colon + 1));
    if (scheme == "stub")
        return {BackendSpec::Kind::stub, target};
    if (target.empty())
        throw InvalidInput("backend spec '" + std::string(spec) + "' has an empty target");
    if (scheme == "proc")
        return {BackendSpec::Kind::proc, target};
    if (scheme == "http")
        return {BackendSpec::Kind::http, target};
    throw InvalidInput("unknown backend scheme '" + std::string(scheme) + "'");
}

namespace {

std::shared_ptr<RequestChannel> open_channel(const BackendSpec& spec) {
    if (spec.kind == BackendSpec::Kind::proc)
        return std::make_shared<ProcessChannel>(spec.target);
    return std::make_shared<HttpChannel>(spec.target);
}

}  // namespace

std::unique_ptr<TextEncoderBackend> make_encoder(const BackendSpec& spec) {
    if (spec.kind == BackendSpec::Kind::stub) {
        if (spec.target.empty())
            return std::make_unique<HashedBagOfWordsEncoder>();
        return std::make_unique<FixtureEncoder>(FixtureEncoder::load(spec.target));
    }
    return std::make_unique<RemoteEncoder>(open_channel(spec));
}

std::unique_ptr<DetectorBackend> make_detector(const BackendSpec& spec) {
    if (spec.kind == BackendSpec::Kind::stub) {
        if (spec.target.empty())
            throw InvalidInput("stub detector needs a script: stub:PATH");
        return std::make_unique<ScriptedDetector>(ScriptedDetector::load(spec.target));
    }
    return std::make_unique<RemoteDetector>(open_channel(spec));
}

}  // namespace vsi
