#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vsi/textstream.hpp"
#include "vsi/videostream.hpp"

namespace vsi {

// ----------------------------------------------------------------------------
// Wire protocol: newline-delimited JSON, one request and one response per line.
//
//   {"op":"embed","texts":[...]}                      -> {"embeddings":[[...],...]}
//   {"op":"detect","frames":[...],"vocabulary":[...]} -> {"detections":[{"frame":i,"name":"...","confidence":x},...]}
//   anything else                                     -> {"error":"..."}
// ----------------------------------------------------------------------------

namespace protocol {

nlohmann::json embed_request(const std::vector<std::string>& texts);
nlohmann::json detect_request(const std::vector<FrameIndex>& frames, const std::vector<std::string>& vocabulary);

/// Throw BackendError on an error response or a malformed payload.
std::vector<EmbeddingVector> parse_embed_response(const nlohmann::json& response);
std::vector<Detection> parse_detect_response(const nlohmann::json& response);

nlohmann::json embed_response(const std::vector<EmbeddingVector>& embeddings);
nlohmann::json detect_response(const std::vector<Detection>& detections);
nlohmann::json error_response(const std::string& message);

/// Server-side dispatch. Either backend may be null, in which case its op
/// answers with an error. Never throws.
nlohmann::json handle_request(const nlohmann::json& request, TextEncoderBackend* encoder,
                              DetectorBackend* detector);

/// Answer requests line by line from `in` to `out` until EOF. Lines that are
/// not JSON get an error response.
void serve_lines(std::istream& in, std::ostream& out, TextEncoderBackend* encoder, DetectorBackend* detector);

}  // namespace protocol

// ----------------------------------------------------------------------------
// In-process stubs
// ----------------------------------------------------------------------------

/// Lower-cased alphanumeric tokens.
std::vector<std::string> tokenize(std::string_view text);

/// Deterministic lexical encoder: every token is hashed (FNV-1a) to a signed
/// unit in one of `dim` buckets, and the bucket sums are L2-normalized. Texts
/// sharing tokens are similar; unrelated texts are near-orthogonal. Text with
/// no tokens maps to the zero vector.
class HashedBagOfWordsEncoder final : public TextEncoderBackend {
public:
    static constexpr std::size_t kDefaultDim = 64;

    explicit HashedBagOfWordsEncoder(std::size_t dim = kDefaultDim);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

    EmbeddingVector embed_one(std::string_view text) const;

private:
    std::size_t dim_;
};

/// Encoder answering from a fixture of precomputed vectors: {"text": [..], ...}.
class FixtureEncoder final : public TextEncoderBackend {
public:
    explicit FixtureEncoder(std::map<std::string, EmbeddingVector> table) : table_(std::move(table)) {}
    static FixtureEncoder load(const std::string& path);
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    std::map<std::string, EmbeddingVector> table_;
};

/// Map from frame index to the detections a detector would report there.
using DetectorScript = std::map<FrameIndex, std::vector<Detection>>;

/// Fixture format: {"<frame>": [{"name": "...", "confidence": x}, ...], ...}.
DetectorScript detector_script_from_json(const nlohmann::json& doc);
nlohmann::json detector_script_to_json(const DetectorScript& script);

/// Replays a script verbatim, restricted to the requested frames and vocabulary.
class ScriptedDetector final : public DetectorBackend {
public:
    explicit ScriptedDetector(DetectorScript script) : script_(std::move(script)) {}
    static ScriptedDetector load(const std::string& path);

    std::vector<Detection> detect(const std::vector<FrameIndex>& frames,
                                  const std::vector<std::string>& vocabulary) override;

    std::size_t calls() const noexcept { return calls_; }

private:
    DetectorScript script_;
    std::size_t calls_ = 0;
};

// ----------------------------------------------------------------------------
// Out-of-process transports
// ----------------------------------------------------------------------------

class RequestChannel {
public:
    virtual ~RequestChannel() = default;
    /// One request, one response. Throws BackendError on transport failure.
    virtual nlohmann::json exchange(const nlohmann::json& request) = 0;
};

/// Child process (run through /bin/sh -c) speaking the protocol on its
/// standard input and output.
class ProcessChannel final : public RequestChannel {
public:
    explicit ProcessChannel(const std::string& command_line,
                            std::chrono::milliseconds timeout = std::chrono::seconds(120));
    ~ProcessChannel() override;
    ProcessChannel(const ProcessChannel&) = delete;
    ProcessChannel& operator=(const ProcessChannel&) = delete;

    nlohmann::json exchange(const nlohmann::json& request) override;

private:
    std::string read_line();

    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::chrono::milliseconds timeout_;
};

/// POSTs each request as the body to `url` (http://host[:port][/path]) and
/// parses the response body.
class HttpChannel final : public RequestChannel {
public:
    explicit HttpChannel(const std::string& url, std::chrono::seconds timeout = std::chrono::seconds(120));
    nlohmann::json exchange(const nlohmann::json& request) override;

private:
    std::string host_;
    int port_ = 80;
    std::string path_;
    std::chrono::seconds timeout_;
};

class RemoteEncoder final : public TextEncoderBackend {
public:
    explicit RemoteEncoder(std::shared_ptr<RequestChannel> channel) : channel_(std::move(channel)) {}
    std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

private:
    std::shared_ptr<RequestChannel> channel_;
};

class RemoteDetector final : public DetectorBackend {
public:
    explicit RemoteDetector(std::shared_ptr<RequestChannel> channel) : channel_(std::move(channel)) {}
    std::vector<Detection> detect(const std::vector<FrameIndex>& frames,
                                  const std::vector<std::string>& vocabulary) override;

private:
    std::shared_ptr<RequestChannel> channel_;
};

// ----------------------------------------------------------------------------
// Backend specs: stub[:PATH] | proc:CMDLINE | http:URL
// ----------------------------------------------------------------------------

struct BackendSpec {
    enum class Kind { stub, proc, http };
    Kind kind = Kind::stub;
    std::string target;  // fixture path, command line or URL; may be empty for stub
};

/// Throws InvalidInput on an unknown scheme or a missing target.
BackendSpec parse_backend_spec(std::string_view spec);

/// `stub` alone is the hashed bag-of-words encoder; `stub:PATH` a FixtureEncoder.
std::unique_ptr<TextEncoderBackend> make_encoder(const BackendSpec& spec);
/// `stub:PATH` is a ScriptedDetector; the path is required.
std::unique_ptr<DetectorBackend> make_detector(const BackendSpec& spec);

}  // namespace vsi
