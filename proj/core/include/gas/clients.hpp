#pragma once

#include <array>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gas/image.hpp"

namespace gas {

// One detector hit for a caption.
struct Detection {
    std::array<double, 4> box{};  // x0, y0, x1, y1 in pixels
    double score = 0.0;
};

// Multimodal chat completion: prompt text plus one image, returns the raw
// assistant text. Implementations must be safe for concurrent calls.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual std::string complete(const std::string& prompt, const Image& image) = 0;
};

// Zero-shot open-vocabulary detector: caption in, scored boxes out.
class DetectorClient {
public:
    virtual ~DetectorClient() = default;
    virtual std::vector<Detection> detect(const Image& image, const std::string& caption) = 0;
};

// Cache/fixture keys. An entry is one JSON file named <key>.json inside the
// cache directory; the key hashes the full request content, so replays are
// exact.
std::string chat_cache_key(const std::string& prompt, const Image& image);
std::string detector_cache_key(const std::string& caption, const Image& image);

// Write-through response cache with atomic write-then-rename, so concurrent
// jobs cannot corrupt entries. The cache directory doubles as the fixture
// format for the replay clients below.
class CachingChatClient : public ChatClient {
public:
    CachingChatClient(std::string cache_dir, std::shared_ptr<ChatClient> inner);
    std::string complete(const std::string& prompt, const Image& image) override;

private:
    std::string cache_dir_;
    std::shared_ptr<ChatClient> inner_;
};

class CachingDetectorClient : public DetectorClient {
public:
    CachingDetectorClient(std::string cache_dir, std::shared_ptr<DetectorClient> inner);
    std::vector<Detection> detect(const Image& image, const std::string& caption) override;

private:
    std::string cache_dir_;
    std::shared_ptr<DetectorClient> inner_;
};

// Fixture-only clients: byte-identical replay from a cache directory; a miss
// is a backend error (nothing is fabricated).
class ReplayChatClient : public ChatClient {
public:
    explicit ReplayChatClient(std::string fixture_dir);
    std::string complete(const std::string& prompt, const Image& image) override;

private:
    std::string fixture_dir_;
};

class ReplayDetectorClient : public DetectorClient {
public:
    explicit ReplayDetectorClient(std::string fixture_dir);
    std::vector<Detection> detect(const Image& image, const std::string& caption) override;

private:
    std::string fixture_dir_;
};

// Records a fixture entry directly, bypassing a live client. Used to build
// replay directories for tests and offline runs.
void write_chat_fixture(const std::string& dir, const std::string& prompt, const Image& image,
                        const std::string& response);
void write_detector_fixture(const std::string& dir, const std::string& caption,
                            const Image& image, const std::vector<Detection>& detections);

// In-memory scripted clients for unit tests.
class ScriptedChatClient : public ChatClient {
public:
    explicit ScriptedChatClient(
        std::function<std::string(const std::string&, const Image&)> fn)
        : fn_(std::move(fn)) {}
    std::string complete(const std::string& prompt, const Image& image) override {
        return fn_(prompt, image);
    }

private:
    std::function<std::string(const std::string&, const Image&)> fn_;
};

class ScriptedDetectorClient : public DetectorClient {
public:
    explicit ScriptedDetectorClient(
        std::function<std::vector<Detection>(const Image&, const std::string&)> fn)
        : fn_(std::move(fn)) {}
    std::vector<Detection> detect(const Image& image, const std::string& caption) override {
        return fn_(image, caption);
    }

private:
    std::function<std::vector<Detection>(const Image&, const std::string&)> fn_;
};

// POST {model, messages: [user with text part + base64 image part]} to the
// configured endpoint; reads the assistant text from
// choices[0].message.content. The API key comes from GAS_CHAT_API_KEY. One
// retry on transport failure, then BackendError.
class HttpChatClient : public ChatClient {
public:
    HttpChatClient(std::string endpoint, std::string model);
    std::string complete(const std::string& prompt, const Image& image) override;

private:
    std::string endpoint_;
    std::string model_;
};

// POST {image: base64 PPM bytes, caption} -> {boxes: [[x0,y0,x1,y1], ...],
// scores: [...]}. One retry on transport failure, then BackendError.
class HttpDetectorClient : public DetectorClient {
public:
    explicit HttpDetectorClient(std::string endpoint);
    std::vector<Detection> detect(const Image& image, const std::string& caption) override;

private:
    std::string endpoint_;
};

}  // namespace gas
