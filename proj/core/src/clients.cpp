#include "gas/clients.hpp"

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gas/base64.hpp"
#include "gas/error.hpp"
#include "gas/sha256.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace gas {

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::backend, "cannot read fixture: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// write-then-rename so readers never observe a partial entry
void atomic_write(const fs::path& path, const std::string& contents) {
    fs::create_directories(path.parent_path());
    static std::atomic<std::uint64_t> counter{0};
    const fs::path tmp =
        path.parent_path() / (path.filename().string() + ".tmp" + std::to_string(counter++));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << contents;
        if (!out) throw Error(ErrorCode::backend, "cannot write cache entry: " + tmp.string());
    }
    fs::rename(tmp, path);
}

std::string ppm_bytes(const Image& image) {
    std::ostringstream out;
    out << "P6\n" << image.width << " " << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), std::streamsize(image.rgb.size()));
    return out.str();
}

struct SplitUrl {
    std::string base;  // scheme://host[:port]
    std::string path;  // /route
};

SplitUrl split_url(const std::string& endpoint) {
    const auto scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::config, "endpoint must include a scheme: " + endpoint);
    }
    const auto  path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

// One retry on transport failure; HTTP errors are not retried.
json post_json(const std::string& endpoint, const json& body,
               const httplib::Headers& headers) {
    const SplitUrl url = split_url(endpoint);
    const std::string payload = body.dump();
    std::string last_error;
    const int max_attempts = 2;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        httplib::Client client(url.base);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(120, 0);
        auto res = client.Post(url.path, headers, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            throw BackendError("endpoint " + endpoint + " returned HTTP " +
                                   std::to_string(res->status) + ": " + res->body,
                               attempt, false);
        }
        try {
            return json::parse(res->body);
        } catch (const json::exception& e) {
            throw ParseError(std::string("endpoint returned invalid JSON: ") + e.what(),
                             res->body);
        }
    }
    throw BackendError("transport failure contacting " + endpoint + ": " + last_error,
                       max_attempts, true);
}

}  // namespace

std::string chat_cache_key(const std::string& prompt, const Image& image) {
    Sha256 h;
    h.update(std::string("chat\n"));
    h.update(Sha256::hash_hex(prompt));
    h.update(image_sha256(image));
    return h.hex_digest();
}

std::string detector_cache_key(const std::string& caption, const Image& image) {
    Sha256 h;
    h.update(std::string("detect\n"));
    h.update(Sha256::hash_hex(caption));
    h.update(image_sha256(image));
    return h.hex_digest();
}

void write_chat_fixture(const std::string& dir, const std::string& prompt, const Image& image,
                        const std::string& response) {
    json entry;
    entry["prompt_sha256"] = Sha256::hash_hex(prompt);
    entry["image_sha256"] = image_sha256(image);
    entry["response"] = response;
    atomic_write(fs::path(dir) / (chat_cache_key(prompt, image) + ".json"), entry.dump(2) + "\n");
}

void write_detector_fixture(const std::string& dir, const std::string& caption,
                            const Image& image, const std::vector<Detection>& detections) {
    json boxes = json::array();
    json scores = json::array();
    for (const Detection& d : detections) {
        boxes.push_back({d.box[0], d.box[1], d.box[2], d.box[3]});
        scores.push_back(d.score);
    }
    json entry;
    entry["caption"] = caption;
    entry["image_sha256"] = image_sha256(image);
    entry["boxes"] = boxes;
    entry["scores"] = scores;
    atomic_write(fs::path(dir) / (detector_cache_key(caption, image) + ".json"),
                 entry.dump(2) + "\n");
}

namespace {

std::string load_chat_entry(const fs::path& file) {
    const json entry = json::parse(read_file(file));
    return entry.at("response").get<std::string>();
}

std::vector<Detection> load_detector_entry(const fs::path& file) {
    const json entry = json::parse(read_file(file));
    const json& boxes = entry.at("boxes");
    const json& scores = entry.at("scores");
    if (boxes.size() != scores.size()) {
        throw ParseError("detector entry boxes/scores length mismatch", entry.dump());
    }
    std::vector<Detection> out;
    out.reserve(boxes.size());
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        Detection d;
        for (int j = 0; j < 4; ++j) d.box[j] = boxes[i].at(j).get<double>();
        d.score = scores[i].get<double>();
        out.push_back(d);
    }
    return out;
}

}  // namespace

CachingChatClient::CachingChatClient(std::string cache_dir, std::shared_ptr<ChatClient> inner)
    : cache_dir_(std::move(cache_dir)), inner_(std::move(inner)) {}

std::string CachingChatClient::complete(const std::string& prompt, const Image& image) {
    const fs::path file = fs::path(cache_dir_) / (chat_cache_key(prompt, image) + ".json");
    if (fs::exists(file)) return load_chat_entry(file);
    const std::string response = inner_->complete(prompt, image);
    write_chat_fixture(cache_dir_, prompt, image, response);
    return response;
}

CachingDetectorClient::CachingDetectorClient(std::string cache_dir,
                                             std::shared_ptr<DetectorClient> inner)
    : cache_dir_(std::move(cache_dir)), inner_(std::move(inner)) {}

std::vector<Detection> CachingDetectorClient::detect(const Image& image,
                                                     const std::string& caption) {
    const fs::path file = fs::path(cache_dir_) / (detector_cache_key(caption, image) + ".json");
    if (fs::exists(file)) return load_detector_entry(file);
    const std::vector<Detection> detections = inner_->detect(image, caption);
    write_detector_fixture(cache_dir_, caption, image, detections);
    return detections;
}

ReplayChatClient::ReplayChatClient(std::string fixture_dir)
    : fixture_dir_(std::move(fixture_dir)) {}

std::string ReplayChatClient::complete(const std::string& prompt, const Image& image) {
    const fs::path file = fs::path(fixture_dir_) / (chat_cache_key(prompt, image) + ".json");
    if (!fs::exists(file)) {
        throw BackendError("no chat fixture for this prompt/image in " + fixture_dir_, 1, false);
    }
    return load_chat_entry(file);
}

ReplayDetectorClient::ReplayDetectorClient(std::string fixture_dir)
    : fixture_dir_(std::move(fixture_dir)) {}

std::vector<Detection> ReplayDetectorClient::detect(const Image& image,
                                                    const std::string& caption) {
    const fs::path file = fs::path(fixture_dir_) / (detector_cache_key(caption, image) + ".json");
    if (!fs::exists(file)) {
        throw BackendError("no detector fixture for caption '" + caption + "' in " + fixture_dir_,
                           1, false);
    }
    return load_detector_entry(file);
}

HttpChatClient::HttpChatClient(std::string endpoint, std::string model)
    : endpoint_(std::move(endpoint)), model_(std::move(model)) {}

std::string HttpChatClient::complete(const std::string& prompt, const Image& image) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", prompt}});
    content.push_back({{"type", "image"}, {"image_base64", base64_encode(ppm_bytes(image))}});
    json body;
    body["model"] = model_;
    body["messages"] = json::array({json{{"role", "user"}, {"content", content}}});

    httplib::Headers headers;
    if (const char* key = std::getenv("GAS_CHAT_API_KEY")) {
        headers.emplace("Authorization", std::string("Bearer ") + key);
    }

    const json response = post_json(endpoint_, body, headers);
    try {
        return response.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw ParseError("chat response missing choices[0].message.content", response.dump());
    }
}

HttpDetectorClient::HttpDetectorClient(std::string endpoint) : endpoint_(std::move(endpoint)) {}

std::vector<Detection> HttpDetectorClient::detect(const Image& image,
                                                  const std::string& caption) {
    json body;
    body["image"] = base64_encode(ppm_bytes(image));
    body["caption"] = caption;

    const json response = post_json(endpoint_, body, {});
    try {
        const json& boxes = response.at("boxes");
        const json& scores = response.at("scores");
        if (boxes.size() != scores.size()) {
            throw ParseError("detector boxes/scores length mismatch", response.dump());
        }
        std::vector<Detection> out;
        out.reserve(boxes.size());
        for (std::size_t i = 0; i < boxes.size(); ++i) {
            Detection d;
            for (int j = 0; j < 4; ++j) d.box[j] = boxes[i].at(j).get<double>();
            d.score = scores[i].get<double>();
            out.push_back(d);
        }
        return out;
    } catch (const json::exception&) {
        throw ParseError("detector response missing boxes/scores arrays", response.dump());
    }
}

}  // namespace gas
