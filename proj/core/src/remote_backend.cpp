#include "gas/remote_backend.hpp"

#include <bit>
#include <cstring>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gas/base64.hpp"
#include "gas/error.hpp"

static_assert(std::endian::native == std::endian::little,
              "latent wire codec assumes a little-endian host");

using nlohmann::json;

namespace gas {

std::string latent_to_base64_f32(const LatentGrid& grid) {
    std::vector<std::uint8_t> bytes(grid.size() * sizeof(float));
    float* out = reinterpret_cast<float*>(bytes.data());
    for (std::size_t i = 0; i < grid.size(); ++i) out[i] = float(grid[i]);
    return base64_encode(bytes);
}

LatentGrid latent_from_base64_f32(const std::string& payload, int channels, int height,
                                  int width) {
    const std::vector<std::uint8_t> bytes = base64_decode(payload);
    const std::size_t count = std::size_t(channels) * height * width;
    if (bytes.size() != count * sizeof(float)) {
        throw ParseError("latent payload size does not match shape", payload);
    }
    std::vector<double> values(count);
    const float* in = reinterpret_cast<const float*>(bytes.data());
    for (std::size_t i = 0; i < count; ++i) values[i] = double(in[i]);
    LatentGrid grid = LatentGrid::from_values(channels, height, width, std::move(values));
    if (!grid.all_finite()) {
        throw Error(ErrorCode::backend, "remote backend returned non-finite latent values");
    }
    return grid;
}

RemoteBackend::RemoteBackend(std::string endpoint) : endpoint_(std::move(endpoint)) {
    if (endpoint_.find("://") == std::string::npos) {
        throw Error(ErrorCode::config, "remote backend endpoint must include a scheme");
    }
    while (!endpoint_.empty() && endpoint_.back() == '/') endpoint_.pop_back();
}

LatentGrid RemoteBackend::predict_noise(const LatentGrid& z_t, int t,
                                        const Condition& cond) const {
    cond.validate();
    json body;
    body["latent"] = latent_to_base64_f32(z_t);
    body["shape"] = {z_t.channels(), z_t.height(), z_t.width()};
    body["timestep"] = t;
    body["text"] = cond.text;
    body["is_null"] = cond.is_null();
    const std::string payload = body.dump();

    const auto scheme_end = endpoint_.find("://");
    const auto path_start = endpoint_.find('/', scheme_end + 3);
    const std::string base =
        path_start == std::string::npos ? endpoint_ : endpoint_.substr(0, path_start);
    const std::string route =
        (path_start == std::string::npos ? std::string() : endpoint_.substr(path_start)) +
        "/predict_noise";

    std::string last_error;
    const int max_attempts = 2;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        httplib::Client client(base);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(300, 0);
        auto res = client.Post(route, payload, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            throw BackendError("predict_noise returned HTTP " + std::to_string(res->status) +
                                   ": " + res->body,
                               attempt, false);
        }
        json response;
        try {
            response = json::parse(res->body);
        } catch (const json::exception& e) {
            throw ParseError(std::string("predict_noise returned invalid JSON: ") + e.what(),
                             res->body);
        }
        try {
            const json& shape = response.at("shape");
            LatentGrid eps = latent_from_base64_f32(response.at("latent").get<std::string>(),
                                                    shape.at(0).get<int>(), shape.at(1).get<int>(),
                                                    shape.at(2).get<int>());
            if (!eps.same_shape(z_t)) {
                throw BackendError("predict_noise returned a mismatched latent shape", attempt,
                                   false);
            }
            return eps;
        } catch (const json::exception&) {
            throw ParseError("predict_noise response missing latent/shape", res->body);
        }
    }
    throw BackendError("transport failure contacting " + endpoint_ + ": " + last_error,
                       max_attempts, true);
}

}  // namespace gas
