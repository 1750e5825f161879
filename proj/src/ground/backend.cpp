#include "ground/backend.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <semaphore>

#include "bench/harness.hpp"
#include "core/png_io.hpp"
#include "util/base64.hpp"
#include "util/errors.hpp"

namespace sg {

GroundingResponse OracleBackend::ground(const ViewRequest& request) {
    const Mask2D mask = silhouette(request);
    int min_x = mask.width, min_y = mask.height, max_x = -1, max_y = -1;
    for (int y = 0; y < mask.height; ++y) {
        for (int x = 0; x < mask.width; ++x) {
            if (mask.at(x, y)) {
                min_x = std::min(min_x, x);
                min_y = std::min(min_y, y);
                max_x = std::max(max_x, x);
                max_y = std::max(max_y, y);
            }
        }
    }
    GroundingResponse resp;
    resp.bbox = {static_cast<float>(min_x), static_cast<float>(min_y),
                 static_cast<float>(max_x + 1), static_cast<float>(max_y + 1)};
    resp.category = "instance-" + std::to_string(table_.at(request.query));
    resp.rationale = "benchmark ground truth";
    return resp;
}

Mask2D OracleBackend::box_to_mask(const ViewRequest& request, const BBox&) {
    return silhouette(request);
}

Mask2D OracleBackend::silhouette(const ViewRequest& request) const {
    const auto q = table_.find(request.query);
    if (q == table_.end() || q->second <= 0) {
        throw GroundingFailedError("oracle has no target for query \"" + request.query + "\"");
    }
    const auto t = truth_.find(request.camera_id);
    if (t == truth_.end()) {
        throw GroundingFailedError("oracle has no truth map for camera " +
                                   std::to_string(request.camera_id));
    }
    Mask2D mask = t->second.mask_for(q->second);
    if (mask.area() == 0) {
        throw GroundingFailedError("target instance " + std::to_string(q->second) +
                                   " not visible from camera " +
                                   std::to_string(request.camera_id));
    }
    return mask;
}

// Caps concurrent HTTP requests across threads.
struct RemoteBackend::Limiter {
    explicit Limiter(int slots) : sem(slots) {}
    std::counting_semaphore<256> sem;
};

RemoteBackend::RemoteBackend(RemoteBackendConfig config) : config_(std::move(config)) {
    if (config_.ground_url.empty()) {
        throw ConfigError("remote backend requires a grounding service URL");
    }
    if (config_.max_in_flight < 1 || config_.max_in_flight > 256) {
        throw ConfigError("max_in_flight must be in [1, 256]");
    }
    limiter_ = std::make_unique<Limiter>(config_.max_in_flight);
}

RemoteBackend::~RemoteBackend() = default;

namespace {

    std::string image_to_b64(const ImageRGB& image) {
        const std::vector<uint8_t> rgb = image.to_rgb8();
        return base64_encode(encode_png_rgb8(image.width, image.height, rgb.data()));
    }

    std::string apply_template(const std::string& tmpl, const std::string& query) {
        const std::string token = "{query}";
        std::string out = tmpl;
        const size_t pos = out.find(token);
        if (pos == std::string::npos) {
            return query;
        }
        out.replace(pos, token.size(), query);
        return out;
    }

} // namespace

std::string RemoteBackend::post_json(const std::string& base_url, const std::string& path,
                                     const std::string& body) {
    limiter_->sem.acquire();
    struct Release {
        std::counting_semaphore<256>& sem;
        ~Release() { sem.release(); }
    } release{limiter_->sem};

    constexpr int kMaxAttempts = 3;
    int attempts = 0;
    std::string last_error;
    while (attempts < kMaxAttempts) {
        ++attempts;
        httplib::Client client(base_url);
        client.set_connection_timeout(config_.timeout_seconds, 0);
        client.set_read_timeout(config_.timeout_seconds, 0);
        client.set_write_timeout(config_.timeout_seconds, 0);
        httplib::Result res = client.Post(path, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "server returned " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw BackendError(base_url + path + ": server returned " +
                                   std::to_string(res->status),
                               attempts - 1);
        }
        return res->body;
    }
    throw BackendError(base_url + path + ": " + last_error + " after " +
                           std::to_string(attempts) + " attempts",
                       attempts - 1);
}

GroundingResponse RemoteBackend::ground(const ViewRequest& request) {
    if (request.image == nullptr) {
        throw InputError("remote backend needs a rendered image");
    }
    nlohmann::json body;
    body["image_b64"] = image_to_b64(*request.image);
    body["query"] = apply_template(config_.prompt_template, request.query);
    const std::string payload = body.dump();

    // Non-JSON (or schema-violating) replies are retried twice.
    constexpr int kParseAttempts = 3;
    std::string last_error;
    for (int attempt = 1; attempt <= kParseAttempts; ++attempt) {
        const std::string reply = post_json(config_.ground_url, "/v1/ground", payload);
        try {
            const nlohmann::json doc = nlohmann::json::parse(reply);
            const auto& box = doc.at("bbox");
            if (!box.is_array() || box.size() != 4) {
                throw ParseError("bbox must be a 4-element array");
            }
            GroundingResponse resp;
            resp.bbox = {box[0].get<float>(), box[1].get<float>(), box[2].get<float>(),
                         box[3].get<float>()};
            resp.category = doc.value("category", "");
            resp.rationale = doc.value("rationale", "");
            return resp;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    throw BackendError("grounding service reply is not valid JSON (" + last_error + ") after " +
                           std::to_string(kParseAttempts) + " attempts",
                       kParseAttempts - 1);
}

Mask2D RemoteBackend::box_to_mask(const ViewRequest& request, const BBox& bbox) {
    if (request.image == nullptr) {
        throw InputError("remote backend needs a rendered image");
    }
    const int width = request.image->width;
    const int height = request.image->height;
    if (config_.mask_url.empty()) {
        // No mask service configured: fill the box.
        Mask2D mask(width, height);
        const int x0 = std::max(0, static_cast<int>(std::floor(bbox.x1)));
        const int x1 = std::min(width, static_cast<int>(std::ceil(bbox.x2)));
        const int y0 = std::max(0, static_cast<int>(std::floor(bbox.y1)));
        const int y1 = std::min(height, static_cast<int>(std::ceil(bbox.y2)));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                mask.set(x, y, 1);
            }
        }
        return mask;
    }

    nlohmann::json body;
    body["image_b64"] = image_to_b64(*request.image);
    body["bbox"] = {bbox.x1, bbox.y1, bbox.x2, bbox.y2};
    const std::string reply = post_json(config_.mask_url, "/v1/mask", body.dump());
    try {
        const nlohmann::json doc = nlohmann::json::parse(reply);
        const auto& rle = doc.at("rle");
        const auto& size = rle.at("size");
        const int h = size.at(0).get<int>();
        const int w = size.at(1).get<int>();
        if (h != height || w != width) {
            throw BackendError("mask service returned size " + std::to_string(w) + "x" +
                               std::to_string(h) + ", expected " + std::to_string(width) + "x" +
                               std::to_string(height));
        }
        std::vector<long> counts;
        for (const auto& c : rle.at("counts")) {
            counts.push_back(c.get<long>());
        }
        return decode_rle_mask(h, w, counts);
    } catch (const BackendError&) {
        throw;
    } catch (const std::exception& e) {
        throw BackendError(std::string("mask service reply violates schema: ") + e.what());
    }
}

Mask2D decode_rle_mask(int height, int width, const std::vector<long>& counts) {
    Mask2D mask(width, height);
    const long total = static_cast<long>(width) * height;
    long pos = 0;
    bool foreground = false; // first run is background
    for (long run : counts) {
        if (run < 0 || pos + run > total) {
            throw BackendError("rle runs exceed image size");
        }
        if (foreground) {
            for (long i = 0; i < run; ++i) {
                mask.bits[static_cast<size_t>(pos + i)] = 1;
            }
        }
        pos += run;
        foreground = !foreground;
    }
    if (pos != total) {
        throw BackendError("rle runs sum to " + std::to_string(pos) + ", expected " +
                           std::to_string(total));
    }
    return mask;
}

std::unique_ptr<GroundingBackend> make_backend(const std::string& kind,
                                               const std::string& truth_manifest,
                                               const RemoteBackendConfig& remote_config) {
    if (kind == "oracle") {
        if (truth_manifest.empty()) {
            throw ConfigError("oracle backend requires a benchmark manifest (--truth)");
        }
        return make_oracle_backend(truth_manifest);
    }
    if (kind == "bbox-fill") {
        RemoteBackendConfig cfg = remote_config;
        cfg.mask_url.clear();
        return std::make_unique<RemoteBackend>(cfg);
    }
    if (kind == "remote") {
        if (remote_config.mask_url.empty()) {
            throw ConfigError("remote backend requires a mask service URL");
        }
        return std::make_unique<RemoteBackend>(remote_config);
    }
    throw ConfigError("unknown backend kind '" + kind + "'");
}

} // namespace sg
