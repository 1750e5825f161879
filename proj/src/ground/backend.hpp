#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>

#include "core/image.hpp"
#include "core/types.hpp"

namespace sg {

// Pixel-space box, end-exclusive: [x1,x2) x [y1,y2).
struct BBox {
    float x1 = 0.0f, y1 = 0.0f, x2 = 0.0f, y2 = 0.0f;
    float area() const { return (x2 > x1 && y2 > y1) ? (x2 - x1) * (y2 - y1) : 0.0f; }
};

struct GroundingResponse {
    BBox bbox;
    std::string category;
    std::string rationale;
};

// One grounding call: a rendered view plus the language query.
struct ViewRequest {
    int camera_id = 0;
    const ImageRGB* image = nullptr;
    std::string query;
};

// Image-level grounding service. Implementations throw GroundingFailedError
// when a view cannot answer (the view then abstains from voting) and
// BackendError on transport/protocol failures.
class GroundingBackend {
public:
    virtual ~GroundingBackend() = default;
    virtual std::string name() const = 0;
    virtual GroundingResponse ground(const ViewRequest& request) = 0;
    virtual Mask2D box_to_mask(const ViewRequest& request, const BBox& bbox) = 0;
};

// Answers from benchmark ground truth: per-camera identity maps plus a
// query -> instance-id table. Unknown queries and views where the target is
// not visible raise GroundingFailedError.
class OracleBackend : public GroundingBackend {
public:
    OracleBackend(std::map<int, IdentityMap> truth_maps, std::map<std::string, int> query_to_id)
        : truth_(std::move(truth_maps)), table_(std::move(query_to_id)) {}

    std::string name() const override { return "oracle"; }
    GroundingResponse ground(const ViewRequest& request) override;
    Mask2D box_to_mask(const ViewRequest& request, const BBox& bbox) override;

private:
    Mask2D silhouette(const ViewRequest& request) const;
    std::map<int, IdentityMap> truth_;
    std::map<std::string, int> table_;
};

struct RemoteBackendConfig {
    std::string ground_url;  // base URL of the grounding service
    std::string mask_url;    // base URL of the mask service; empty = fill the box
    std::string prompt_template =
        "Locate the single object referred to by: {query}. Respond with strict JSON "
        "{\"bbox\": [x1, y1, x2, y2], \"category\": \"...\", \"rationale\": \"...\"}.";
    int timeout_seconds = 60;
    int max_in_flight = 4;
};

// JSON-over-HTTP backend:
//   POST {ground_url}/v1/ground  {"image_b64": <PNG b64>, "query": str}
//     -> {"bbox": [x1,y1,x2,y2], "category": str, "rationale": str}
//   POST {mask_url}/v1/mask      {"image_b64": ..., "bbox": [..]}
//     -> {"rle": {"size": [H,W], "counts": [ints, background run first]}}
// 5xx and transport errors are retried (3 attempts), malformed JSON replies
// twice; exhausted retries raise BackendError carrying the retry count.
class RemoteBackend : public GroundingBackend {
public:
    explicit RemoteBackend(RemoteBackendConfig config);
    ~RemoteBackend() override;

    std::string name() const override { return config_.mask_url.empty() ? "bbox-fill" : "remote"; }
    GroundingResponse ground(const ViewRequest& request) override;
    Mask2D box_to_mask(const ViewRequest& request, const BBox& bbox) override;

private:
    std::string post_json(const std::string& base_url, const std::string& path,
                          const std::string& body);
    RemoteBackendConfig config_;
    struct Limiter;
    std::unique_ptr<Limiter> limiter_;
};

// Decodes the mask service's run-length encoding (background run first,
// row-major). Throws BackendError when the runs do not sum to H*W.
Mask2D decode_rle_mask(int height, int width, const std::vector<long>& counts);

// Backend factory used by the CLI; kind is one of oracle | bbox-fill | remote.
// The oracle kind requires `truth_manifest` (a benchmark manifest path).
std::unique_ptr<GroundingBackend> make_backend(const std::string& kind,
                                               const std::string& truth_manifest,
                                               const RemoteBackendConfig& remote_config);

} // namespace sg
