#include "ground/view_segmenter.hpp"

#include <algorithm>
#include <cmath>

namespace sg {

GroundingResponse ground_view(GroundingBackend& backend, const ViewRequest& request) {
    if (request.query.empty()) {
        throw InputError("empty query");
    }
    if (request.image == nullptr) {
        throw InputError("view request carries no image");
    }
    GroundingResponse resp = backend.ground(request);
    const float w = static_cast<float>(request.image->width);
    const float h = static_cast<float>(request.image->height);
    resp.bbox.x1 = std::clamp(resp.bbox.x1, 0.0f, w);
    resp.bbox.x2 = std::clamp(resp.bbox.x2, 0.0f, w);
    resp.bbox.y1 = std::clamp(resp.bbox.y1, 0.0f, h);
    resp.bbox.y2 = std::clamp(resp.bbox.y2, 0.0f, h);
    if (!(resp.bbox.x1 < resp.bbox.x2) || !(resp.bbox.y1 < resp.bbox.y2)) {
        throw GroundingFailedError("backend returned a degenerate box for camera " +
                                   std::to_string(request.camera_id));
    }
    return resp;
}

Mask2D box_to_mask(GroundingBackend& backend, const ViewRequest& request, const BBox& bbox) {
    Mask2D mask = backend.box_to_mask(request, bbox);
    if (mask.width != request.image->width || mask.height != request.image->height) {
        throw BackendError("backend mask dimensions do not match the image");
    }
    if (mask.area() == 0) {
        throw GroundingFailedError("backend produced an empty mask for camera " +
                                   std::to_string(request.camera_id));
    }
    return mask;
}

IdInference infer_instance_id(const Mask2D& mask, const IdentityMap& idmap, float tau) {
    if (mask.width != idmap.width || mask.height != idmap.height) {
        throw DimensionError("mask " + std::to_string(mask.width) + "x" +
                             std::to_string(mask.height) + " vs identity map " +
                             std::to_string(idmap.width) + "x" + std::to_string(idmap.height));
    }
    const long mask_area = mask.area();
    if (mask_area == 0) {
        return {std::nullopt, 0.0};
    }
    std::vector<long> overlap(static_cast<size_t>(idmap.max_id()) + 1, 0);
    for (size_t i = 0; i < mask.bits.size(); ++i) {
        if (mask.bits[i] && idmap.ids[i] > 0) {
            ++overlap[static_cast<size_t>(idmap.ids[i])];
        }
    }
    int winner = 0;
    long best = 0;
    for (size_t c = 1; c < overlap.size(); ++c) {
        if (overlap[c] > best) {
            best = overlap[c];
            winner = static_cast<int>(c);
        }
    }
    const double fraction =
        winner > 0 ? static_cast<double>(best) / static_cast<double>(mask_area) : 0.0;
    if (winner == 0 || fraction < static_cast<double>(tau)) {
        return {std::nullopt, fraction};
    }
    return {winner, fraction};
}

GroundingOutcome segment_view(GroundingBackend& backend, const ViewRequest& request,
                              const IdentityMap& idmap, float tau) {
    GroundingOutcome outcome;
    outcome.camera_id = request.camera_id;
    try {
        outcome.response = ground_view(backend, request);
        outcome.mask2d = box_to_mask(backend, request, outcome.response.bbox);
    } catch (const GroundingFailedError& e) {
        outcome.abstain_reason = e.what();
        return outcome;
    }
    const IdInference inferred = infer_instance_id(outcome.mask2d, idmap, tau);
    outcome.instance_id = inferred.instance_id;
    outcome.overlap_fraction = inferred.overlap_fraction;
    if (!outcome.instance_id) {
        outcome.abstain_reason = "mask overlap below threshold";
    }
    return outcome;
}

} // namespace sg
