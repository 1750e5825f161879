#pragma once

#include "ground/backend.hpp"

namespace sg {

// Queries the backend and validates its box: coordinates are clipped to the
// image bounds; a box that is degenerate after clipping raises
// GroundingFailedError (the view abstains upstream).
GroundingResponse ground_view(GroundingBackend& backend, const ViewRequest& request);

// Fetches the binary mask for a validated box. The mask may spill outside
// the box, but an empty mask raises GroundingFailedError.
Mask2D box_to_mask(GroundingBackend& backend, const ViewRequest& request, const BBox& bbox);

// Result of intersecting a 2D mask with the rendered identity map.
struct IdInference {
    std::optional<int> instance_id; // nullopt = abstain
    double overlap_fraction = 0.0;  // winner overlap / mask area
};

// For every candidate id c >= 1, overlap(c) = |mask & pixels(id=c)|. The
// winner is the argmax (ties to the smaller id); abstains when the mask is
// empty or the winner covers less than `tau` of it.
IdInference infer_instance_id(const Mask2D& mask, const IdentityMap& idmap, float tau = 0.25f);

// One view's complete answer for a query.
struct GroundingOutcome {
    int camera_id = 0;
    GroundingResponse response;
    Mask2D mask2d;
    std::optional<int> instance_id; // nullopt = abstain
    double overlap_fraction = 0.0;
    std::string abstain_reason;     // set when instance_id is empty
};

// Full per-view pipeline: ground -> mask -> id inference. Grounding failures
// turn into abstaining outcomes; backend errors propagate.
GroundingOutcome segment_view(GroundingBackend& backend, const ViewRequest& request,
                              const IdentityMap& idmap, float tau = 0.25f);

} // namespace sg
