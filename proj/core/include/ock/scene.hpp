#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <utility>
#include <vector>

namespace ock {

enum class Shape { circle, square, triangle };

// Configuration for one synthetic bouncing-shapes clip.
struct SceneConfig {
    int num_objects = 2;
    int image_size = 64;         // square frames
    int num_frames = 24;
    std::vector<Shape> shape_palette = {Shape::circle, Shape::square, Shape::triangle};
    float speed_min = 0.015f;    // normalized units / frame
    float speed_max = 0.045f;
    float restitution = 1.0f;    // in (0, 1]
    uint64_t seed = 0;
    // Pairwise elastic collisions between objects. Off by default: wall
    // bounces only, and scenes are resampled until no two objects overlap
    // at any frame.
    bool collisions = false;
    float radius_min = 0.07f;    // normalized shape size
    float radius_max = 0.11f;

    void validate() const;       // throws std::invalid_argument on bad fields
};

struct VideoClip {
    torch::Tensor frames;        // [T,H,W,3] f32 in [0,1]
    torch::Tensor gt_masks;      // [T,H,W] i32, labels 0(=background)..num_objects
    torch::Tensor gt_positions;  // [T,N,2] f32, (x,y) in [0,1]^2
    torch::Tensor gt_velocities; // [T,N,2] f32, units/frame
    uint64_t seed = 0;

    int64_t num_frames() const { return frames.size(0); }
    int64_t image_size() const { return frames.size(1); }
    int64_t num_objects() const { return gt_positions.size(1); }
    void validate() const;       // throws std::runtime_error on invariant violation
};

// Advances one coordinate by v (one frame), reflecting off the walls of
// [lo, hi]. On reflection the position overshoot and the velocity are both
// scaled by the restitution. Returns the updated (position, velocity).
std::pair<double, double> reflect_axis(double p, double v, double lo, double hi,
                                       double restitution);

// Deterministic scene simulation: constant-velocity motion with elastic wall
// bounces. Throws std::runtime_error("scene too crowded") when a
// non-overlapping layout cannot be found within 1000 attempts.
VideoClip simulate_clip(const SceneConfig& config);

}  // namespace ock
