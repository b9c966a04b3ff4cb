#include "ock/scene.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace ock {

namespace {

constexpr int kPlacementAttempts = 1000;

// Uniform double in [0,1) from the top 53 bits of the generator output.
// Hand-rolled so clip content does not depend on the standard library's
// distribution implementation.
double next_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double next_range(std::mt19937_64& rng, double lo, double hi) {
    return lo + (hi - lo) * next_unit(rng);
}

struct ObjectSpec {
    Shape shape;
    double radius;        // nominal size parameter, normalized units
    double bound_radius;  // circumscribing radius used for walls/overlap
    std::array<double, 3> color;
    double px, py;        // center
    double vx, vy;
};

// Circumscribing radius per shape so the full silhouette stays inside the
// frame when the center is kept within [bound, 1-bound].
double bounding_radius(Shape s, double r) {
    switch (s) {
        case Shape::circle: return r;
        case Shape::square: return r * 0.82 * std::numbers::sqrt2;
        case Shape::triangle: return r * 1.25;
    }
    return r;
}

std::array<double, 3> hsv_to_rgb(double h, double s, double v) {
    const double c = v * s;
    const double hp = h * 6.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1)      { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else             { r = c; b = x; }
    const double m = v - c;
    return {r + m, g + m, b + m};
}

bool inside_shape(const ObjectSpec& o, double x, double y) {
    const double dx = x - o.px;
    const double dy = y - o.py;
    switch (o.shape) {
        case Shape::circle:
            return dx * dx + dy * dy <= o.radius * o.radius;
        case Shape::square: {
            const double a = o.radius * 0.82;
            return std::abs(dx) <= a && std::abs(dy) <= a;
        }
        case Shape::triangle: {
            // Equilateral triangle, circumradius 1.25*r, centroid at the
            // object center so the mask centroid matches gt_positions.
            const double rho = o.radius * 1.25;
            double vx0 = 0, vy0 = -rho;                          // apex (screen-up)
            double vx1 = rho * 0.8660254037844386, vy1 = rho * 0.5;
            double vx2 = -vx1, vy2 = vy1;
            auto cross = [](double ax, double ay, double bx, double by) {
                return ax * by - ay * bx;
            };
            const double c0 = cross(vx1 - vx0, vy1 - vy0, dx - vx0, dy - vy0);
            const double c1 = cross(vx2 - vx1, vy2 - vy1, dx - vx1, dy - vy1);
            const double c2 = cross(vx0 - vx2, vy0 - vy2, dx - vx2, dy - vy2);
            return (c0 >= 0 && c1 >= 0 && c2 >= 0) || (c0 <= 0 && c1 <= 0 && c2 <= 0);
        }
    }
    return false;
}

// Simulates center trajectories for all frames. Returns false when the
// non-overlap requirement is violated (collisions disabled).
bool simulate_trajectories(std::vector<ObjectSpec>& objs, const SceneConfig& cfg,
                           std::vector<std::vector<std::array<double, 4>>>& track) {
    const int n = cfg.num_objects;
    track.assign(cfg.num_frames, std::vector<std::array<double, 4>>(n));
    auto overlap = [&](int t) {
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                const double dx = track[t][i][0] - track[t][j][0];
                const double dy = track[t][i][1] - track[t][j][1];
                const double rr = objs[i].bound_radius + objs[j].bound_radius;
                if (dx * dx + dy * dy < rr * rr) return true;
            }
        }
        return false;
    };

    for (int i = 0; i < n; ++i) {
        track[0][i] = {objs[i].px, objs[i].py, objs[i].vx, objs[i].vy};
    }
    if (!cfg.collisions && overlap(0)) return false;

    for (int t = 1; t < cfg.num_frames; ++t) {
        for (int i = 0; i < n; ++i) {
            auto [px, py, vx, vy] = track[t - 1][i];
            const double b = objs[i].bound_radius;
            auto [npx, nvx] = reflect_axis(px, vx, b, 1.0 - b, cfg.restitution);
            auto [npy, nvy] = reflect_axis(py, vy, b, 1.0 - b, cfg.restitution);
            track[t][i] = {npx, npy, nvx, nvy};
        }
        if (cfg.collisions) {
            // Equal-mass elastic response: exchange the velocity component
            // along the line of centers for overlapping, approaching pairs.
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    double dx = track[t][j][0] - track[t][i][0];
                    double dy = track[t][j][1] - track[t][i][1];
                    const double rr = objs[i].bound_radius + objs[j].bound_radius;
                    const double d2 = dx * dx + dy * dy;
                    if (d2 >= rr * rr || d2 == 0.0) continue;
                    const double d = std::sqrt(d2);
                    dx /= d; dy /= d;
                    const double rel = (track[t][i][2] - track[t][j][2]) * dx +
                                       (track[t][i][3] - track[t][j][3]) * dy;
                    if (rel <= 0) continue;  // separating already
                    track[t][i][2] -= rel * dx; track[t][i][3] -= rel * dy;
                    track[t][j][2] += rel * dx; track[t][j][3] += rel * dy;
                }
            }
        } else if (overlap(t)) {
            return false;
        }
    }
    return true;
}

}  // namespace

void SceneConfig::validate() const {
    if (num_objects < 1) throw std::invalid_argument("SceneConfig: num_objects must be >= 1");
    if (num_frames < 2) throw std::invalid_argument("SceneConfig: num_frames must be >= 2");
    if (image_size < 16) throw std::invalid_argument("SceneConfig: image_size must be >= 16");
    if (speed_min > speed_max) throw std::invalid_argument("SceneConfig: speed range inverted");
    if (speed_min < 0) throw std::invalid_argument("SceneConfig: speeds must be nonnegative");
    if (!(restitution > 0.0f) || restitution > 1.0f) {
        throw std::invalid_argument("SceneConfig: restitution must be in (0,1]");
    }
    if (shape_palette.empty()) throw std::invalid_argument("SceneConfig: empty shape palette");
    if (radius_min > radius_max || radius_min <= 0) {
        throw std::invalid_argument("SceneConfig: bad radius range");
    }
}

void VideoClip::validate() const {
    const int64_t T = frames.size(0);
    const int64_t H = frames.size(1);
    if (frames.dim() != 4 || frames.size(3) != 3) {
        throw std::runtime_error("VideoClip: frames must be [T,H,W,3]");
    }
    if (gt_masks.dim() != 3 || gt_masks.size(0) != T || gt_masks.size(1) != H) {
        throw std::runtime_error("VideoClip: gt_masks shape mismatch");
    }
    if (gt_positions.dim() != 3 || gt_positions.size(0) != T || gt_positions.size(2) != 2) {
        throw std::runtime_error("VideoClip: gt_positions must be [T,N,2]");
    }
    if (gt_velocities.sizes() != gt_positions.sizes()) {
        throw std::runtime_error("VideoClip: gt_velocities shape mismatch");
    }
    if (!torch::isfinite(frames).all().item<bool>()) {
        throw std::runtime_error("VideoClip: non-finite frame values");
    }
    const auto pos_min = gt_positions.min().item<float>();
    const auto pos_max = gt_positions.max().item<float>();
    if (pos_min < 0.0f || pos_max > 1.0f) {
        throw std::runtime_error("VideoClip: gt_positions outside [0,1]^2");
    }
    const int64_t n = num_objects();
    if (gt_masks.min().item<int>() < 0 || gt_masks.max().item<int>() > static_cast<int>(n)) {
        throw std::runtime_error("VideoClip: mask labels outside {0.." + std::to_string(n) + "}");
    }
    auto counts = torch::bincount(gt_masks.reshape({-1}).to(torch::kLong),
                                  /*weights=*/{}, /*minlength=*/n + 1);
    if ((counts == 0).any().item<bool>()) {
        throw std::runtime_error("VideoClip: mask labels are not exactly {0.." +
                                 std::to_string(n) + "}");
    }
}

std::pair<double, double> reflect_axis(double p, double v, double lo, double hi,
                                       double restitution) {
    p += v;
    // Multiple reflections can occur in one step when the interval is small.
    for (int guard = 0; guard < 64 && (p < lo || p > hi); ++guard) {
        if (p < lo) {
            p = lo + (lo - p) * restitution;
            v = -v * restitution;
        } else {
            p = hi - (p - hi) * restitution;
            v = -v * restitution;
        }
    }
    return {p, v};
}

VideoClip simulate_clip(const SceneConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    const int n = config.num_objects;
    const int size = config.image_size;
    const int T = config.num_frames;

    std::vector<ObjectSpec> objs(n);
    std::vector<std::vector<std::array<double, 4>>> track;

    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
        const double hue0 = next_unit(rng);
        bool layout_ok = true;
        for (int i = 0; i < n; ++i) {
            ObjectSpec& o = objs[i];
            o.shape = config.shape_palette[rng() % config.shape_palette.size()];
            o.radius = next_range(rng, config.radius_min, config.radius_max);
            o.bound_radius = bounding_radius(o.shape, o.radius);
            // Golden-angle hue steps keep colors well separated.
            o.color = hsv_to_rgb(std::fmod(hue0 + 0.381966 * i, 1.0), 0.85, 0.9);
            const double speed = next_range(rng, config.speed_min, config.speed_max);
            const double ang = next_range(rng, 0.0, 2.0 * std::numbers::pi);
            o.vx = speed * std::cos(ang);
            o.vy = speed * std::sin(ang);
            bool ok = false;
            for (int k = 0; k < kPlacementAttempts && !ok; ++k) {
                o.px = next_range(rng, o.bound_radius, 1.0 - o.bound_radius);
                o.py = next_range(rng, o.bound_radius, 1.0 - o.bound_radius);
                ok = true;
                for (int j = 0; j < i; ++j) {
                    const double dx = o.px - objs[j].px;
                    const double dy = o.py - objs[j].py;
                    const double rr = o.bound_radius + objs[j].bound_radius;
                    if (dx * dx + dy * dy < rr * rr) { ok = false; break; }
                }
            }
            if (!ok) { layout_ok = false; break; }
        }
        placed = layout_ok && simulate_trajectories(objs, config, track);
    }
    if (!placed) {
        throw std::runtime_error("scene too crowded");
    }

    VideoClip clip;
    clip.seed = config.seed;
    clip.frames = torch::empty({T, size, size, 3}, torch::kFloat32);
    clip.gt_masks = torch::zeros({T, size, size}, torch::kInt32);
    clip.gt_positions = torch::empty({T, n, 2}, torch::kFloat32);
    clip.gt_velocities = torch::empty({T, n, 2}, torch::kFloat32);

    auto frames_a = clip.frames.accessor<float, 4>();
    auto masks_a = clip.gt_masks.accessor<int, 3>();
    auto pos_a = clip.gt_positions.accessor<float, 3>();
    auto vel_a = clip.gt_velocities.accessor<float, 3>();

    constexpr int kSS = 4;  // supersampling taps per axis
    const double inv_size = 1.0 / size;

    for (int t = 0; t < T; ++t) {
        for (int i = 0; i < n; ++i) {
            objs[i].px = track[t][i][0];
            objs[i].py = track[t][i][1];
            pos_a[t][i][0] = static_cast<float>(track[t][i][0]);
            pos_a[t][i][1] = static_cast<float>(track[t][i][1]);
            vel_a[t][i][0] = static_cast<float>(track[t][i][2]);
            vel_a[t][i][1] = static_cast<float>(track[t][i][3]);
        }
        for (int row = 0; row < size; ++row) {
            for (int col = 0; col < size; ++col) {
                double r = 0.5, g = 0.5, b = 0.5;  // gray background
                int label = 0;
                for (int i = 0; i < n; ++i) {
                    const ObjectSpec& o = objs[i];
                    // Cheap reject on the bounding box before supersampling.
                    const double cx = (col + 0.5) * inv_size;
                    const double cy = (row + 0.5) * inv_size;
                    const double br = o.bound_radius + inv_size;
                    if (std::abs(cx - o.px) > br || std::abs(cy - o.py) > br) continue;
                    int hit = 0;
                    for (int sy = 0; sy < kSS; ++sy) {
                        for (int sx = 0; sx < kSS; ++sx) {
                            const double x = (col + (sx + 0.5) / kSS) * inv_size;
                            const double y = (row + (sy + 0.5) / kSS) * inv_size;
                            hit += inside_shape(o, x, y) ? 1 : 0;
                        }
                    }
                    if (hit == 0) continue;
                    const double cov = static_cast<double>(hit) / (kSS * kSS);
                    r = r * (1 - cov) + o.color[0] * cov;
                    g = g * (1 - cov) + o.color[1] * cov;
                    b = b * (1 - cov) + o.color[2] * cov;
                    if (cov >= 0.5) label = i + 1;
                }
                frames_a[t][row][col][0] = static_cast<float>(r);
                frames_a[t][row][col][1] = static_cast<float>(g);
                frames_a[t][row][col][2] = static_cast<float>(b);
                masks_a[t][row][col] = label;
            }
        }
    }
    return clip;
}

}  // namespace ock
