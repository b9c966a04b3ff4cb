#include "ock/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace ock {

namespace {

torch::Tensor to_gray64(const torch::Tensor& img) {
    torch::Tensor x = img.to(torch::kFloat64);
    if (x.dim() == 3) x = x.mean(-1);
    if (x.dim() != 2) throw std::invalid_argument("metrics: expected [H,W] or [H,W,3]");
    return x;
}

double comb2(double n) { return n * (n - 1.0) * 0.5; }

// Contiguous relabeling of an arbitrary integer label vector.
std::vector<int64_t> compact_labels(const std::vector<int64_t>& raw, int64_t& count) {
    std::unordered_map<int64_t, int64_t> ids;
    std::vector<int64_t> out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        auto [it, inserted] = ids.emplace(raw[i], static_cast<int64_t>(ids.size()));
        out[i] = it->second;
    }
    count = static_cast<int64_t>(ids.size());
    return out;
}

}  // namespace

double psnr(const torch::Tensor& pred, const torch::Tensor& gt) {
    if (pred.sizes() != gt.sizes()) throw std::invalid_argument("psnr: shape mismatch");
    const double mse =
        (pred.to(torch::kFloat64) - gt.to(torch::kFloat64)).pow(2).mean().item<double>();
    if (mse <= 0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

double ssim(const torch::Tensor& pred, const torch::Tensor& gt) {
    if (pred.sizes() != gt.sizes()) throw std::invalid_argument("ssim: shape mismatch");
    torch::Tensor a = to_gray64(pred), b = to_gray64(gt);
    constexpr int64_t kWin = 11;
    constexpr double kSigma = 1.5;
    constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
    if (a.size(0) < kWin || a.size(1) < kWin) {
        throw std::invalid_argument("ssim: image smaller than the 11x11 window");
    }
    torch::Tensor coords = torch::arange(kWin, torch::kFloat64) - (kWin - 1) / 2.0;
    torch::Tensor g1 = torch::exp(-coords.pow(2) / (2.0 * kSigma * kSigma));
    torch::Tensor kernel = torch::outer(g1, g1);
    kernel = (kernel / kernel.sum()).reshape({1, 1, kWin, kWin});

    auto filt = [&](const torch::Tensor& x) {
        return torch::conv2d(x.reshape({1, 1, x.size(0), x.size(1)}), kernel).squeeze();
    };
    torch::Tensor mu_a = filt(a), mu_b = filt(b);
    torch::Tensor var_a = filt(a * a) - mu_a * mu_a;
    torch::Tensor var_b = filt(b * b) - mu_b * mu_b;
    torch::Tensor cov = filt(a * b) - mu_a * mu_b;
    torch::Tensor num = (2.0 * mu_a * mu_b + kC1) * (2.0 * cov + kC2);
    torch::Tensor den = (mu_a * mu_a + mu_b * mu_b + kC1) * (var_a + var_b + kC2);
    return (num / den).mean().item<double>();
}

double fg_ari(const torch::Tensor& pred_labels, const torch::Tensor& gt_labels,
              int64_t background_id) {
    if (pred_labels.sizes() != gt_labels.sizes()) {
        throw std::invalid_argument("fg_ari: shape mismatch");
    }
    torch::Tensor p = pred_labels.reshape({-1}).to(torch::kLong);
    torch::Tensor g = gt_labels.reshape({-1}).to(torch::kLong);
    torch::Tensor keep = g != background_id;
    p = p.masked_select(keep);
    g = g.masked_select(keep);
    const int64_t n = p.size(0);
    if (n == 0) throw std::invalid_argument("fg_ari: no foreground pixels");

    std::vector<int64_t> pv(p.data_ptr<int64_t>(), p.data_ptr<int64_t>() + n);
    std::vector<int64_t> gv(g.data_ptr<int64_t>(), g.data_ptr<int64_t>() + n);
    int64_t np = 0, ng = 0;
    pv = compact_labels(pv, np);
    gv = compact_labels(gv, ng);

    std::vector<double> joint(static_cast<size_t>(np * ng), 0.0);
    std::vector<double> rows(static_cast<size_t>(ng), 0.0), cols(static_cast<size_t>(np), 0.0);
    for (int64_t i = 0; i < n; ++i) {
        joint[static_cast<size_t>(gv[i] * np + pv[i])] += 1.0;
        rows[static_cast<size_t>(gv[i])] += 1.0;
        cols[static_cast<size_t>(pv[i])] += 1.0;
    }
    double sum_ij = 0, sum_a = 0, sum_b = 0;
    for (double c : joint) sum_ij += comb2(c);
    for (double c : rows) sum_a += comb2(c);
    for (double c : cols) sum_b += comb2(c);
    const double total = comb2(static_cast<double>(n));
    const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
    const double max_index = 0.5 * (sum_a + sum_b);
    const double denom = max_index - expected;
    if (denom == 0) return 1.0;  // both partitions trivial: identical by convention
    return (sum_ij - expected) / denom;
}

std::vector<int64_t> hungarian_max(const torch::Tensor& score) {
    if (score.dim() != 2) throw std::invalid_argument("assignment: expected a [R,C] matrix");
    const int64_t r = score.size(0), c = score.size(1);
    if (c > 24) throw std::invalid_argument("assignment: too many columns for exact search");
    torch::Tensor s = score.to(torch::kFloat64).contiguous();
    const double* sd = s.data_ptr<double>();
    const int64_t masks = int64_t(1) << c;
    const double neg = -std::numeric_limits<double>::infinity();

    // dp[i][mask]: best total for the first i rows having consumed column set `mask`.
    std::vector<std::vector<double>> dp(static_cast<size_t>(r + 1),
                                        std::vector<double>(static_cast<size_t>(masks), neg));
    std::vector<std::vector<int8_t>> choice(
        static_cast<size_t>(r + 1), std::vector<int8_t>(static_cast<size_t>(masks), -2));
    dp[0][0] = 0.0;
    for (int64_t i = 0; i < r; ++i) {
        for (int64_t m = 0; m < masks; ++m) {
            const double cur = dp[static_cast<size_t>(i)][static_cast<size_t>(m)];
            if (cur == neg) continue;
            // Leave row i unassigned.
            if (cur > dp[static_cast<size_t>(i + 1)][static_cast<size_t>(m)]) {
                dp[static_cast<size_t>(i + 1)][static_cast<size_t>(m)] = cur;
                choice[static_cast<size_t>(i + 1)][static_cast<size_t>(m)] = -1;
            }
            for (int64_t j = 0; j < c; ++j) {
                if (m & (int64_t(1) << j)) continue;
                const int64_t nm = m | (int64_t(1) << j);
                const double val = cur + sd[i * c + j];
                if (val > dp[static_cast<size_t>(i + 1)][static_cast<size_t>(nm)]) {
                    dp[static_cast<size_t>(i + 1)][static_cast<size_t>(nm)] = val;
                    choice[static_cast<size_t>(i + 1)][static_cast<size_t>(nm)] =
                        static_cast<int8_t>(j);
                }
            }
        }
    }
    int64_t best_mask = 0;
    double best = neg;
    for (int64_t m = 0; m < masks; ++m) {
        if (dp[static_cast<size_t>(r)][static_cast<size_t>(m)] > best) {
            best = dp[static_cast<size_t>(r)][static_cast<size_t>(m)];
            best_mask = m;
        }
    }
    std::vector<int64_t> out(static_cast<size_t>(r), -1);
    int64_t m = best_mask;
    for (int64_t i = r; i > 0; --i) {
        const int8_t j = choice[static_cast<size_t>(i)][static_cast<size_t>(m)];
        if (j >= 0) {
            out[static_cast<size_t>(i - 1)] = j;
            m &= ~(int64_t(1) << j);
        }
    }
    return out;
}

double miou(const torch::Tensor& pred_labels, const torch::Tensor& gt_labels,
            int64_t gt_background_id) {
    if (pred_labels.sizes() != gt_labels.sizes()) {
        throw std::invalid_argument("miou: shape mismatch");
    }
    torch::Tensor p = pred_labels.reshape({-1}).to(torch::kLong);
    torch::Tensor g = gt_labels.reshape({-1}).to(torch::kLong);
    const int64_t n = p.size(0);
    const int64_t* pd = p.data_ptr<int64_t>();
    const int64_t* gd = g.data_ptr<int64_t>();

    // Background is not a matchable mask on either side: a ground-truth object
    // covered only by predicted background counts as unmatched (IoU 0).
    std::unordered_map<int64_t, int64_t> gids, pids;
    for (int64_t i = 0; i < n; ++i) {
        if (gd[i] != gt_background_id) gids.emplace(gd[i], static_cast<int64_t>(gids.size()));
        if (pd[i] != gt_background_id) pids.emplace(pd[i], static_cast<int64_t>(pids.size()));
    }
    if (gids.empty() || pids.empty()) return 0.0;
    const int64_t ng = static_cast<int64_t>(gids.size());
    const int64_t np = static_cast<int64_t>(pids.size());

    std::vector<double> inter(static_cast<size_t>(ng * np), 0.0);
    std::vector<double> gt_area(static_cast<size_t>(ng), 0.0), pr_area(static_cast<size_t>(np), 0.0);
    for (int64_t i = 0; i < n; ++i) {
        const int64_t pj = pd[i] != gt_background_id ? pids[pd[i]] : -1;
        if (pj >= 0) pr_area[static_cast<size_t>(pj)] += 1.0;
        if (gd[i] == gt_background_id) continue;
        const int64_t gi = gids[gd[i]];
        gt_area[static_cast<size_t>(gi)] += 1.0;
        if (pj >= 0) inter[static_cast<size_t>(gi * np + pj)] += 1.0;
    }
    torch::Tensor iou = torch::zeros({ng, np}, torch::kFloat64);
    auto acc = iou.accessor<double, 2>();
    for (int64_t i = 0; i < ng; ++i) {
        for (int64_t j = 0; j < np; ++j) {
            const double is = inter[static_cast<size_t>(i * np + j)];
            const double un = gt_area[static_cast<size_t>(i)] + pr_area[static_cast<size_t>(j)] - is;
            acc[i][j] = un > 0 ? is / un : 0.0;
        }
    }
    std::vector<int64_t> match = hungarian_max(iou);
    double total = 0;
    for (int64_t i = 0; i < ng; ++i) {
        if (match[static_cast<size_t>(i)] >= 0) total += acc[i][match[static_cast<size_t>(i)]];
    }
    return total / static_cast<double>(ng);
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw std::invalid_argument("spearman: need two equal-length series");
    }
    auto ranks = [](const std::vector<double>& x) {
        const size_t n = x.size();
        std::vector<size_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](size_t i, size_t j) { return x[i] < x[j]; });
        std::vector<double> r(n, 0.0);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
            const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (size_t k = i; k <= j; ++k) r[order[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> ra = ranks(a), rb = ranks(b);
    const double n = static_cast<double>(a.size());
    double ma = 0, mb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ma += ra[i];
        mb += rb[i];
    }
    ma /= n;
    mb /= n;
    double num = 0, va = 0, vb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += (ra[i] - ma) * (rb[i] - mb);
        va += (ra[i] - ma) * (ra[i] - ma);
        vb += (rb[i] - mb) * (rb[i] - mb);
    }
    if (va == 0 || vb == 0) return std::numeric_limits<double>::quiet_NaN();
    return num / std::sqrt(va * vb);
}

}  // namespace ock
