#pragma once

#include <string>
#include <vector>

#include "rsteal/nn/models.hpp"
#include "rsteal/rng.hpp"
#include "rsteal/samplecraft.hpp"
#include "rsteal/tensor.hpp"

namespace rsteal {

// Four axis-aligned Gaussian bars in the plane, n points per class laid out
// in label blocks: class 0 rows [0,n), class 1 rows [n,2n), and so on.
// Means (0,12),(0,-12),(12,0),(-12,0); the first two stretch along x
// (std 5, 0.5), the last two along y (std 0.5, 5).
struct ToyDataset {
    Tensor points{std::vector<int>{0, 2}};
    std::vector<int> labels;
    static constexpr int kClasses = 4;
};

ToyDataset make_toy_dataset(int points_per_class, Rng& rng);

// 2 -> 10 -> relu -> 4 MLP, plain full-batch gradient descent, lr 0.02,
// 100 epochs. A run that ends at or below 95% training accuracy is retried
// from a fresh init drawn off the same rng (up to 5 attempts, so the result
// is still a pure function of dataset + seed); DivergedTraining is thrown
// only when every attempt stalls.
nn::ModelPtr train_toy_mlp(const ToyDataset& data, Rng& rng);

// Probe trajectories for t = 1..max_steps with step size 1, no ball
// constraint and no [0,1] clipping (the domain is the raw plane).
// method is "hee" (entropy ascent) or "ue" (KL-to-uniform descent). The
// trajectory prefix property makes one max_steps run with snapshots exact
// for every shorter horizon, so trace t is the t-step probe bit-for-bit.
std::vector<ProbeTrace> boundary_probe_sweep(nn::Model& model, const ToyDataset& data,
                                             const std::string& method, int max_steps);

// Per-step summary of where the probes sit: batch-mean prediction entropy,
// how many of the C(4,2)=6 unordered {top-1, top-2} class pairs the batch
// touches, and the mean distance to the nearest other probe (spread).
struct CoverageStats {
    std::vector<double> mean_entropy;
    std::vector<int> confusion_pairs; // each in [1, 6]
    std::vector<double> nn_spread;
    std::string to_json() const;
};

// step_batches holds the probe batch per step (index 0 = the originals).
CoverageStats coverage_stats(nn::Model& model, const std::vector<Tensor>& step_batches);

// Collects [originals, probe after 1 step, ..., after max_steps] from a sweep.
std::vector<Tensor> sweep_batches(const Tensor& originals, const std::vector<ProbeTrace>& sweep);

// Writes into out_dir: decision_regions.csv (x,y,class raster over
// [-25,25]^2 at grid_resolution per side), probes_step_<t>.csv (x,y,pred
// per probe) for every step in the sweep, stats.json, and — when render is
// set — a figure_step_<t>.png per step with the probes over the regions.
// Output bytes depend only on the inputs, so re-runs reproduce identically.
void emit_figure_data(nn::Model& model, const ToyDataset& data,
                      const std::vector<ProbeTrace>& sweep, int grid_resolution,
                      const std::string& out_dir, bool render);

} // namespace rsteal
