#pragma once

#include <string>
#include <vector>

#include "arteeg/rng.hpp"
#include "arteeg/tensor.hpp"

namespace arteeg {

enum class SourceKind { brain, eye, muscle, heart, channel_noise, other };

const char* kind_name(SourceKind k);
SourceKind kind_from_name(const std::string& name);

struct Source {
    Eigen::VectorXd samples;  // unit variance
    SourceKind label = SourceKind::brain;
    double fs = 0.0;
};

// 1/f background (spectrally synthesized over 1..45 Hz) plus an alpha(8-12 Hz)
// oscillation with random amplitude and phase.
Source synth_brain_source(int t_samples, double fs, RngStream rng);

// eye: biphasic slow pulses; muscle: 20-45 Hz band bursts; heart: QRS template
// train at 0.9-1.4 Hz; channel_noise: impulses or a level step; other:
// broadband noise plus a 50 Hz line tone.
Source synth_artifact_source(SourceKind kind, int t_samples, double fs, RngStream rng);

// Smooth unit-norm scalp columns (one-hot for channel_noise), regenerated until
// cond(A) <= cond_limit; throws after `attempts` failures.
RowMat make_mixing_matrix(int channels, const std::vector<SourceKind>& labels, RngStream rng,
                          double cond_limit = 1e4, int attempts = 100);

struct MixingModel {
    RowMat a;                        // channels x m
    RowMat s;                        // m x t source activations
    std::vector<SourceKind> labels;  // per source, brain columns first
    double fs = 0.0;
    int brain_count() const;
    std::vector<int> nonbrain_indices() const;
};

struct SynthConfig {
    int channels = 8;
    double fs = 256.0;
    int samples = 1024;  // 4 s at 256 Hz
    double cond_limit = 1e4;
    int mix_attempts = 100;
    double ratio_lo = 0.5;  // artifact-to-brain RMS ratio range
    double ratio_hi = 3.0;
};

// Fresh head model: brain-source count drawn uniform{3..channels-2}, non-brain
// sources fill up to `channels` with at least one eye and one muscle.
MixingModel build_model(const SynthConfig& cfg, RngStream rng);

// X = A[:, selected] * S[selected, :], accumulated in `selected` order.
RowMat back_project(const RowMat& a, const RowMat& s, const std::vector<int>& selected);

struct BuiltPair {
    RowMat clean;        // brain-only back-projection
    RowMat artifact_bp;  // scaled chosen-artifact back-projection
    RowMat noisy;        // computed as clean + artifact_bp, nothing else
    SourceKind tag;      // category of the first chosen artifact
    std::vector<int> chosen;
};

// Picks n_artifacts distinct non-brain sources; each is scaled so its
// channel-level RMS is ratio ~ U(ratio_lo, ratio_hi) times the clean RMS.
BuiltPair build_pair(const MixingModel& model, int n_artifacts, RngStream rng,
                     double ratio_lo = 0.5, double ratio_hi = 3.0);

// Non-overlapping windows of t samples (tail remainder dropped), each
// z-scored per channel over time.
std::vector<RowMat> segment(const RowMat& recording, int t);

void zscore_rows_inplace(RowMat& x, double min_std = 1e-8);

struct Split {
    std::vector<int> train, val, test;
};

// Deterministic stratified split; largest-remainder allocation per tag group.
Split split_dataset(const std::vector<SourceKind>& tags, double f_train, double f_val,
                    RngStream rng);

struct Dataset {
    std::vector<RowMat> noisy;  // z-scored for storage
    std::vector<RowMat> clean;
    std::vector<SourceKind> tags;
    Split split;
};

// Full generation pipeline: per pair a fresh model, a random artifact count in
// [1, non-brain count], raw build_pair, storage z-scoring, stratified split.
Dataset make_dataset(const SynthConfig& cfg, int pairs, RngStream rng);

} // namespace arteeg
