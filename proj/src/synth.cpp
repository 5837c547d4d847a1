#include "arteeg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "arteeg/errors.hpp"
#include "arteeg/signal.hpp"

namespace arteeg {

namespace {
constexpr double kTau = 2.0 * std::numbers::pi;

double rms(const RowMat& m) { return std::sqrt(m.squaredNorm() / m.size()); }

void normalize_variance(Eigen::VectorXd& v) {
    const double mu = v.mean();
    const double sd = std::sqrt((v.array() - mu).square().mean());
    if (sd > 0.0) v /= sd;
}

void add_tone(Eigen::VectorXd& s, double f, double fs, double amp, double phase) {
    for (int t = 0; t < s.size(); ++t)
        s[t] += amp * std::sin(kTau * f * t / fs + phase);
}
} // namespace

const char* kind_name(SourceKind k) {
    switch (k) {
        case SourceKind::brain: return "brain";
        case SourceKind::eye: return "eye";
        case SourceKind::muscle: return "muscle";
        case SourceKind::heart: return "heart";
        case SourceKind::channel_noise: return "channel_noise";
        case SourceKind::other: return "other";
    }
    throw Error("kind_name: bad kind");
}

SourceKind kind_from_name(const std::string& name) {
    for (SourceKind k : {SourceKind::brain, SourceKind::eye, SourceKind::muscle, SourceKind::heart,
                         SourceKind::channel_noise, SourceKind::other})
        if (name == kind_name(k)) return k;
    throw UsageError("unknown source kind '" + name + "'");
}

Source synth_brain_source(int t_samples, double fs, RngStream rng) {
    if (fs < 2.0 * 45.0) throw UsageError("synth_brain_source: fs must be at least 90 Hz");
    // Shape white spectral coefficients by 1/sqrt(f) so power falls as 1/f,
    // then return to the time domain.
    const int nfft = next_pow2(t_samples);
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(nfft), {0.0, 0.0});
    const double df = fs / nfft;
    for (int k = 1; k < nfft / 2; ++k) {
        const double f = df * k;
        if (f < 1.0 || f > 45.0) continue;
        const double mag = 1.0 / std::sqrt(f);
        spec[static_cast<std::size_t>(k)] = {mag * rng.normal(), mag * rng.normal()};
        spec[static_cast<std::size_t>(nfft - k)] = std::conj(spec[static_cast<std::size_t>(k)]);
    }
    fft(spec, true);
    Eigen::VectorXd s(t_samples);
    for (int t = 0; t < t_samples; ++t) s[t] = spec[static_cast<std::size_t>(t)].real();
    const double sd = std::sqrt((s.array() - s.mean()).square().mean());
    if (sd > 0.0) s /= sd;
    add_tone(s, rng.uniform(8.0, 12.0), fs, rng.uniform(0.5, 1.2), rng.uniform(0.0, kTau));
    normalize_variance(s);
    return {std::move(s), SourceKind::brain, fs};
}

namespace {

Eigen::VectorXd gen_eye(int n, double fs, RngStream& rng) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    const double dur = n / fs;
    const int npulses = 1 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(
                                std::max(1.0, std::ceil(0.5 * dur)))));
    const double sigma = 0.10 * fs;  // ~100 ms flanks keeps energy under 3 Hz
    for (int b = 0; b < npulses; ++b) {
        const double tc = rng.uniform(0.08, 0.92) * n;
        const double amp = rng.uniform(0.7, 1.3) * (rng.uniform() < 0.8 ? 1.0 : -1.0);
        for (int t = 0; t < n; ++t) {
            const double u = (t - tc) / sigma;
            if (std::abs(u) < 6.0) s[t] += amp * -u * std::exp(-0.5 * u * u);
        }
    }
    return s;
}

Eigen::VectorXd gen_muscle(int n, double fs, RngStream& rng) {
    Eigen::VectorXd carrier = Eigen::VectorXd::Zero(n);
    for (int i = 0; i < 10; ++i)
        add_tone(carrier, rng.uniform(22.0, 43.0), fs, 1.0, rng.uniform(0.0, kTau));
    Eigen::VectorXd env = Eigen::VectorXd::Constant(n, 0.05);
    const int nbursts = 1 + static_cast<int>(rng.uniform_int(3));
    for (int b = 0; b < nbursts; ++b) {
        const int width = std::max(8, static_cast<int>(rng.uniform(0.2, 0.5) * fs));
        const int start = static_cast<int>(rng.uniform(0.0, std::max(1.0, n - width - 1.0)));
        for (int t = start; t < std::min(n, start + width); ++t) {
            const double u = (t - start - width / 2.0) / (width / 4.0);
            env[t] = std::max(env[t], std::exp(-0.5 * u * u));
        }
    }
    return carrier.cwiseProduct(env);
}

Eigen::VectorXd gen_heart(int n, double fs, RngStream& rng) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    const double rate = rng.uniform(0.9, 1.4);  // beats per second
    const double period = fs / rate;
    const double sharp = 0.012 * fs;  // ~12 ms R peak
    // A window shorter than one interbeat interval must still catch a beat:
    // a silent stretch would make a useless zero exemplar under this label.
    double tc = rng.uniform(0.0, std::min(period, static_cast<double>(n)));
    while (tc < n) {
        for (int t = 0; t < n; ++t) {
            const double u = (t - tc) / sharp;
            if (std::abs(u) < 8.0)
                s[t] += std::exp(-0.5 * u * u) - 0.35 * std::exp(-0.5 * (u - 2.5) * (u - 2.5));
        }
        tc += period * rng.uniform(0.99, 1.01);
    }
    return s;
}

Eigen::VectorXd gen_channel_noise(int n, RngStream& rng) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    if (rng.uniform() < 0.5) {
        const int nimp = 2 + static_cast<int>(rng.uniform_int(4));
        for (int i = 0; i < nimp; ++i) {
            const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)));
            s[t] += (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(2.0, 5.0);
        }
    } else {
        const int t0 = static_cast<int>(n * rng.uniform(0.2, 0.8));
        const double level = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
        for (int t = t0; t < n; ++t) s[t] = level;
    }
    return s;
}

Eigen::VectorXd gen_other(int n, double fs, RngStream& rng) {
    Eigen::VectorXd s(n);
    for (int t = 0; t < n; ++t) s[t] = rng.normal();
    add_tone(s, 50.0, fs, rng.uniform(0.5, 1.5), rng.uniform(0.0, kTau));
    return s;
}

} // namespace

Source synth_artifact_source(SourceKind kind, int t_samples, double fs, RngStream rng) {
    Eigen::VectorXd s;
    switch (kind) {
        case SourceKind::eye: s = gen_eye(t_samples, fs, rng); break;
        case SourceKind::muscle: s = gen_muscle(t_samples, fs, rng); break;
        case SourceKind::heart: s = gen_heart(t_samples, fs, rng); break;
        case SourceKind::channel_noise: s = gen_channel_noise(t_samples, rng); break;
        case SourceKind::other: s = gen_other(t_samples, fs, rng); break;
        case SourceKind::brain: throw UsageError("synth_artifact_source: brain is not an artifact kind");
    }
    normalize_variance(s);
    return {std::move(s), kind, fs};
}

RowMat make_mixing_matrix(int channels, const std::vector<SourceKind>& labels, RngStream rng,
                          double cond_limit, int attempts) {
    const int m = static_cast<int>(labels.size());
    if (m == 0 || m > channels)
        throw UsageError("make_mixing_matrix: need 1 <= sources <= channels");
    for (int attempt = 0; attempt < attempts; ++attempt) {
        RowMat a(channels, m);
        for (int j = 0; j < m; ++j) {
            if (labels[static_cast<std::size_t>(j)] == SourceKind::channel_noise) {
                a.col(j).setZero();
                a(static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(channels))), j) = 1.0;
            } else {
                // Random smooth electrode-to-electrode profile: the full
                // cosine basis with 1/(1+mode) weight decay keeps columns
                // smooth while spanning all channels, so any number of
                // sources up to `channels` stays jointly full rank.
                a.col(j).setZero();
                for (int mm = 0; mm < channels; ++mm) {
                    const double cf = rng.normal() / (1.0 + mm);
                    for (int ch = 0; ch < channels; ++ch)
                        a(ch, j) +=
                            cf * std::cos(std::numbers::pi * mm * (ch + 0.5) / channels);
                }
                const double nrm = a.col(j).norm();
                if (nrm < 1e-9)
                    a.col(j).setConstant(1.0 / std::sqrt(static_cast<double>(channels)));
                else
                    a.col(j) /= nrm;
            }
        }
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
        const auto& sv = svd.singularValues();
        const double smin = sv[sv.size() - 1];
        if (smin > 0.0 && sv[0] / smin <= cond_limit) return a;
    }
    throw Error("make_mixing_matrix: no acceptably conditioned matrix in " +
                std::to_string(attempts) + " attempts");
}

int MixingModel::brain_count() const {
    int n = 0;
    for (auto l : labels)
        if (l == SourceKind::brain) ++n;
    return n;
}

std::vector<int> MixingModel::nonbrain_indices() const {
    std::vector<int> idx;
    for (int j = 0; j < static_cast<int>(labels.size()); ++j)
        if (labels[static_cast<std::size_t>(j)] != SourceKind::brain) idx.push_back(j);
    return idx;
}

MixingModel build_model(const SynthConfig& cfg, RngStream rng) {
    const int c = cfg.channels;
    if (c < 5) throw UsageError("build_model: need at least 5 channels for the 3..c-2 brain range");
    const int nbrain = 3 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(c - 4)));
    const int nart = c - nbrain;  // >= 2, room for the mandatory eye and muscle
    std::vector<SourceKind> labels(static_cast<std::size_t>(nbrain), SourceKind::brain);
    labels.push_back(SourceKind::eye);
    labels.push_back(SourceKind::muscle);
    const SourceKind pool[5] = {SourceKind::eye, SourceKind::muscle, SourceKind::heart,
                                SourceKind::channel_noise, SourceKind::other};
    for (int j = 2; j < nart; ++j) labels.push_back(pool[rng.uniform_int(5)]);

    MixingModel m;
    m.labels = labels;
    m.fs = cfg.fs;
    m.a = make_mixing_matrix(c, labels, rng.sub("mix"), cfg.cond_limit, cfg.mix_attempts);
    m.s = RowMat(static_cast<int>(labels.size()), cfg.samples);
    for (int j = 0; j < static_cast<int>(labels.size()); ++j) {
        const SourceKind k = labels[static_cast<std::size_t>(j)];
        const Source src = k == SourceKind::brain
                               ? synth_brain_source(cfg.samples, cfg.fs, rng.sub("src", j))
                               : synth_artifact_source(k, cfg.samples, cfg.fs, rng.sub("src", j));
        m.s.row(j) = src.samples.transpose();
    }
    return m;
}

RowMat back_project(const RowMat& a, const RowMat& s, const std::vector<int>& selected) {
    if (selected.empty()) throw UsageError("back_project: empty source selection");
    RowMat x = RowMat::Zero(a.rows(), s.cols());
    for (int j : selected) {
        if (j < 0 || j >= a.cols()) throw UsageError("back_project: source index out of range");
        x.noalias() += a.col(j) * s.row(j);
    }
    return x;
}

BuiltPair build_pair(const MixingModel& model, int n_artifacts, RngStream rng, double ratio_lo,
                     double ratio_hi) {
    std::vector<int> brain;
    for (int j = 0; j < static_cast<int>(model.labels.size()); ++j)
        if (model.labels[static_cast<std::size_t>(j)] == SourceKind::brain) brain.push_back(j);
    if (brain.empty()) throw UsageError("build_pair: model has no brain sources");
    std::vector<int> nonbrain = model.nonbrain_indices();
    if (n_artifacts < 1 || n_artifacts > static_cast<int>(nonbrain.size()))
        throw UsageError("build_pair: n_artifacts must be in [1, " +
                         std::to_string(nonbrain.size()) + "]");

    BuiltPair p;
    p.clean = back_project(model.a, model.s, brain);
    const double clean_rms = rms(p.clean);
    if (clean_rms <= 0.0) throw Error("build_pair: degenerate clean segment");

    rng.shuffle(nonbrain);
    p.chosen.assign(nonbrain.begin(), nonbrain.begin() + n_artifacts);
    p.tag = model.labels[static_cast<std::size_t>(p.chosen.front())];

    // Scale each chosen source so its channel-level RMS sits at ratio x clean
    // RMS, accumulating in chosen order; noisy is clean + this sum and nothing
    // else, so the additive identity holds exactly.
    p.artifact_bp = RowMat::Zero(p.clean.rows(), p.clean.cols());
    for (int j : p.chosen) {
        RowMat bp = model.a.col(j) * model.s.row(j);
        const double bp_rms = rms(bp);
        if (bp_rms <= 0.0) throw Error("build_pair: degenerate artifact source");
        const double ratio = rng.uniform(ratio_lo, ratio_hi);
        p.artifact_bp.noalias() += (ratio * clean_rms / bp_rms) * bp;
    }
    p.noisy = p.clean + p.artifact_bp;
    return p;
}

std::vector<RowMat> segment(const RowMat& recording, int t) {
    const int total = static_cast<int>(recording.cols());
    if (t <= 0 || total < t)
        throw UsageError("segment: recording shorter than one window of " + std::to_string(t));
    std::vector<RowMat> out;
    for (int s = 0; s + t <= total; s += t) {
        RowMat seg = recording.middleCols(s, t);
        zscore_rows_inplace(seg);
        out.push_back(std::move(seg));
    }
    return out;
}

void zscore_rows_inplace(RowMat& x, double min_std) {
    for (int r = 0; r < x.rows(); ++r) {
        const double mu = x.row(r).mean();
        const double sd = std::sqrt((x.row(r).array() - mu).square().mean());
        if (!(sd >= min_std))
            throw DegenerateChannel("zscore_rows: channel " + std::to_string(r) +
                                    " has degenerate std");
        x.row(r) = (x.row(r).array() - mu) / sd;
    }
}

Split split_dataset(const std::vector<SourceKind>& tags, double f_train, double f_val,
                    RngStream rng) {
    if (f_train <= 0.0 || f_val < 0.0 || f_train + f_val >= 1.0)
        throw UsageError("split_dataset: fractions must satisfy 0 < train, 0 <= val, train+val < 1");
    if (tags.size() < 10) throw UsageError("split_dataset: need at least 10 pairs");
    std::vector<std::vector<int>> groups;
    std::vector<SourceKind> kinds;
    for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
        auto it = std::find(kinds.begin(), kinds.end(), tags[static_cast<std::size_t>(i)]);
        if (it == kinds.end()) {
            kinds.push_back(tags[static_cast<std::size_t>(i)]);
            groups.emplace_back();
            it = kinds.end() - 1;
        }
        groups[static_cast<std::size_t>(it - kinds.begin())].push_back(i);
    }
    Split out;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        auto& idx = groups[g];
        RngStream grs = rng.sub(kind_name(kinds[g]));
        grs.shuffle(idx);
        const int n = static_cast<int>(idx.size());
        // Largest-remainder apportionment across the three splits.
        const double want[3] = {f_train * n, f_val * n, (1.0 - f_train - f_val) * n};
        int take[3];
        double frac[3];
        int used = 0;
        for (int s = 0; s < 3; ++s) {
            take[s] = static_cast<int>(std::floor(want[s]));
            frac[s] = want[s] - take[s];
            used += take[s];
        }
        while (used < n) {
            int best = 0;
            for (int s = 1; s < 3; ++s)
                if (frac[s] > frac[best]) best = s;
            ++take[best];
            frac[best] = -1.0;
            ++used;
        }
        int p = 0;
        for (int i = 0; i < take[0]; ++i) out.train.push_back(idx[p++]);
        for (int i = 0; i < take[1]; ++i) out.val.push_back(idx[p++]);
        for (int i = 0; i < take[2]; ++i) out.test.push_back(idx[p++]);
    }
    std::sort(out.train.begin(), out.train.end());
    std::sort(out.val.begin(), out.val.end());
    std::sort(out.test.begin(), out.test.end());
    return out;
}

Dataset make_dataset(const SynthConfig& cfg, int pairs, RngStream rng) {
    if (pairs < 10) throw UsageError("make_dataset: need at least 10 pairs");
    Dataset d;
    d.noisy.reserve(pairs);
    d.clean.reserve(pairs);
    d.tags.reserve(pairs);
    for (int i = 0; i < pairs; ++i) {
        RngStream pr = rng.sub("pair", i);
        const MixingModel model = build_model(cfg, pr.sub("model"));
        const int nb = static_cast<int>(model.nonbrain_indices().size());
        const int n_art = 1 + static_cast<int>(pr.sub("nart").uniform_int(
                                  static_cast<std::uint64_t>(nb)));
        BuiltPair p = build_pair(model, n_art, pr.sub("build"), cfg.ratio_lo, cfg.ratio_hi);
        zscore_rows_inplace(p.noisy);
        zscore_rows_inplace(p.clean);
        d.noisy.push_back(std::move(p.noisy));
        d.clean.push_back(std::move(p.clean));
        d.tags.push_back(p.tag);
    }
    d.split = split_dataset(d.tags, 0.8, 0.1, rng.sub("split"));
    return d;
}

} // namespace arteeg
