// Acceptance gates: nine end-to-end checks, one verdict line each. The
// command-line binary arrives as argv[1]; training state from the efficacy
// stage is reused by the downstream signal-quality checks.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "arteeg/art.hpp"
#include "arteeg/bci.hpp"
#include "arteeg/checkpoint.hpp"
#include "arteeg/eval.hpp"
#include "arteeg/ops.hpp"
#include "arteeg/synth.hpp"
#include "arteeg/train.hpp"
#include "arteeg/unet.hpp"

namespace fs = std::filesystem;
using namespace arteeg;
using Clock = std::chrono::steady_clock;

namespace {

std::string g_bin;
Dataset g_data;
std::unique_ptr<Denoiser> g_art;
std::unique_ptr<Denoiser> g_unet;

int worker_threads() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(std::min(hw, 8u));
}

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct RunResult {
    int code = -1;
    double secs = 0.0;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string log = "acceptance_scratch/run.log";
    const auto t0 = Clock::now();
    const int raw = std::system((g_bin + " " + args + " > " + log + " 2>&1").c_str());
    RunResult r;
    r.secs = seconds_since(t0);
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream is(log);
    std::stringstream ss;
    ss << is.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

bool same_bytes(const std::string& a, const std::string& b) {
    const std::string ca = slurp(a), cb = slurp(b);
    return !ca.empty() && ca == cb;
}

RowMat randn_mat(int r, int c, RngStream rng) {
    RowMat m(r, c);
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
    return m;
}

Tensor randn_tensor(int r, int c, RngStream rng) {
    return Tensor::from_matrix(randn_mat(r, c, std::move(rng)));
}

// Slice a recording into training-length windows, push each through the
// model, and reassemble. The contaminated baseline gets the identical
// z-scoring treatment minus the model.
RowMat denoise_sliced(Denoiser& model, const RowMat& x, int slice) {
    NoGradGuard ng;
    std::vector<RowMat> segs = segment(x, slice);
    RowMat out(x.rows(), static_cast<long>(segs.size()) * slice);
    for (std::size_t k = 0; k < segs.size(); ++k)
        out.middleCols(static_cast<long>(k) * slice, slice) =
            model.denoise(Tensor::from_matrix(segs[k])).to_matrix();
    return out;
}

RowMat zscore_sliced(const RowMat& x, int slice) {
    std::vector<RowMat> segs = segment(x, slice);
    RowMat out(x.rows(), static_cast<long>(segs.size()) * slice);
    for (std::size_t k = 0; k < segs.size(); ++k)
        out.middleCols(static_cast<long>(k) * slice, slice) = segs[k];
    return out;
}

double dataset_mse(const std::vector<RowMat>& z, const std::vector<RowMat>& ref,
                   const std::vector<int>& rows) {
    double acc = 0.0;
    for (int i : rows) {
        const std::vector<double> per = channel_mse(z[static_cast<std::size_t>(i)],
                                                    ref[static_cast<std::size_t>(i)]);
        double m = 0.0;
        for (double v : per) m += v;
        acc += m / static_cast<double>(per.size());
    }
    return acc / static_cast<double>(rows.size());
}

// Unit-norm scalp column for one synthetic source.
Eigen::VectorXd source_topo(int channels, RngStream rng) {
    return make_mixing_matrix(channels, {SourceKind::brain}, std::move(rng)).col(0);
}

// Cortical background: a few spectrally shaped sources spread over the scalp.
RowMat brain_bed(int channels, int n_src, int t, double fs, RngStream rng) {
    std::vector<SourceKind> labels(static_cast<std::size_t>(n_src), SourceKind::brain);
    RowMat a = make_mixing_matrix(channels, labels, rng.sub("mix"));
    RowMat s(n_src, t);
    for (int j = 0; j < n_src; ++j)
        s.row(j) = synth_brain_source(t, fs, rng.sub("src", j)).samples.transpose();
    return a * s;
}

// Adds `kind` activity scaled to `ratio` times the recording's RMS.
void contaminate(RowMat& x, SourceKind kind, double ratio, double fs, RngStream rng) {
    const int t = static_cast<int>(x.cols());
    const Eigen::VectorXd topo = source_topo(static_cast<int>(x.rows()), rng.sub("topo"));
    const Source src = synth_artifact_source(kind, t, fs, rng.sub("sig"));
    RowMat bp = topo * src.samples.transpose();
    const double rms_x = std::sqrt(x.array().square().mean());
    const double rms_bp = std::sqrt(bp.array().square().mean());
    x += (ratio * rms_x / rms_bp) * bp;
}

// ------------------------------------------------------------ criteria -----

bool c1_gradient_integrity(std::string& detail) {
    RunResult r = run("gradcheck");
    std::ostringstream os;
    os << "exit " << r.code << ", " << r.secs << " s (budget 120)";
    detail = os.str();
    if (r.code != 0) std::fputs(r.output.c_str(), stderr);
    return r.code == 0 && r.secs < 120.0;
}

bool c2_architecture_invariants(std::string& detail) {
    NoGradGuard ng;
    bool ok = true;
    std::ostringstream os;

    ArtConfig cfg;
    cfg.channels = 4;
    cfg.tau = 8;
    cfg.heads = 2;
    cfg.blocks = 2;
    cfg.ff = 16;
    Art art(cfg, RngStream(11, "init"));

    const int t_probe = 96;
    Tensor x = randn_tensor(cfg.channels, t_probe, RngStream(12));
    AttnScores sc;
    const long before = art.decoder_passes();
    Tensor y = art.forward(x, nullptr, false, &sc);
    const bool one_pass = art.decoder_passes() == before + 1;
    ok = ok && one_pass;

    double worst_row = 0.0;
    for (const auto* site : {&sc.enc_self, &sc.dec_self, &sc.dec_cross})
        for (const auto& layer : *site)
            for (const Eigen::MatrixXd& m : layer)
                for (long r = 0; r < m.rows(); ++r)
                    worst_row = std::max(worst_row, std::abs(m.row(r).sum() - 1.0));
    ok = ok && worst_row < 1e-9;

    RowMat ym = y.to_matrix();
    double worst_mean = 0.0, worst_std = 0.0;
    for (long ch = 0; ch < ym.rows(); ++ch) {
        const double mu = ym.row(ch).mean();
        const double sd = std::sqrt((ym.row(ch).array() - mu).square().mean());
        worst_mean = std::max(worst_mean, std::abs(mu));
        worst_std = std::max(worst_std, std::abs(sd - 1.0));
    }
    ok = ok && worst_mean < 1e-6 && worst_std < 1e-6;

    bool shapes = true;
    for (int t : {64, 1024}) {
        Tensor probe = randn_tensor(4, t, RngStream(13, "shape"));
        for (UNetVariant v : {UNetVariant::base, UNetVariant::plus, UNetVariant::attn}) {
            UNetConfig ucfg;
            ucfg.channels = 4;
            ucfg.width = 8;
            ucfg.variant = v;
            UNet net(ucfg, RngStream(14, "init"));
            Tensor out = net.forward(probe, true);
            shapes = shapes && out.shape() == Shape(4, t);
        }
        ArtConfig a2 = cfg;
        a2.blocks = 1;
        Art art2(a2, RngStream(15, "init"));
        Tensor out = art2.forward(probe);
        shapes = shapes && out.shape() == Shape(4, t);
    }
    ok = ok && shapes;

    os << "row-sum err " << worst_row << ", |mean| " << worst_mean << ", |std-1| " << worst_std
       << ", shapes " << (shapes ? "kept" : "broken") << ", decoder passes "
       << (one_pass ? "1" : "not 1");
    detail = os.str();
    return ok;
}

bool c3_data_pipeline(std::string& detail) {
    bool ok = true;
    std::ostringstream os;

    SynthConfig cfg;  // 8 channels, 256 Hz, 4 s
    MixingModel model = build_model(cfg, RngStream(21));
    BuiltPair pair = build_pair(model, 2, RngStream(22));
    const bool additive = pair.noisy == RowMat(pair.clean + pair.artifact_bp);
    ok = ok && additive;

    RowMat rec = randn_mat(8, 4500, RngStream(23));
    std::vector<RowMat> segs = segment(rec, 1024);
    bool seg_ok = segs.size() == 4;
    for (std::size_t k = 0; seg_ok && k < segs.size(); ++k) {
        RowMat expect = rec.middleCols(static_cast<long>(k) * 1024, 1024);
        zscore_rows_inplace(expect);
        seg_ok = seg_ok && expect == segs[k];
        for (long ch = 0; ch < expect.rows(); ++ch) {
            const double mu = segs[k].row(ch).mean();
            const double sd = std::sqrt((segs[k].row(ch).array() - mu).square().mean());
            seg_ok = seg_ok && std::abs(mu) < 1e-9 && std::abs(sd - 1.0) < 1e-9;
        }
    }
    ok = ok && seg_ok;

    std::vector<SourceKind> tags;
    for (int i = 0; i < 140; ++i) tags.push_back(SourceKind::eye);
    for (int i = 0; i < 33; ++i) tags.push_back(SourceKind::muscle);
    for (int i = 0; i < 27; ++i) tags.push_back(SourceKind::heart);
    Split sp = split_dataset(tags, 0.8, 0.1, RngStream(24));
    bool split_ok =
        sp.train.size() + sp.val.size() + sp.test.size() == tags.size();
    for (SourceKind kind : {SourceKind::eye, SourceKind::muscle, SourceKind::heart}) {
        double n = 0, in_train = 0, in_val = 0, in_test = 0;
        for (std::size_t i = 0; i < tags.size(); ++i)
            if (tags[i] == kind) ++n;
        for (int i : sp.train)
            if (tags[static_cast<std::size_t>(i)] == kind) ++in_train;
        for (int i : sp.val)
            if (tags[static_cast<std::size_t>(i)] == kind) ++in_val;
        for (int i : sp.test)
            if (tags[static_cast<std::size_t>(i)] == kind) ++in_test;
        split_ok = split_ok && std::abs(in_train - 0.8 * n) <= 1.0 &&
                   std::abs(in_val - 0.1 * n) <= 1.0 && std::abs(in_test - 0.1 * n) <= 1.0;
    }
    ok = ok && split_ok;

    os << "pair additivity " << (additive ? "bitwise" : "BROKEN") << ", 4 s segments "
       << (seg_ok ? "ok" : "BROKEN") << ", stratified split "
       << (split_ok ? "within +-1" : "BROKEN");
    detail = os.str();
    return ok;
}

bool c4_denoising_efficacy(std::string& detail) {
    const auto t0 = Clock::now();
    const int jobs = worker_threads();
    std::ostringstream os;

    SynthConfig cfg;
    cfg.channels = 8;
    cfg.fs = 256.0;
    cfg.samples = 128;  // half-second pairs keep 2000 x 30 epochs on budget
    g_data = make_dataset(cfg, 2000, RngStream(42, "data"));
    std::printf("    dataset: 2000 pairs, %zu train / %zu val / %zu test (%.1f s)\n",
                g_data.split.train.size(), g_data.split.val.size(), g_data.split.test.size(),
                seconds_since(t0));

    const double ident = dataset_mse(g_data.noisy, g_data.clean, g_data.split.test);

    auto progress = [](const char* name) {
        return [name](int e, double tr, double va, double te) {
            if (e == 1 || e % 5 == 0)
                std::printf("    %s epoch %2d  train %.4f  val %.4f  test %.4f\n", name, e, tr,
                            va, te);
            std::fflush(stdout);
        };
    };

    UNetConfig ucfg;
    ucfg.channels = 8;
    ucfg.width = 16;
    TrainConfig utc;
    utc.epochs = 30;
    utc.lr = 0.02;
    utc.batch_size = 128;
    utc.optimizer = OptimizerKind::sgd;
    utc.momentum = 0.9;
    utc.jobs = jobs;
    utc.on_epoch = progress("unet");
    g_unet = make_unet_denoiser(ucfg, RngStream(7, "init"));
    TrainResult ur = train(*g_unet, g_data, utc, RngStream(7, "shuffle"));

    ArtConfig acfg;
    acfg.channels = 8;
    acfg.tau = 32;
    acfg.heads = 8;
    acfg.blocks = 1;
    acfg.ff = 64;
    acfg.target_mode = TargetMode::noise;
    TrainConfig atc;
    atc.epochs = 30;
    atc.lr = 1e-3;
    atc.batch_size = 32;
    atc.optimizer = OptimizerKind::adam;
    atc.jobs = jobs;
    atc.on_epoch = progress("art ");
    g_art = make_art_denoiser(acfg, RngStream(9, "init"));
    TrainResult ar = train(*g_art, g_data, atc, RngStream(9, "shuffle"));

    const double art_test = g_art->batch_pass(g_data, g_data.split.test, false, false, jobs);
    const double unet_test = g_unet->batch_pass(g_data, g_data.split.test, false, false, jobs);
    const double elapsed = seconds_since(t0);

    const bool beats_identity = art_test < 0.5 * ident;
    const bool art_learned = ar.curve.train.back() < 0.25 * ar.curve.train.front();
    const bool unet_learned = ur.curve.train.back() < 0.25 * ur.curve.train.front();
    const bool on_time = elapsed < 1800.0;
    if (art_test > unet_test)
        std::printf("    warning: ART test MSE %.4f above U-Net %.4f (direction check is "
                    "advisory at this scale)\n",
                    art_test, unet_test);

    os << "identity " << ident << ", art " << art_test << ", unet " << unet_test
       << ", art train " << ar.curve.train.front() << "->" << ar.curve.train.back()
       << ", unet train " << ur.curve.train.front() << "->" << ur.curve.train.back() << ", "
       << elapsed << " s (budget 1800)";
    detail = os.str();
    return beats_identity && art_learned && unet_learned && on_time;
}

bool c5_ssvep_preservation(std::string& detail) {
    if (!g_art) {
        detail = "trained model unavailable";
        return false;
    }
    const double fs = 256.0;
    const int t = 1024;
    const int c = 8;
    double sum_gain = 0.0;
    int trials = 0;
    for (int trial = 0; trial < 20; ++trial) {
        RngStream rng(7000 + trial);
        RowMat clean = 0.7 * brain_bed(c, 5, t, fs, rng.sub("bed"));
        const Eigen::VectorXd topo = source_topo(c, rng.sub("ssvep_topo"));
        Eigen::VectorXd drive(t);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (int j = 0; j < t; ++j) {
            const double w = 2.0 * std::numbers::pi * 10.0 * j / fs;
            drive[j] = std::sin(w + phase) + 0.5 * std::sin(2.0 * w + phase) +
                       0.33 * std::sin(3.0 * w + phase);
        }
        clean += topo * drive.transpose();

        RowMat cont = clean;
        contaminate(cont, SourceKind::muscle, 2.0, fs, rng.sub("m1"));
        contaminate(cont, SourceKind::muscle, 1.5, fs, rng.sub("m2"));

        const RowMat den = denoise_sliced(*g_art, cont, 128);
        const RowMat base = zscore_sliced(cont, 128);
        double snr_den = 0.0, snr_base = 0.0;
        for (int ch = 0; ch < c; ++ch) {
            snr_den += ssvep_snr(den.row(ch).transpose(), 10.0, fs);
            snr_base += ssvep_snr(base.row(ch).transpose(), 10.0, fs);
        }
        sum_gain += (snr_den - snr_base) / c;
        ++trials;
    }
    const double mean_gain = sum_gain / trials;
    std::ostringstream os;
    os << "mean SNR gain " << mean_gain << " dB over " << trials << " trials (need >= 3)";
    detail = os.str();
    return mean_gain >= 3.0;
}

bool c6_component_suppression(std::string& detail) {
    if (!g_art) {
        detail = "trained model unavailable";
        return false;
    }
    const double fs = 256.0;
    const int t = 1024;
    int wins = 0;
    std::vector<double> cont_counts, den_counts;
    for (int trial = 0; trial < 20; ++trial) {
        RngStream rng(8000 + trial);
        RowMat cont = brain_bed(8, 4, t, fs, rng.sub("bed"));
        contaminate(cont, SourceKind::eye, 2.0, fs, rng.sub("eye"));
        contaminate(cont, SourceKind::muscle, 2.0, fs, rng.sub("mus"));

        const RowMat base = zscore_sliced(cont, 128);
        const RowMat den = denoise_sliced(*g_art, cont, 128);
        const int nc = count_nonbrain(base, fs, RngStream(8100 + trial));
        const int nd = count_nonbrain(den, fs, RngStream(8200 + trial));
        cont_counts.push_back(nc);
        den_counts.push_back(nd);
        if (nc > nd) ++wins;
    }
    const double area_cont = shoelace_area(spider_points(cont_counts));
    const double area_den = shoelace_area(spider_points(den_counts));
    std::ostringstream os;
    os << wins << "/20 recordings improved (need >= 16), spider area " << area_cont << " -> "
       << area_den;
    detail = os.str();
    return wins >= 16 && area_den < area_cont;
}

bool c7_bci_improvement(std::string& detail) {
    if (!g_art) {
        detail = "trained model unavailable";
        return false;
    }
    const double fs = 256.0;
    const int t = 256;
    const int c = 8;
    const double rhythm_amp = 1.2;

    auto make_trials = [&](bool left, std::uint64_t seed) {
        std::vector<RowMat> trials;
        RngStream rng(seed);
        for (int k = 0; k < 20; ++k) {
            RngStream tr = rng.sub("trial", k);
            RowMat x = randn_mat(c, t, tr.sub("noise"));
            const double phase = tr.uniform(0.0, 2.0 * std::numbers::pi);
            Eigen::VectorXd rhythm(t);
            for (int j = 0; j < t; ++j)
                rhythm[j] = std::sin(2.0 * std::numbers::pi * 10.0 * j / fs + phase);
            for (int ch = 0; ch < 4; ++ch) {
                const int target = left ? ch : 4 + ch;
                x.row(target) += (rhythm_amp * (0.8 + 0.1 * ch)) * rhythm.transpose();
            }
            trials.push_back(x);
        }
        return trials;
    };
    auto contaminate_all = [&](std::vector<RowMat> trials, std::uint64_t seed) {
        RngStream rng(seed);
        for (std::size_t k = 0; k < trials.size(); ++k) {
            contaminate(trials[k], SourceKind::eye, 2.0, fs, rng.sub("eye", k));
            contaminate(trials[k], SourceKind::muscle, 1.5, fs, rng.sub("mus", k));
        }
        return trials;
    };

    const std::vector<RowMat> clean_a = make_trials(true, 9100);
    const std::vector<RowMat> clean_b = make_trials(false, 9200);
    const std::vector<RowMat> cont_a = contaminate_all(clean_a, 9300);
    const std::vector<RowMat> cont_b = contaminate_all(clean_b, 9400);

    TrialDenoiser restore = [&](const RowMat& x) { return denoise_sliced(*g_art, x, 128); };

    const double acc_clean = bci_holdout(clean_a, clean_b, nullptr, RngStream(91), 10).mean;
    const double acc_cont = bci_holdout(cont_a, cont_b, nullptr, RngStream(91), 10).mean;
    const double acc_den = bci_holdout(cont_a, cont_b, restore, RngStream(91), 10).mean;

    std::ostringstream os;
    os << "clean " << acc_clean << " (need >= 0.85), contaminated " << acc_cont << ", denoised "
       << acc_den << " (need >= contaminated + 0.05)";
    detail = os.str();
    return acc_clean >= 0.85 && acc_den >= acc_cont + 0.05;
}

bool c8_metric_oracles(std::string& detail) {
    bool ok = true;
    std::ostringstream os;

    const double square = shoelace_area({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    const double triangle = shoelace_area({{0, 0}, {4, 0}, {0, 3}});
    ok = ok && square == 1.0 && triangle == 6.0;

    const double fs = 256.0;
    Eigen::VectorXd tone(2048);
    for (int j = 0; j < 2048; ++j)
        tone[j] = std::sin(2.0 * std::numbers::pi * 10.0 * j / fs);
    const double tone_snr = ssvep_snr(tone, 10.0, fs);
    ok = ok && tone_snr > 20.0;

    int ica_good = 0;
    for (int runi = 0; runi < 100; ++runi) {
        RngStream rng(40000 + runi);
        RowMat s(2, 3000);
        for (int j = 0; j < 3000; ++j) {
            const double g = rng.normal();
            s(0, j) = g * g * g;
            s(1, j) = rng.uniform(-1.7320508075688772, 1.7320508075688772);
        }
        Eigen::Matrix2d a;
        a << 0.9, 0.35, 0.25, 0.85;
        ComponentSet set = fastica(RowMat(a * s), 2, RngStream(41000 + runi));
        auto corr = [](const Eigen::VectorXd& u, const Eigen::VectorXd& v) {
            const Eigen::VectorXd uc = u.array() - u.mean();
            const Eigen::VectorXd vc = v.array() - v.mean();
            return std::abs(uc.dot(vc)) / std::sqrt(uc.squaredNorm() * vc.squaredNorm());
        };
        const double straight =
            std::min(corr(s.row(0).transpose(), set.activations.row(0).transpose()),
                     corr(s.row(1).transpose(), set.activations.row(1).transpose()));
        const double swapped =
            std::min(corr(s.row(0).transpose(), set.activations.row(1).transpose()),
                     corr(s.row(1).transpose(), set.activations.row(0).transpose()));
        if (set.converged && std::max(straight, swapped) > 0.95) ++ica_good;
    }
    ok = ok && ica_good >= 95;

    // shuffling the labels of separable features must collapse LDA to chance
    double acc_sum = 0.0;
    const int reps = 20;
    for (int rep = 0; rep < reps; ++rep) {
        RngStream rng(50000 + rep);
        std::vector<Eigen::VectorXd> pool;
        for (int i = 0; i < 120; ++i) {
            Eigen::VectorXd f(4);
            const double mu = i < 60 ? 1.0 : -1.0;  // separable before the shuffle
            for (int d = 0; d < 4; ++d) f[d] = mu + rng.normal();
            pool.push_back(f);
        }
        std::vector<int> labels(120);
        for (int i = 0; i < 120; ++i) labels[static_cast<std::size_t>(i)] = i < 60 ? 0 : 1;
        rng.shuffle(labels);
        std::vector<Eigen::VectorXd> fa, fb;
        for (int i = 0; i < 120; ++i)
            (labels[static_cast<std::size_t>(i)] == 0 ? fa : fb).push_back(pool[i]);
        const std::size_t ka = fa.size() * 4 / 5, kb = fb.size() * 4 / 5;
        LdaModel m = lda_fit({fa.begin(), fa.begin() + ka}, {fb.begin(), fb.begin() + kb});
        int correct = 0, total = 0;
        for (std::size_t i = ka; i < fa.size(); ++i, ++total) correct += lda_predict(m, fa[i]);
        for (std::size_t i = kb; i < fb.size(); ++i, ++total) correct += !lda_predict(m, fb[i]);
        acc_sum += static_cast<double>(correct) / total;
    }
    const double chance = acc_sum / reps;
    ok = ok && chance > 0.35 && chance < 0.65;

    os << "areas " << square << "/" << triangle << ", tone SNR " << tone_snr << " dB, ICA "
       << ica_good << "/100, shuffled LDA " << chance;
    detail = os.str();
    return ok;
}

bool c9_reproducibility(std::string& detail) {
    const std::string s = "acceptance_scratch/";
    bool ok = true;
    std::ostringstream os;
    fs::create_directories(s + "saved");
    auto keep = [&](const std::string& rel) {
        fs::copy_file(s + rel, s + "saved/" + fs::path(rel).filename().string(),
                      fs::copy_options::overwrite_existing);
    };
    auto unchanged = [&](const std::string& rel) {
        const bool same =
            same_bytes(s + rel, s + "saved/" + fs::path(rel).filename().string());
        if (!same) os << " [changed: " << rel << "]";
        return same;
    };

    ok = ok && run("synth --channels 6 --fs 256 --seconds 0.5 --pairs 12 --seed 31 --out " + s +
                   "r1").code == 0;
    keep("r1/noisy.eegt");
    keep("r1/clean.eegt");
    keep("r1/tags.csv");
    ok = ok && run("--manifest " + s + "r1/manifest.txt").code == 0;
    ok = ok && unchanged("r1/noisy.eegt") && unchanged("r1/clean.eegt") &&
         unchanged("r1/tags.csv");

    ok = ok && run("train --data " + s + "r1 --out " + s +
                   "r2 --model icunet --width 4 --epochs 2 --batch 4 --quiet --seed 32")
                       .code == 0;
    keep("r2/model.artc");
    keep("r2/losscurve.csv");
    ok = ok && run("--manifest " + s + "r2/manifest.txt").code == 0;
    ok = ok && unchanged("r2/model.artc") && unchanged("r2/losscurve.csv");

    ok = ok && run("train --data " + s + "r1 --out " + s +
                   "r3 --model art --target noise --tau 16 --heads 4 --ff 32 --blocks 1 "
                   "--epochs 1 --batch 4 --quiet --seed 33")
                       .code == 0;

    ok = ok && run("denoise --in " + s + "r1/noisy.eegt --model " + s + "r2/model.artc --out " +
                   s + "den.eegt").code == 0;
    keep("den.eegt");
    ok = ok && run("--manifest " + s + "den.eegt.manifest").code == 0;
    ok = ok && unchanged("den.eegt");

    ok = ok && run("eval --metric mse --in " + s + "den.eegt --ref " + s + "r1/clean.eegt "
                   "--out " + s + "mse.csv").code == 0;
    keep("mse.csv");
    ok = ok && run("--manifest " + s + "mse.csv.manifest").code == 0;
    ok = ok && unchanged("mse.csv");

    ok = ok && run("attn-export --model " + s + "r3/model.artc --in " + s +
                   "r1/noisy.eegt --out " + s + "att --seed 34").code == 0;
    keep("att/attn_L1_H1_enc_self.csv");
    keep("att/attn_L1_H4_dec_cross.csv");
    ok = ok && run("--manifest " + s + "att/manifest.txt").code == 0;
    ok = ok && unchanged("att/attn_L1_H1_enc_self.csv") &&
         unchanged("att/attn_L1_H4_dec_cross.csv");

    ok = ok && run("gradcheck --seed 35 --out " + s + "gc.csv").code == 0;
    keep("gc.csv");
    ok = ok && run("--manifest " + s + "gc.csv.manifest").code == 0;
    ok = ok && unchanged("gc.csv");

    // a restored checkpoint saves back byte for byte
    LoadedCheckpoint ck = load_checkpoint(s + "r3/model.artc");
    std::unique_ptr<Denoiser> rebuilt =
        make_denoiser(ck.model_id, ck.config, RngStream(ck.seed, "init"));
    apply_checkpoint(rebuilt->params(), ck);
    save_checkpoint(s + "resaved.artc", ck.model_id, ck.config, ck.seed, ck.epoch,
                    rebuilt->params());
    const bool ck_bitwise = same_bytes(s + "r3/model.artc", s + "resaved.artc");
    ok = ok && ck_bitwise;

    os << (ok ? " all subcommand replays byte-identical, checkpoint round trip bitwise" : "");
    detail = "checkpoint bitwise " + std::string(ck_bitwise ? "yes" : "NO") + "," + os.str();
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <arteeg-binary>\n", argv[0]);
        return 1;
    }
    g_bin = argv[1];
    fs::remove_all("acceptance_scratch");
    fs::create_directories("acceptance_scratch");

    struct Criterion {
        const char* name;
        std::function<bool(std::string&)> fn;
    };
    const std::vector<Criterion> criteria{
        {"gradient integrity", c1_gradient_integrity},
        {"architecture invariants", c2_architecture_invariants},
        {"data-pipeline identities", c3_data_pipeline},
        {"denoising efficacy", c4_denoising_efficacy},
        {"ssvep preservation", c5_ssvep_preservation},
        {"component suppression", c6_component_suppression},
        {"bci improvement", c7_bci_improvement},
        {"metric oracles", c8_metric_oracles},
        {"reproducibility", c9_reproducibility},
    };

    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        std::printf("-- %zu. %s\n", i + 1, criteria[i].name);
        std::fflush(stdout);
        std::string detail;
        bool ok = false;
        try {
            ok = criteria[i].fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        std::printf("[%s] %zu. %s: %s\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].name,
                    detail.c_str());
        std::fflush(stdout);
        if (!ok) ++failed;
    }
    if (failed == 0) {
        std::puts("acceptance: all 9 criteria passed");
        return 0;
    }
    std::printf("acceptance: %d criteria failed\n", failed);
    return 1;
}
