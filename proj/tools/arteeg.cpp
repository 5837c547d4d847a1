#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "arteeg/art.hpp"
#include "arteeg/bci.hpp"
#include "arteeg/checkpoint.hpp"
#include "arteeg/eegt_io.hpp"
#include "arteeg/errors.hpp"
#include "arteeg/eval.hpp"
#include "arteeg/manifest.hpp"
#include "arteeg/ops.hpp"
#include "arteeg/synth.hpp"
#include "arteeg/train.hpp"
#include "arteeg/unet.hpp"

namespace {

using namespace arteeg;
namespace fs = std::filesystem;

constexpr const char* kVersion = "0.1.0";

class Stopwatch {
public:
    Stopwatch() : start_(std::chrono::steady_clock::now()) {}
    long long ms() const {
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - start_)
            .count();
    }

private:
    std::chrono::steady_clock::time_point start_;
};

long long manifest_int(const Manifest& m, const std::string& key) {
    try {
        return std::stoll(m.get(key));
    } catch (const std::invalid_argument&) {
        throw UsageError("manifest: bad integer for '" + key + "'");
    } catch (const std::out_of_range&) {
        throw UsageError("manifest: integer out of range for '" + key + "'");
    }
}

double manifest_double(const Manifest& m, const std::string& key) {
    try {
        return std::stod(m.get(key));
    } catch (const std::exception&) {
        throw UsageError("manifest: bad number for '" + key + "'");
    }
}

std::uint64_t manifest_seed(const Manifest& m) {
    try {
        return std::stoull(m.get("seed"));
    } catch (const std::exception&) {
        throw UsageError("manifest: bad seed");
    }
}

void require_file(const std::string& path, const std::string& what) {
    if (!fs::exists(path)) throw UsageError("missing " + what + ": " + path);
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    fs::create_directories(path, ec);
    if (ec) throw UsageError("cannot create directory " + path + ": " + ec.message());
}

std::string join(const std::string& dir, const std::string& name) {
    return (fs::path(dir) / name).string();
}

// ---------------------------------------------------------------- synth ----

struct SynthArgs {
    int channels = 8;
    double fs = 256.0;
    double seconds = 4.0;
    int samples = 0;  // 0: derive from seconds
    bool samples_given = false;
    bool seconds_given = false;
    int pairs = 0;
    std::uint64_t seed = 42;
    std::string out;
};

void run_synth(const SynthArgs& a) {
    Stopwatch timer;
    if (a.pairs < 1) throw UsageError("--pairs must be at least 1");
    if (a.fs <= 0.0) throw UsageError("--fs must be positive");
    if (a.seconds <= 0.0) throw UsageError("--seconds must be positive");
    const int derived = static_cast<int>(std::lround(a.seconds * a.fs));
    int samples = derived;
    if (a.samples_given) {
        if (a.samples != derived) {
            std::ostringstream os;
            os << "--samples " << a.samples << " does not match " << a.seconds << " s at "
               << a.fs << " Hz (" << derived << " samples)";
            if (!a.seconds_given) os << "; pass --seconds to change the segment length";
            throw UsageError(os.str());
        }
        samples = a.samples;
    }
    if (samples < 2) throw UsageError("segment length must be at least 2 samples");

    SynthConfig cfg;
    cfg.channels = a.channels;
    cfg.fs = a.fs;
    cfg.samples = samples;
    ensure_dir(a.out);
    Dataset ds = make_dataset(cfg, a.pairs, RngStream(a.seed, "data"));

    write_eegt(join(a.out, "noisy.eegt"), ds.noisy);
    write_eegt(join(a.out, "clean.eegt"), ds.clean);
    std::vector<TagRow> rows(ds.tags.size());
    for (std::size_t i = 0; i < ds.tags.size(); ++i)
        rows[i] = {static_cast<int>(i), kind_name(ds.tags[i]), ""};
    for (int i : ds.split.train) rows[i].split = "train";
    for (int i : ds.split.val) rows[i].split = "val";
    for (int i : ds.split.test) rows[i].split = "test";
    write_tags(join(a.out, "tags.csv"), rows);

    Manifest m;
    m.set("subcommand", "synth");
    m.set("version", kVersion);
    m.set("channels", static_cast<long long>(a.channels));
    m.set("fs", a.fs);
    m.set("seconds", static_cast<double>(samples) / a.fs);
    m.set("samples", static_cast<long long>(samples));
    m.set("pairs", static_cast<long long>(a.pairs));
    m.set("seed", std::to_string(a.seed));
    m.set("out", a.out);
    m.set("duration_ms", timer.ms());
    m.save(join(a.out, "manifest.txt"));
    std::cout << "wrote " << a.pairs << " pairs (" << cfg.channels << " ch x " << samples
              << " samples) to " << a.out << "\n";
}

SynthArgs synth_from_manifest(const Manifest& m) {
    SynthArgs a;
    a.channels = static_cast<int>(manifest_int(m, "channels"));
    a.fs = manifest_double(m, "fs");
    a.seconds = manifest_double(m, "seconds");
    a.samples = static_cast<int>(manifest_int(m, "samples"));
    a.samples_given = true;
    a.seconds_given = true;
    a.pairs = static_cast<int>(manifest_int(m, "pairs"));
    a.seed = manifest_seed(m);
    a.out = m.get("out");
    return a;
}

// ------------------------------------------------------------- dataset -----

Dataset load_dataset(const std::string& dir) {
    const std::string noisy_path = join(dir, "noisy.eegt");
    const std::string clean_path = join(dir, "clean.eegt");
    const std::string tags_path = join(dir, "tags.csv");
    require_file(noisy_path, "dataset file");
    require_file(clean_path, "dataset file");
    require_file(tags_path, "dataset file");

    EegtData noisy = read_eegt(noisy_path);
    EegtData clean = read_eegt(clean_path);
    if (noisy.channels != clean.channels || noisy.samples != clean.samples ||
        noisy.segments.size() != clean.segments.size())
        throw UsageError("noisy.eegt and clean.eegt disagree in shape");
    std::vector<TagRow> rows = read_tags(tags_path);
    if (rows.size() != noisy.segments.size())
        throw UsageError("tags.csv row count does not match the data");

    Dataset ds;
    ds.noisy = std::move(noisy.segments);
    ds.clean = std::move(clean.segments);
    ds.tags.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].index != static_cast<int>(i))
            throw UsageError("tags.csv indices out of order");
        ds.tags[i] = kind_from_name(rows[i].tag);
        const int idx = static_cast<int>(i);
        if (rows[i].split == "train")
            ds.split.train.push_back(idx);
        else if (rows[i].split == "val")
            ds.split.val.push_back(idx);
        else if (rows[i].split == "test")
            ds.split.test.push_back(idx);
        else
            throw UsageError("tags.csv has unknown split '" + rows[i].split + "'");
    }
    return ds;
}

// ---------------------------------------------------------------- train ----

struct TrainArgs {
    std::string data, out, model;
    std::string target = "noise";
    int epochs = 60;
    double lr = 0.01;
    int batch = 0;  // 0: family default
    std::string optimizer;  // empty: family default
    double momentum = 0.0;
    double clip = 5.0;
    bool step_decay = false;
    int width = 32;
    int tau = 128;
    int heads = 8;
    int blocks = 2;
    int ff = 512;
    bool shared_embedding = false;
    bool attn_bypass = false;
    std::uint64_t seed = 42;
    int jobs = 1;
    bool quiet = false;
};

void run_train(const TrainArgs& a) {
    Stopwatch timer;
    if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
    const bool is_art = a.model == "art";
    const int batch = a.batch > 0 ? a.batch : (is_art ? 32 : 128);
    const std::string optimizer = !a.optimizer.empty() ? a.optimizer : (is_art ? "adam" : "sgd");

    Dataset ds = load_dataset(a.data);
    std::unique_ptr<Denoiser> model;
    if (is_art) {
        ArtConfig cfg;
        cfg.channels = static_cast<int>(ds.noisy.front().rows());
        cfg.tau = a.tau;
        cfg.heads = a.heads;
        cfg.blocks = a.blocks;
        cfg.ff = a.ff;
        cfg.target_mode = target_mode_from_name(a.target);
        cfg.shared_embedding = a.shared_embedding;
        model = make_art_denoiser(cfg, RngStream(a.seed, "init"));
    } else {
        UNetConfig cfg;
        cfg.variant = variant_from_name(a.model);
        cfg.channels = static_cast<int>(ds.noisy.front().rows());
        cfg.width = a.width;
        cfg.attn_bypass = a.attn_bypass;
        model = make_unet_denoiser(cfg, RngStream(a.seed, "init"));
    }

    TrainConfig tc;
    tc.epochs = a.epochs;
    tc.lr = a.lr;
    tc.batch_size = batch;
    tc.optimizer = optimizer_from_name(optimizer);
    tc.momentum = a.momentum;
    tc.clip_norm = a.clip;
    tc.step_decay = a.step_decay;
    tc.jobs = a.jobs;
    if (!a.quiet)
        tc.on_epoch = [&](int epoch, double tr, double va, double te) {
            std::cout << "epoch " << epoch << "/" << a.epochs << "  train " << tr << "  val "
                      << va << "  test " << te << "\n";
        };

    ensure_dir(a.out);
    TrainResult result = train(*model, ds, tc, RngStream(a.seed, "shuffle"));

    save_checkpoint(join(a.out, "model.artc"), model->model_id(), model->config_map(), a.seed,
                    static_cast<std::uint32_t>(result.best_epoch), model->params());
    write_losscurve(join(a.out, "losscurve.csv"), result.curve);

    Manifest m;
    m.set("subcommand", "train");
    m.set("version", kVersion);
    m.set("data", a.data);
    m.set("out", a.out);
    m.set("model", a.model);
    m.set("target", a.target);
    m.set("epochs", static_cast<long long>(a.epochs));
    m.set("lr", a.lr);
    m.set("batch", static_cast<long long>(batch));
    m.set("optimizer", optimizer);
    m.set("momentum", a.momentum);
    m.set("clip", a.clip);
    m.set("step_decay", a.step_decay ? "1" : "0");
    m.set("width", static_cast<long long>(a.width));
    m.set("tau", static_cast<long long>(a.tau));
    m.set("heads", static_cast<long long>(a.heads));
    m.set("blocks", static_cast<long long>(a.blocks));
    m.set("ff", static_cast<long long>(a.ff));
    m.set("shared_embedding", a.shared_embedding ? "1" : "0");
    m.set("attn_bypass", a.attn_bypass ? "1" : "0");
    m.set("seed", std::to_string(a.seed));
    m.set("jobs", static_cast<long long>(a.jobs));
    m.set("quiet", a.quiet ? "1" : "0");
    m.set("duration_ms", timer.ms());
    m.save(join(a.out, "manifest.txt"));

    std::cout << "best epoch " << result.best_epoch << " (val " << result.best_val << "); model "
              << join(a.out, "model.artc") << "\n";
}

TrainArgs train_from_manifest(const Manifest& m) {
    TrainArgs a;
    a.data = m.get("data");
    a.out = m.get("out");
    a.model = m.get("model");
    a.target = m.get("target");
    a.epochs = static_cast<int>(manifest_int(m, "epochs"));
    a.lr = manifest_double(m, "lr");
    a.batch = static_cast<int>(manifest_int(m, "batch"));
    a.optimizer = m.get("optimizer");
    a.momentum = manifest_double(m, "momentum");
    a.clip = manifest_double(m, "clip");
    a.step_decay = m.get("step_decay") == "1";
    a.width = static_cast<int>(manifest_int(m, "width"));
    a.tau = static_cast<int>(manifest_int(m, "tau"));
    a.heads = static_cast<int>(manifest_int(m, "heads"));
    a.blocks = static_cast<int>(manifest_int(m, "blocks"));
    a.ff = static_cast<int>(manifest_int(m, "ff"));
    a.shared_embedding = m.get("shared_embedding") == "1";
    a.attn_bypass = m.get("attn_bypass") == "1";
    a.seed = manifest_seed(m);
    a.jobs = static_cast<int>(manifest_int(m, "jobs"));
    a.quiet = m.get("quiet") == "1";
    return a;
}

// -------------------------------------------------------------- denoise ----

struct DenoiseArgs {
    std::string in, model, out;
    std::string reference;
    std::uint64_t seed = 42;
    int jobs = 1;
};

std::unique_ptr<Denoiser> load_model(const std::string& path, std::uint64_t seed) {
    require_file(path, "checkpoint");
    LoadedCheckpoint ck = load_checkpoint(path);
    std::unique_ptr<Denoiser> model = make_denoiser(ck.model_id, ck.config, RngStream(seed, "init"));
    apply_checkpoint(model->params(), ck);
    return model;
}

void run_denoise(const DenoiseArgs& a) {
    Stopwatch timer;
    if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
    std::unique_ptr<Denoiser> model = load_model(a.model, a.seed);
    require_file(a.in, "input");
    EegtData in = read_eegt(a.in);

    EegtData ref;
    const bool has_ref = !a.reference.empty();
    if (has_ref) {
        require_file(a.reference, "reference");
        ref = read_eegt(a.reference);
        if (ref.channels != in.channels || ref.samples != in.samples ||
            ref.segments.size() != in.segments.size())
            throw ShapeMismatch("--reference shape does not match the input");
    }

    const std::size_t n = in.segments.size();
    std::vector<RowMat> out(n);
    auto work = [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            Tensor x = Tensor::from_matrix(in.segments[i]);
            Tensor r;
            const Tensor* rp = nullptr;
            if (has_ref) {
                r = Tensor::from_matrix(ref.segments[i]);
                rp = &r;
            }
            out[i] = model->denoise(x, rp).matrix();
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(a.jobs, 1), n ? n : 1);
    if (workers <= 1) {
        work(0, n);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back(work, n * w / workers, n * (w + 1) / workers);
        for (std::thread& t : pool) t.join();
    }
    write_eegt(a.out, out);

    Manifest m;
    m.set("subcommand", "denoise");
    m.set("version", kVersion);
    m.set("in", a.in);
    m.set("model", a.model);
    m.set("out", a.out);
    m.set("reference", a.reference);
    m.set("seed", std::to_string(a.seed));
    m.set("jobs", static_cast<long long>(a.jobs));
    m.set("duration_ms", timer.ms());
    m.save(a.out + ".manifest");
    std::cout << "denoised " << n << " segments into " << a.out << "\n";
}

DenoiseArgs denoise_from_manifest(const Manifest& m) {
    DenoiseArgs a;
    a.in = m.get("in");
    a.model = m.get("model");
    a.out = m.get("out");
    a.reference = m.get("reference");
    a.seed = manifest_seed(m);
    a.jobs = static_cast<int>(manifest_int(m, "jobs"));
    return a;
}

// ----------------------------------------------------------------- eval ----

struct EvalArgs {
    std::string metric;
    std::string in, ref, out;
    double fs = 256.0;
    double stim = 0.0;
    double band_lo = 1.0, band_hi = 50.0;
    int sig_lo = -1, sig_hi = -1, base_lo = -1, base_hi = -1;
    std::string in_a, in_b, model;
    int runs = 10;
    double split = 0.8;
    std::string counts;
    std::string dataset_label = "data", method_label = "raw";
    std::uint64_t seed = 42;
    int jobs = 1;
};

void eval_mse(const EvalArgs& a) {
    if (a.in.empty()) throw UsageError("--metric mse needs --in");
    if (a.ref.empty()) throw UsageError("--metric mse needs --ref");
    require_file(a.in, "input");
    require_file(a.ref, "reference");
    EegtData z = read_eegt(a.in);
    EegtData ref = read_eegt(a.ref);
    if (z.channels != ref.channels || z.samples != ref.samples ||
        z.segments.size() != ref.segments.size())
        throw ShapeMismatch("input and reference disagree in shape");
    std::vector<double> acc(z.channels, 0.0);
    for (std::size_t i = 0; i < z.segments.size(); ++i) {
        const std::vector<double> per = channel_mse(z.segments[i], ref.segments[i]);
        for (int c = 0; c < z.channels; ++c) acc[c] += per[c];
    }
    for (double& v : acc) v /= static_cast<double>(z.segments.size());
    write_mse_csv(a.out, acc);
}

void eval_snr_ssvep(const EvalArgs& a) {
    if (a.in.empty()) throw UsageError("--metric snr-ssvep needs --in");
    if (a.stim <= 0.0) throw UsageError("--metric snr-ssvep needs --stim");
    require_file(a.in, "input");
    EegtData x = read_eegt(a.in);
    double sum = 0.0;
    long n = 0;
    for (const RowMat& seg : x.segments)
        for (int c = 0; c < x.channels; ++c) {
            sum += ssvep_snr(seg.row(c).transpose(), a.stim, a.fs, a.band_lo, a.band_hi);
            ++n;
        }
    if (n == 0) throw UsageError("input holds no segments");
    write_snr_csv(a.out, {{a.stim, sum / static_cast<double>(n)}});
}

void eval_snr_erp(const EvalArgs& a) {
    if (a.in.empty()) throw UsageError("--metric snr-erp needs --in");
    if (a.sig_lo < 0 || a.sig_hi < 0 || a.base_lo < 0 || a.base_hi < 0)
        throw UsageError("--metric snr-erp needs --signal-lo/--signal-hi/--base-lo/--base-hi");
    require_file(a.in, "input");
    EegtData x = read_eegt(a.in);
    const double db =
        erp_snr(x.segments, {a.sig_lo, a.sig_hi}, {a.base_lo, a.base_hi});
    write_snr_csv(a.out, {{0.0, db}});
}

void eval_components(const EvalArgs& a) {
    if (a.in.empty()) throw UsageError("--metric components needs --in");
    require_file(a.in, "input");
    EegtData x = read_eegt(a.in);
    if (x.segments.empty()) throw UsageError("input holds no segments");
    RowMat whole(x.channels, static_cast<long>(x.samples) * x.segments.size());
    for (std::size_t i = 0; i < x.segments.size(); ++i)
        whole.middleCols(static_cast<long>(i) * x.samples, x.samples) = x.segments[i];
    const int count = count_nonbrain(whole, a.fs, RngStream(a.seed, "init"));
    write_components_csv(a.out, {{a.dataset_label, a.method_label, count}});
}

void eval_bci(const EvalArgs& a) {
    if (a.in_a.empty() || a.in_b.empty())
        throw UsageError("--metric bci needs --in-a and --in-b");
    require_file(a.in_a, "class-a trials");
    require_file(a.in_b, "class-b trials");
    EegtData ta = read_eegt(a.in_a);
    EegtData tb = read_eegt(a.in_b);
    if (ta.channels != tb.channels) throw ShapeMismatch("trial files differ in channel count");

    TrialDenoiser denoiser;
    std::unique_ptr<Denoiser> model;
    if (!a.model.empty()) {
        model = load_model(a.model, a.seed);
        denoiser = [&](const RowMat& trial) {
            RowMat z = trial;
            zscore_rows_inplace(z);
            return model->denoise(Tensor::from_matrix(z)).matrix();
        };
    }
    const BciResult result = bci_holdout(ta.segments, tb.segments, denoiser,
                                         RngStream(a.seed, "holdout"), a.runs, a.split);
    write_bci_csv(a.out, result.accuracies);
    std::cout << "bci mean accuracy " << result.mean << " +- " << result.stddev << "\n";
}

void eval_spider(const EvalArgs& a) {
    if (a.counts.empty()) throw UsageError("--metric spider needs --counts");
    require_file(a.counts, "counts file");
    std::ifstream in(a.counts);
    std::string line;
    if (!std::getline(in, line) || line != "dataset,method,count")
        throw UsageError("counts file is not a components.csv");
    std::vector<double> values;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const std::size_t last = line.rfind(',');
        if (last == std::string::npos) throw UsageError("malformed counts row '" + line + "'");
        try {
            values.push_back(std::stod(line.substr(last + 1)));
        } catch (const std::exception&) {
            throw UsageError("malformed count in row '" + line + "'");
        }
    }
    const double area = shoelace_area(spider_points(values));
    write_spider_csv(a.out, values, area);
}

void run_eval(const EvalArgs& a) {
    Stopwatch timer;
    if (a.out.empty()) throw UsageError("--out is required");
    if (a.metric == "mse")
        eval_mse(a);
    else if (a.metric == "snr-ssvep")
        eval_snr_ssvep(a);
    else if (a.metric == "snr-erp")
        eval_snr_erp(a);
    else if (a.metric == "components")
        eval_components(a);
    else if (a.metric == "bci")
        eval_bci(a);
    else if (a.metric == "spider")
        eval_spider(a);
    else
        throw UsageError("unknown metric '" + a.metric + "'");

    Manifest m;
    m.set("subcommand", "eval");
    m.set("version", kVersion);
    m.set("metric", a.metric);
    m.set("in", a.in);
    m.set("ref", a.ref);
    m.set("out", a.out);
    m.set("fs", a.fs);
    m.set("stim", a.stim);
    m.set("band_lo", a.band_lo);
    m.set("band_hi", a.band_hi);
    m.set("signal_lo", static_cast<long long>(a.sig_lo));
    m.set("signal_hi", static_cast<long long>(a.sig_hi));
    m.set("base_lo", static_cast<long long>(a.base_lo));
    m.set("base_hi", static_cast<long long>(a.base_hi));
    m.set("in_a", a.in_a);
    m.set("in_b", a.in_b);
    m.set("model", a.model);
    m.set("runs", static_cast<long long>(a.runs));
    m.set("split", a.split);
    m.set("counts", a.counts);
    m.set("dataset", a.dataset_label);
    m.set("method", a.method_label);
    m.set("seed", std::to_string(a.seed));
    m.set("jobs", static_cast<long long>(a.jobs));
    m.set("duration_ms", timer.ms());
    m.save(a.out + ".manifest");
}

EvalArgs eval_from_manifest(const Manifest& m) {
    EvalArgs a;
    a.metric = m.get("metric");
    a.in = m.get("in");
    a.ref = m.get("ref");
    a.out = m.get("out");
    a.fs = manifest_double(m, "fs");
    a.stim = manifest_double(m, "stim");
    a.band_lo = manifest_double(m, "band_lo");
    a.band_hi = manifest_double(m, "band_hi");
    a.sig_lo = static_cast<int>(manifest_int(m, "signal_lo"));
    a.sig_hi = static_cast<int>(manifest_int(m, "signal_hi"));
    a.base_lo = static_cast<int>(manifest_int(m, "base_lo"));
    a.base_hi = static_cast<int>(manifest_int(m, "base_hi"));
    a.in_a = m.get("in_a");
    a.in_b = m.get("in_b");
    a.model = m.get("model");
    a.runs = static_cast<int>(manifest_int(m, "runs"));
    a.split = manifest_double(m, "split");
    a.counts = m.get("counts");
    a.dataset_label = m.get("dataset");
    a.method_label = m.get("method");
    a.seed = manifest_seed(m);
    a.jobs = static_cast<int>(manifest_int(m, "jobs"));
    return a;
}

// ------------------------------------------------------------ gradcheck ----

struct GradcheckArgs {
    std::uint64_t seed = 42;
    std::string out;
    bool corrupt = false;
};

struct GradcheckRow {
    std::string name;
    double err = 0.0;
};

Tensor randn(const Shape& s, RngStream& rng) {
    Eigen::ArrayXd v(s.size());
    for (long i = 0; i < v.size(); ++i) v[i] = rng.normal();
    return Tensor::from_flat(s, v);
}

// Reduce any output to a smooth scalar.
Tensor to_scalar(const Tensor& y) { return mse_loss(y, Tensor::zeros(y.shape())); }

// Finite-difference check of one stored parameter, probed in place so the
// model keeps reading it through its own store.
double in_place_check(const std::function<Tensor()>& loss_thunk, ParamStore& store, Tensor& p,
                      double eps = 1e-5, double floor = 1e-5) {
    store.zero_grads();
    backward(loss_thunk());
    p.node().ensure_grad();
    const Eigen::ArrayXd analytic = p.grad();

    double worst = 0.0;
    NoGradGuard ng;
    Eigen::ArrayXd& v = p.leaf_values();
    for (long i = 0; i < v.size(); ++i) {
        const double saved = v[i];
        v[i] = saved + eps;
        const double fp = loss_thunk().scalar();
        v[i] = saved - eps;
        const double fm = loss_thunk().scalar();
        v[i] = saved;
        const double numeric = (fp - fm) / (2.0 * eps);
        const double rel = std::abs(analytic[i] - numeric) /
                           std::max({std::abs(analytic[i]), std::abs(numeric), floor});
        worst = std::max(worst, rel);
    }
    return worst;
}

std::vector<GradcheckRow> gradcheck_rows(std::uint64_t seed, bool corrupt) {
    RngStream rng(seed, "gradcheck");
    std::vector<GradcheckRow> rows;
    auto item = [&](const std::string& name, const Tensor& probe,
                    const std::function<Tensor(const Tensor&)>& fn) {
        rows.push_back({name, grad_check(fn, probe)});
    };

    {
        RngStream r = rng.sub("add");
        Tensor b = randn(Shape(3, 5), r);
        item("add", randn(Shape(3, 5), r),
             [b](const Tensor& x) { return to_scalar(add(x, b)); });
    }
    {
        RngStream r = rng.sub("sub_scale");
        Tensor b = randn(Shape(3, 5), r);
        item("sub_scale", randn(Shape(3, 5), r),
             [b](const Tensor& x) { return to_scalar(scale(sub(x, b), -2.5)); });
    }
    {
        RngStream r = rng.sub("relu");
        item("relu", randn(Shape(4, 6), r), [](const Tensor& x) { return to_scalar(relu(x)); });
    }
    {
        RngStream r = rng.sub("conv_input");
        Tensor k = randn(Shape(3, 2, 3), r);
        Tensor b = randn(Shape(3), r);
        item("conv1d_same_input", randn(Shape(2, 8), r),
             [k, b](const Tensor& x) { return to_scalar(conv1d(x, k, b, Pad::same)); });
    }
    {
        RngStream r = rng.sub("conv_kernel");
        Tensor x = randn(Shape(2, 8), r);
        Tensor b = randn(Shape(3), r);
        item("conv1d_same_kernels", randn(Shape(3, 2, 3), r),
             [x, b](const Tensor& k) { return to_scalar(conv1d(x, k, b, Pad::same)); });
    }
    {
        RngStream r = rng.sub("conv_valid");
        Tensor k = randn(Shape(2, 2, 4), r);
        Tensor b = randn(Shape(2), r);
        item("conv1d_valid_stride2", randn(Shape(2, 12), r),
             [k, b](const Tensor& x) { return to_scalar(conv1d(x, k, b, Pad::valid, 2)); });
    }
    {
        RngStream r = rng.sub("maxpool");
        item("maxpool1d", randn(Shape(3, 9), r),
             [](const Tensor& x) { return to_scalar(maxpool1d(x)); });
    }
    {
        RngStream r = rng.sub("upsample");
        item("upsample1d", randn(Shape(3, 5), r),
             [](const Tensor& x) { return to_scalar(upsample1d(x)); });
    }
    {
        RngStream r = rng.sub("linear_x");
        Tensor w = randn(Shape(4, 3), r);
        Tensor b = randn(Shape(4), r);
        item("linear_input", randn(Shape(3, 6), r),
             [w, b](const Tensor& x) { return to_scalar(linear(x, w, b)); });
    }
    {
        RngStream r = rng.sub("linear_w");
        Tensor x = randn(Shape(3, 6), r);
        Tensor b = randn(Shape(4), r);
        item("linear_weight", randn(Shape(4, 3), r),
             [x, b](const Tensor& w) { return to_scalar(linear(x, w, b)); });
    }
    {
        RngStream r = rng.sub("layer_norm");
        Tensor g = randn(Shape(5), r);
        Tensor o = randn(Shape(5), r);
        item("layer_norm", randn(Shape(5, 7), r),
             [g, o](const Tensor& x) { return to_scalar(layer_norm(x, g, o)); });
    }
    {
        RngStream r = rng.sub("batch_norm");
        Tensor g = randn(Shape(3), r);
        Tensor o = randn(Shape(3), r);
        item("batch_norm_train", randn(Shape(2, 3, 6), r), [g, o](const Tensor& x) {
            Tensor rm = Tensor::zeros(Shape(3));
            Tensor rv = Tensor::constant(Shape(3), 1.0);
            Tensor rc = Tensor::zeros(Shape(1));
            return to_scalar(batch_norm(x, g, o, rm, rv, rc, true));
        });
    }
    {
        RngStream r = rng.sub("log_softmax");
        item("log_softmax", randn(Shape(4, 5), r),
             [](const Tensor& x) { return to_scalar(log_softmax(x)); });
    }
    {
        // Against a zero target the loss is exactly constant (unit-variance
        // rows), so probe against a random one to keep the gradient alive.
        RngStream r = rng.sub("zscore");
        Tensor t = randn(Shape(3, 8), r);
        item("zscore", randn(Shape(3, 8), r),
             [t](const Tensor& x) { return mse_loss(zscore(x), t); });
    }
    {
        RngStream r = rng.sub("attention");
        Tensor k = randn(Shape(6, 4), r);
        Tensor v = randn(Shape(6, 4), r);
        item("scaled_attention_q", randn(Shape(5, 4), r),
             [k, v](const Tensor& q) { return to_scalar(scaled_attention(q, k, v, 0.5)); });
    }
    {
        RngStream r = rng.sub("mha");
        MhaParams p{randn(Shape(4, 4), r), randn(Shape(4), r), randn(Shape(4, 4), r),
                    randn(Shape(4), r),    randn(Shape(4, 4), r), randn(Shape(4), r),
                    randn(Shape(4, 4), r), randn(Shape(4), r)};
        item("multi_head_attention", randn(Shape(4, 6), r),
             [p](const Tensor& x) { return to_scalar(multi_head_attention(x, x, 2, p)); });
    }
    {
        RngStream r = rng.sub("mse");
        Tensor t = randn(Shape(3, 7), r);
        item("mse_loss", randn(Shape(3, 7), r),
             [t](const Tensor& x) { return mse_loss(x, t); });
    }

    // Full models: the row reports the worst error over the input and every
    // trainable parameter, with the training-mode loss each family optimizes.
    auto model_item = [&](const std::string& name, ParamStore& store,
                          const std::function<Tensor(const Tensor&)>& loss_of_input,
                          const Tensor& x0) {
        double worst = grad_check(loss_of_input, x0);
        auto thunk = [&]() { return loss_of_input(x0); };
        for (ParamEntry& e : store.entries())
            if (e.trainable) worst = std::max(worst, in_place_check(thunk, store, e.tensor));
        rows.push_back({name, worst});
    };

    const int toy_c = 2, toy_t = 32;
    for (UNetVariant variant : {UNetVariant::base, UNetVariant::plus, UNetVariant::attn}) {
        UNetConfig cfg;
        cfg.channels = toy_c;
        cfg.width = 4;
        cfg.variant = variant;
        RngStream r = rng.sub(variant_name(variant));
        UNet net(cfg, r.sub("init"));
        Tensor x0 = randn(Shape(toy_c, toy_t), r);
        Tensor target = randn(Shape(toy_c, toy_t), r);
        auto loss_of_input = [&net, target](const Tensor& xin) {
            std::vector<Tensor> heads = net.forward_heads(xin, true);
            if (heads.size() == 1) return mse_loss(heads.front(), target);
            std::vector<Tensor> losses;
            losses.reserve(heads.size());
            for (const Tensor& h : heads) losses.push_back(mse_loss(h, target));
            return mean_of(losses);
        };
        model_item(variant_name(variant), net.params(), loss_of_input, x0);
    }
    {
        ArtConfig cfg;
        cfg.channels = toy_c;
        cfg.tau = 8;
        cfg.heads = 2;
        cfg.blocks = 1;
        cfg.ff = 16;
        RngStream r = rng.sub("art");
        Art net(cfg, r.sub("init"));
        Tensor x0 = randn(Shape(toy_c, toy_t), r);
        Tensor target = randn(Shape(toy_c, toy_t), r);
        auto loss_of_input = [&net, target](const Tensor& xin) {
            return mse_loss(net.forward(xin), target);
        };
        model_item("art", net.params(), loss_of_input, x0);
    }

    if (corrupt) {
        RngStream r = rng.sub("corrupt");
        // Half the dependence is detached from the graph, so the analytic
        // gradient misses it and the check must fail.
        item("corrupt_fixture", randn(Shape(3, 3), r),
             [](const Tensor& x) { return to_scalar(matmul(x, x.detached())); });
    }
    return rows;
}

void run_gradcheck(const GradcheckArgs& a) {
    Stopwatch timer;
    std::vector<GradcheckRow> rows = gradcheck_rows(a.seed, a.corrupt);
    bool all_pass = true;
    std::printf("%-26s %14s  %s\n", "item", "max_rel_err", "status");
    for (const GradcheckRow& r : rows) {
        const bool pass = r.err < 1e-4;
        all_pass = all_pass && pass;
        std::printf("%-26s %14.3e  %s\n", r.name.c_str(), r.err, pass ? "pass" : "FAIL");
    }
    if (!a.out.empty()) {
        std::ofstream out(a.out);
        if (!out) throw UsageError("cannot write " + a.out);
        out.precision(17);
        out << "item,max_rel_err,status\n";
        for (const GradcheckRow& r : rows)
            out << r.name << ',' << r.err << ',' << (r.err < 1e-4 ? "pass" : "FAIL") << '\n';
        Manifest m;
        m.set("subcommand", "gradcheck");
        m.set("version", kVersion);
        m.set("seed", std::to_string(a.seed));
        m.set("out", a.out);
        m.set("corrupt", a.corrupt ? "1" : "0");
        m.set("duration_ms", timer.ms());
        m.save(a.out + ".manifest");
    }
    if (!all_pass) throw NumericalError("gradient check failed");
}

GradcheckArgs gradcheck_from_manifest(const Manifest& m) {
    GradcheckArgs a;
    a.seed = manifest_seed(m);
    a.out = m.get("out");
    a.corrupt = m.get("corrupt") == "1";
    return a;
}

// ---------------------------------------------------------- attn-export ----

struct AttnArgs {
    std::string model, in, out;
    std::string reference;
    int segment = 0;
    bool all_layers = false;
    std::uint64_t seed = 42;
};

void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& m) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path);
    out.precision(17);
    for (long i = 0; i < m.rows(); ++i) {
        for (long j = 0; j < m.cols(); ++j) out << (j ? "," : "") << m(i, j);
        out << '\n';
    }
}

void run_attn_export(const AttnArgs& a) {
    Stopwatch timer;
    require_file(a.model, "checkpoint");
    LoadedCheckpoint ck = load_checkpoint(a.model);
    if (ck.model_id != "art")
        throw UsageError("attention export needs an art checkpoint, found '" + ck.model_id +
                         "'");
    ArtConfig cfg = art_config_from_map(ck.config);
    Art art(cfg, RngStream(a.seed, "init"));
    apply_checkpoint(art.params(), ck);

    require_file(a.in, "input");
    EegtData in = read_eegt(a.in);
    if (a.segment < 0 || a.segment >= static_cast<int>(in.segments.size()))
        throw UsageError("--segment out of range");

    Tensor x = Tensor::from_matrix(in.segments[a.segment]);
    Tensor ref;
    const Tensor* rp = nullptr;
    if (!a.reference.empty()) {
        EegtData rd = read_eegt(a.reference);
        if (a.segment >= static_cast<int>(rd.segments.size()))
            throw UsageError("--segment out of range in the reference");
        ref = Tensor::from_matrix(rd.segments[a.segment]);
        rp = &ref;
    }

    AttnScores scores;
    {
        NoGradGuard off;
        art.forward(x, rp, false, &scores);
    }

    ensure_dir(a.out);
    const int layers = a.all_layers ? cfg.blocks : std::min(2, cfg.blocks);
    const std::vector<std::pair<const char*,
                                const std::vector<std::vector<Eigen::MatrixXd>>*>>
        sites{{"enc_self", &scores.enc_self},
              {"dec_self", &scores.dec_self},
              {"dec_cross", &scores.dec_cross}};
    int files = 0;
    for (const auto& [site, maps] : sites)
        for (int l = 0; l < layers; ++l)
            for (int h = 0; h < cfg.heads; ++h) {
                std::ostringstream name;
                name << "attn_L" << l + 1 << "_H" << h + 1 << "_" << site << ".csv";
                write_matrix_csv(join(a.out, name.str()), (*maps)[l][h]);
                ++files;
            }

    Manifest m;
    m.set("subcommand", "attn-export");
    m.set("version", kVersion);
    m.set("model", a.model);
    m.set("in", a.in);
    m.set("out", a.out);
    m.set("reference", a.reference);
    m.set("segment", static_cast<long long>(a.segment));
    m.set("layers", a.all_layers ? "all" : "default");
    m.set("seed", std::to_string(a.seed));
    m.set("duration_ms", timer.ms());
    m.save(join(a.out, "manifest.txt"));
    std::cout << "wrote " << files << " attention maps to " << a.out << "\n";
}

AttnArgs attn_from_manifest(const Manifest& m) {
    AttnArgs a;
    a.model = m.get("model");
    a.in = m.get("in");
    a.out = m.get("out");
    a.reference = m.get("reference");
    a.segment = static_cast<int>(manifest_int(m, "segment"));
    a.all_layers = m.get("layers") == "all";
    a.seed = manifest_seed(m);
    return a;
}

// ----------------------------------------------------------------- main ----

void run_manifest(const std::string& path) {
    Manifest m = Manifest::load(path);
    const std::string& sub = m.get("subcommand");
    if (sub == "synth")
        run_synth(synth_from_manifest(m));
    else if (sub == "train")
        run_train(train_from_manifest(m));
    else if (sub == "denoise")
        run_denoise(denoise_from_manifest(m));
    else if (sub == "eval")
        run_eval(eval_from_manifest(m));
    else if (sub == "gradcheck")
        run_gradcheck(gradcheck_from_manifest(m));
    else if (sub == "attn-export")
        run_attn_export(attn_from_manifest(m));
    else
        throw UsageError("manifest names unknown subcommand '" + sub + "'");
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEG artifact removal: synthesis, training, denoising, evaluation"};
    app.require_subcommand(0, 1);
    std::string manifest_path;
    app.add_option("--manifest", manifest_path, "Re-run a recorded command from its manifest");

    SynthArgs sy;
    CLI::App* synth = app.add_subcommand("synth", "Generate a noisy/clean dataset");
    synth->add_option("--channels", sy.channels, "EEG channel count")->capture_default_str();
    synth->add_option("--fs", sy.fs, "Sample rate in Hz")->capture_default_str();
    CLI::Option* opt_seconds =
        synth->add_option("--seconds", sy.seconds, "Segment length in seconds")
            ->capture_default_str();
    CLI::Option* opt_samples =
        synth->add_option("--samples", sy.samples, "Segment length in samples (cross-check)");
    synth->add_option("--pairs", sy.pairs, "Number of noisy/clean pairs")->required();
    synth->add_option("--seed", sy.seed, "Master seed")->capture_default_str();
    synth->add_option("--out", sy.out, "Output directory")->required();

    TrainArgs tr;
    CLI::App* train_cmd = app.add_subcommand("train", "Train a denoising model");
    train_cmd->add_option("--data", tr.data, "Dataset directory from synth")->required();
    train_cmd->add_option("--out", tr.out, "Checkpoint directory")->required();
    train_cmd
        ->add_option("--model", tr.model, "icunet | icunetpp | icunet-attn | art")
        ->required();
    train_cmd->add_option("--target", tr.target, "ART decoder stream: clean | null | noise")
        ->capture_default_str();
    train_cmd->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
    train_cmd->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
    train_cmd->add_option("--batch", tr.batch, "Batch size (default 128 U-Net, 32 ART)");
    train_cmd->add_option("--optimizer", tr.optimizer,
                          "sgd | adam (default sgd U-Net, adam ART)");
    train_cmd->add_option("--momentum", tr.momentum, "SGD momentum")->capture_default_str();
    train_cmd->add_option("--clip", tr.clip, "Gradient norm cap, <= 0 disables")
        ->capture_default_str();
    train_cmd->add_flag("--step-decay", tr.step_decay, "Halve the rate every 20 epochs");
    train_cmd->add_option("--width", tr.width, "U-Net base feature width")
        ->capture_default_str();
    train_cmd->add_option("--tau", tr.tau, "ART embedding dim")->capture_default_str();
    train_cmd->add_option("--heads", tr.heads, "ART attention heads")->capture_default_str();
    train_cmd->add_option("--blocks", tr.blocks, "ART encoder/decoder blocks")
        ->capture_default_str();
    train_cmd->add_option("--ff", tr.ff, "ART feed-forward dim")->capture_default_str();
    train_cmd->add_flag("--shared-embedding", tr.shared_embedding,
                        "ART decoder reuses the encoder embedding");
    train_cmd->add_flag("--attn-bypass", tr.attn_bypass,
                        "icunet-attn: skip the attention prelayers");
    train_cmd->add_option("--seed", tr.seed, "Master seed")->capture_default_str();
    train_cmd->add_option("--jobs", tr.jobs, "Worker threads for evaluation passes")
        ->capture_default_str();
    train_cmd->add_flag("--quiet", tr.quiet, "Suppress per-epoch progress");

    DenoiseArgs dn;
    CLI::App* denoise = app.add_subcommand("denoise", "Reconstruct a recording");
    denoise->add_option("--in", dn.in, "Input EEGT file")->required();
    denoise->add_option("--model", dn.model, "Checkpoint file")->required();
    denoise->add_option("--out", dn.out, "Output EEGT file")->required();
    denoise->add_option("--reference", dn.reference,
                        "Clean EEGT file for clean-target ART decoding");
    denoise->add_option("--seed", dn.seed, "Master seed")->capture_default_str();
    denoise->add_option("--jobs", dn.jobs, "Worker threads")->capture_default_str();

    EvalArgs ev;
    CLI::App* eval_cmd = app.add_subcommand("eval", "Compute a metric CSV");
    eval_cmd
        ->add_option("--metric", ev.metric,
                     "mse | snr-ssvep | snr-erp | components | bci | spider")
        ->required();
    eval_cmd->add_option("--in", ev.in, "Input EEGT file");
    eval_cmd->add_option("--ref", ev.ref, "Reference EEGT file (mse)");
    eval_cmd->add_option("--out", ev.out, "Output CSV")->required();
    eval_cmd->add_option("--fs", ev.fs, "Sample rate in Hz")->capture_default_str();
    eval_cmd->add_option("--stim", ev.stim, "Stimulus frequency in Hz (snr-ssvep)");
    eval_cmd->add_option("--band-lo", ev.band_lo, "Noise band low edge")->capture_default_str();
    eval_cmd->add_option("--band-hi", ev.band_hi, "Noise band high edge")
        ->capture_default_str();
    eval_cmd->add_option("--signal-lo", ev.sig_lo, "Signal window start sample (snr-erp)");
    eval_cmd->add_option("--signal-hi", ev.sig_hi, "Signal window end sample, exclusive");
    eval_cmd->add_option("--base-lo", ev.base_lo, "Baseline window start sample");
    eval_cmd->add_option("--base-hi", ev.base_hi, "Baseline window end sample, exclusive");
    eval_cmd->add_option("--in-a", ev.in_a, "Class-a trials EEGT (bci)");
    eval_cmd->add_option("--in-b", ev.in_b, "Class-b trials EEGT (bci)");
    eval_cmd->add_option("--model", ev.model, "Checkpoint used to denoise trials (bci)");
    eval_cmd->add_option("--runs", ev.runs, "Holdout repetitions (bci)")->capture_default_str();
    eval_cmd->add_option("--split", ev.split, "Training fraction per run (bci)")
        ->capture_default_str();
    eval_cmd->add_option("--counts", ev.counts, "components.csv input (spider)");
    eval_cmd->add_option("--dataset", ev.dataset_label, "Row label (components)")
        ->capture_default_str();
    eval_cmd->add_option("--method", ev.method_label, "Row label (components)")
        ->capture_default_str();
    eval_cmd->add_option("--seed", ev.seed, "Master seed")->capture_default_str();
    eval_cmd->add_option("--jobs", ev.jobs, "Worker threads")->capture_default_str();

    GradcheckArgs gc;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient audit");
    gradcheck->add_option("--seed", gc.seed, "Probe seed")->capture_default_str();
    gradcheck->add_option("--out", gc.out, "Optional CSV copy of the table");
    CLI::Option* corrupt_flag = gradcheck->add_flag("--corrupt", gc.corrupt);
    corrupt_flag->group("");  // negative-control fixture, hidden from help

    AttnArgs at;
    CLI::App* attn = app.add_subcommand("attn-export", "Dump attention score maps");
    attn->add_option("--model", at.model, "ART checkpoint")->required();
    attn->add_option("--in", at.in, "Input EEGT file")->required();
    attn->add_option("--out", at.out, "Output directory")->required();
    attn->add_option("--reference", at.reference, "Clean EEGT for clean-target decoding");
    attn->add_option("--segment", at.segment, "Segment index")->capture_default_str();
    attn->add_flag("--layers-all", at.all_layers, "Export every layer, not just the first 2");
    attn->add_option("--seed", at.seed, "Master seed")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (!manifest_path.empty()) {
            if (app.get_subcommands().size() > 0)
                throw UsageError("--manifest replaces the subcommand");
            run_manifest(manifest_path);
            return 0;
        }
        if (synth->parsed()) {
            sy.samples_given = opt_samples->count() > 0;
            sy.seconds_given = opt_seconds->count() > 0;
            run_synth(sy);
        } else if (train_cmd->parsed()) {
            run_train(tr);
        } else if (denoise->parsed()) {
            run_denoise(dn);
        } else if (eval_cmd->parsed()) {
            run_eval(ev);
        } else if (gradcheck->parsed()) {
            run_gradcheck(gc);
        } else if (attn->parsed()) {
            run_attn_export(at);
        } else {
            std::cerr << app.help();
            return 2;
        }
    } catch (const NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
