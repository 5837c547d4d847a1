#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

#include "arteeg/eval.hpp"
#include "arteeg/ops.hpp"
#include "arteeg/synth.hpp"

using namespace arteeg;

namespace {

RowMat random_mat(int c, int t, std::uint64_t seed) {
    RngStream rng(seed);
    RowMat m(c, t);
    for (int i = 0; i < c; ++i)
        for (int j = 0; j < t; ++j) m(i, j) = rng.normal();
    return m;
}

Eigen::VectorXd tone(double f, double fs, int n, double amp = 1.0) {
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * f * i / fs);
    return x;
}

Eigen::VectorXd white(int n, std::uint64_t seed, double amp = 1.0) {
    RngStream rng(seed);
    Eigen::VectorXd x(n);
    for (int i = 0; i < n; ++i) x[i] = amp * rng.normal();
    return x;
}

// Broad scalp profile with low kurtosis, far from the one-sensor pattern.
Eigen::VectorXd smooth_topo(int c, double phase) {
    Eigen::VectorXd v(c);
    for (int i = 0; i < c; ++i)
        v[i] = 1.0 + 0.3 * std::sin(2.0 * std::numbers::pi * i / c + phase);
    return v / v.norm();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

} // namespace

TEST_CASE("channel mse oracles") {
    RowMat a(2, 4);
    a << 0, 0, 0, 0, 1, 1, 1, 1;
    RowMat b = RowMat::Zero(2, 4);
    std::vector<double> per = channel_mse(a, b);
    REQUIRE(per.size() == 2);
    CHECK(per[0] == 0.0);
    CHECK(per[1] == 1.0);

    RowMat c(1, 2);
    c << 1, 0;
    RowMat d(1, 2);
    d << 0, 0;
    CHECK(channel_mse(c, d)[0] == 0.5);
}

TEST_CASE("mean of channel mse equals the training loss bitwise") {
    RowMat z = random_mat(5, 77, 1);
    RowMat ref = random_mat(5, 77, 2);
    std::vector<double> per = channel_mse(z, ref);
    double mean = 0.0;
    for (double v : per) mean += v;
    mean /= static_cast<double>(per.size());
    const double loss =
        mse_loss(Tensor::from_matrix(z), Tensor::from_matrix(ref)).scalar();
    CHECK(mean == loss);  // exact: the two paths share one accumulation
}

TEST_CASE("ssvep snr rises with stimulus power and counts harmonics") {
    const double fs = 256.0;
    const int n = 2048;
    Eigen::VectorXd bg = white(n, 5, 1.0);
    const double weak = ssvep_snr(bg + tone(10.0, fs, n, 0.2), 10.0, fs);
    const double strong = ssvep_snr(bg + tone(10.0, fs, n, 2.0), 10.0, fs);
    CHECK(strong > weak);
    CHECK(strong > 10.0);

    // harmonic-only content still counts toward the stimulus power
    Eigen::VectorXd harm = bg + tone(20.0, fs, n, 1.5) + tone(30.0, fs, n, 1.5);
    CHECK(ssvep_snr(harm, 10.0, fs) > ssvep_snr(bg, 10.0, fs) + 6.0);
}

TEST_CASE("ssvep snr guards") {
    Eigen::VectorXd x = white(2048, 6);
    CHECK_THROWS_AS(ssvep_snr(x, 0.0, 256.0), UsageError);
    CHECK_THROWS_AS(ssvep_snr(x, 50.0, 256.0), UsageError);  // 3rd harmonic past Nyquist
}

TEST_CASE("erp snr compares window energies") {
    const int t = 256;
    RowMat epoch = RowMat::Zero(1, t);
    for (int j = 100; j < 200; ++j) epoch(0, j) = 2.0;
    for (int j = 0; j < 100; ++j) epoch(0, j) = 0.5;
    std::vector<RowMat> epochs{epoch, epoch, epoch};
    const double db = erp_snr(epochs, {100, 200}, {0, 100});
    CHECK(db == doctest::Approx(10.0 * std::log10(16.0)).epsilon(1e-6));

    // identical windows: 0 dB
    CHECK(erp_snr(epochs, {0, 100}, {0, 100}) == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

    // averaging suppresses zero-mean noise, raising the ratio
    RngStream rng(9);
    std::vector<RowMat> noisy;
    for (int e = 0; e < 40; ++e) {
        RowMat m = epoch;
        for (int j = 0; j < t; ++j) m(0, j) += 3.0 * rng.normal();
        noisy.push_back(m);
    }
    const double db_avg = erp_snr(noisy, {100, 200}, {0, 100});
    RowMat single = noisy[0];
    const double db_one = erp_snr({single, single}, {100, 200}, {0, 100});
    CHECK(db_avg > db_one);
}

TEST_CASE("erp snr guards") {
    RowMat e = RowMat::Zero(1, 100);
    CHECK_THROWS_AS(erp_snr({e}, {0, 10}, {10, 20}), UsageError);
    RowMat other = RowMat::Zero(1, 50);
    CHECK_THROWS_AS(erp_snr({e, other}, {0, 10}, {10, 20}), UsageError);
    CHECK_THROWS_AS(erp_snr({e, e}, {0, 200}, {0, 10}), UsageError);
    CHECK_THROWS_AS(erp_snr({e, e}, {50, 40}, {0, 10}), UsageError);
}

TEST_CASE("component classifier recognizes its own source families") {
    const double fs = 256.0;
    const int n = 2048;
    const int c = 8;
    const SourceKind kinds[] = {SourceKind::eye,   SourceKind::muscle,
                                SourceKind::heart, SourceKind::channel_noise,
                                SourceKind::brain, SourceKind::other};
    int correct = 0, total = 0;
    for (int trial = 0; trial < 102; ++trial) {
        const SourceKind kind = kinds[trial % 6];
        RngStream rng(9000 + trial);
        Source src = kind == SourceKind::brain
                         ? synth_brain_source(n, fs, rng.sub("sig"))
                         : synth_artifact_source(kind, n, fs, rng.sub("sig"));
        Eigen::VectorXd topo;
        if (kind == SourceKind::channel_noise) {
            topo = Eigen::VectorXd::Zero(c);
            topo[static_cast<int>(rng.uniform_int(c))] = 1.0;
        } else {
            topo = smooth_topo(c, rng.uniform(0.0, 6.28));
        }
        const Classification cls = classify_component(src.samples, topo, fs);
        ++total;
        if (cls.label == kind) ++correct;
        CHECK(cls.score >= 0.0);
        CHECK(cls.score <= 1.0);
    }
    CHECK(total == 102);
    CHECK(correct >= 92);  // >= 90% agreement
}

TEST_CASE("classifier guards and degenerate input") {
    Eigen::VectorXd flat = Eigen::VectorXd::Zero(2048);
    Eigen::VectorXd topo = smooth_topo(8, 0.0);
    Classification cls = classify_component(flat, topo, 256.0);
    CHECK(cls.label == SourceKind::other);
    CHECK(cls.score == 0.0);
    CHECK_THROWS_AS(classify_component(flat, Eigen::VectorXd::Ones(1), 256.0), UsageError);
    CHECK_THROWS_AS(classify_component(Eigen::VectorXd::Zero(100), topo, 256.0), UsageError);
}

TEST_CASE("count_nonbrain separates contaminated from brain-only mixtures") {
    const double fs = 256.0;
    const int n = 4096;
    RngStream rng(31);

    // brain-only: three cortical sources over eight channels
    RowMat mix_brain = RowMat::Zero(8, n);
    {
        std::vector<SourceKind> labels(3, SourceKind::brain);
        RowMat a = make_mixing_matrix(8, labels, rng.sub("a1"));
        RowMat s(3, n);
        for (int i = 0; i < 3; ++i)
            s.row(i) = synth_brain_source(n, fs, rng.sub("b", i)).samples.transpose();
        mix_brain = a * s;
    }
    CHECK(count_nonbrain(mix_brain, fs, RngStream(77)) <= 1);

    // the same brain bed plus eye and muscle contamination
    RowMat mix_dirty = mix_brain;
    {
        std::vector<SourceKind> labels{SourceKind::eye, SourceKind::muscle};
        RowMat a = make_mixing_matrix(8, labels, rng.sub("a2"));
        RowMat s(2, n);
        s.row(0) =
            3.0 * synth_artifact_source(SourceKind::eye, n, fs, rng.sub("e")).samples.transpose();
        s.row(1) = 3.0 *
                   synth_artifact_source(SourceKind::muscle, n, fs, rng.sub("m")).samples.transpose();
        mix_dirty += a * s;
    }
    CHECK(count_nonbrain(mix_dirty, fs, RngStream(78)) >= 1);
    CHECK(count_nonbrain(mix_dirty, fs, RngStream(78)) >
          count_nonbrain(mix_brain, fs, RngStream(77)));
}

TEST_CASE("shoelace area on known polygons") {
    // unit square
    CHECK(shoelace_area({{0, 0}, {1, 0}, {1, 1}, {0, 1}}) == 1.0);
    // 3-4-5 right triangle
    CHECK(shoelace_area({{0, 0}, {4, 0}, {0, 3}}) == 6.0);
    // vertex order flipped: same magnitude
    CHECK(shoelace_area({{0, 3}, {4, 0}, {0, 0}}) == 6.0);
    // translation invariance
    CHECK(shoelace_area({{10, -5}, {14, -5}, {10, -2}}) == 6.0);
    // scaling doubles lengths, quadruples area
    CHECK(shoelace_area({{0, 0}, {8, 0}, {0, 6}}) == 24.0);
    CHECK_THROWS_AS(shoelace_area({{0, 0}, {1, 1}}), UsageError);
}

TEST_CASE("spider points spread axes evenly from angle zero") {
    std::vector<std::pair<double, double>> pts = spider_points({2.0, 1.0, 1.0, 1.0});
    REQUIRE(pts.size() == 4);
    CHECK(pts[0].first == doctest::Approx(2.0));
    CHECK(pts[0].second == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(pts[1].first == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(pts[1].second == doctest::Approx(1.0));
    CHECK(pts[2].first == doctest::Approx(-1.0));
    CHECK(pts[3].second == doctest::Approx(-1.0));

    // equal spokes of length r: regular n-gon, area n r^2 sin(2 pi / n) / 2
    const double area = shoelace_area(spider_points({1.5, 1.5, 1.5, 1.5}));
    CHECK(area == doctest::Approx(2.0 * 1.5 * 1.5).epsilon(1e-12));
    CHECK_THROWS_AS(spider_points({1.0, -0.5, 1.0}), UsageError);
}

TEST_CASE("csv writers emit the documented layouts") {
    const std::string dir = "eval_csv_tmp_";

    write_mse_csv(dir + "mse.csv", {0.25, 0.0625});
    CHECK(slurp(dir + "mse.csv") == "channel,value\n0,0.25\n1,0.0625\n");

    write_snr_csv(dir + "snr.csv", {{10.0, 3.5}});
    CHECK(slurp(dir + "snr.csv") == "stim_hz,snr_db\n10,3.5\n");

    write_components_csv(dir + "comp.csv", {{"val", "raw", 4}, {"val", "denoised", 1}});
    CHECK(slurp(dir + "comp.csv") == "dataset,method,count\nval,raw,4\nval,denoised,1\n");

    write_bci_csv(dir + "bci.csv", {0.5, 0.75});
    CHECK(slurp(dir + "bci.csv") == "run,accuracy\n0,0.5\n1,0.75\n");

    write_spider_csv(dir + "spider.csv", {1.0, 2.0, 3.0}, 4.5);
    CHECK(slurp(dir + "spider.csv") == "axis,value\n0,1\n1,2\n2,3\narea,4.5\n");

    // 17 significant digits survive the round trip
    write_mse_csv(dir + "prec.csv", {0.1234567890123456789});
    std::string text = slurp(dir + "prec.csv");
    const double back = std::stod(text.substr(text.find("0,") + 2));
    CHECK(back == 0.1234567890123456789);

    for (const char* f : {"mse.csv", "snr.csv", "comp.csv", "bci.csv", "spider.csv",
                          "prec.csv"})
        std::remove((dir + f).c_str());
}
