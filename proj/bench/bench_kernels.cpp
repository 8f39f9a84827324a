// Serial reference vs OpenMP kernels: matmul, predict_all, batch_gradient.
//
//   bench_kernels [--reps N] [--samples N] [--hidden H]

#include "deepdeff/data.hpp"
#include "deepdeff/model.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

using namespace deepdeff;

namespace {

double median_seconds(std::size_t reps, const std::function<void()>& fn)
{
    std::vector<double> times;
    for (std::size_t i = 0; i < reps; ++i) {
        const auto start = std::chrono::steady_clock::now();
        fn();
        times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    }
    std::sort(times.begin(), times.end());
    return times[times.size() / 2];
}

void report(const char* name, double serial, double parallel, bool identical)
{
    std::printf("%-28s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n", name, serial * 1e3,
                parallel * 1e3, serial / parallel, identical ? "bitwise equal" : "MISMATCH");
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Benchmark the parallel kernels against their serial references"};
    std::size_t reps = 5;
    std::size_t sample_count = 512;
    std::size_t hidden = 20;
    app.add_option("--reps", reps, "Repetitions per measurement (median reported)")->check(CLI::PositiveNumber);
    app.add_option("--samples", sample_count, "Samples per batch")->check(CLI::PositiveNumber);
    app.add_option("--hidden", hidden, "Recurrent units per direction")->check(CLI::PositiveNumber);
    CLI11_PARSE(app, argc, argv);

    std::printf("threads: %d\n", omp_get_max_threads());

    Rng rng(1);
    {
        Matrix a = glorot_uniform(256, 256, rng);
        Matrix b = glorot_uniform(256, 256, rng);
        Matrix x, y;
        const double s = median_seconds(reps, [&] { x = matmul_reference(a, b); });
        const double p = median_seconds(reps, [&] { y = matmul(a, b); });
        report("matmul 256x256", s, p, x == y);
    }

    SyntheticSpec spec;
    spec.days = 30;
    const auto series = synthetic_series(spec, rng);
    auto samples = build_samples(series, 2);
    samples.resize(std::min(samples.size(), sample_count));

    for (const auto& method : {Method{CellKind::Gru, true}, Method{CellKind::Lstm, true}}) {
        ModelSpec ms;
        ms.method = method;
        ms.timesteps = 2;
        ms.hidden = hidden;
        const auto model = build_deepdeff(ms, rng);

        std::vector<double> ps, pp;
        const double s = median_seconds(reps, [&] { ps = predict_all_serial(model, samples); });
        const double p = median_seconds(reps, [&] { pp = predict_all(model, samples); });
        report(("predict_all " + method.label()).c_str(), s, p, ps == pp);

        std::vector<const Sample*> batch;
        std::vector<DropoutMasks> masks;
        for (const auto& smp : samples) {
            batch.push_back(&smp);
            masks.push_back(draw_dropout_masks(model, 0.2, rng));
        }
        BatchGradient gs, gp;
        const double bs = median_seconds(reps, [&] { gs = batch_gradient_serial(model, batch, masks, LossKind::Mape); });
        const double bp = median_seconds(reps, [&] { gp = batch_gradient(model, batch, masks, LossKind::Mape); });
        report(("batch_gradient " + method.label()).c_str(), bs, bp, gs.grad == gp.grad && gs.loss == gp.loss);
    }
    return 0;
}
