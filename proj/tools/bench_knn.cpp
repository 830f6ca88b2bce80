// Timing comparison of the neighbor-query kernels: the serial full-sort
// reference, the OpenMP brute-force scan, and the kd-tree. Run with an
// optional point count, e.g. `bench_knn 20000`.

#include <cstdio>
#include <cstdlib>
#include <vector>

#include <omp.h>

#include "deepknn/knn.hpp"
#include "deepknn/knn_reference.hpp"
#include "deepknn/rng.hpp"

using namespace deepknn;

namespace {

Matrix random_points(std::size_t n, std::size_t d, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m(n, d);
    for (double& v : m.data) v = rng.normal();
    return m;
}

double time_once(const char* label, std::size_t checksum, double t0, double t1) {
    double ms = (t1 - t0) * 1e3;
    std::printf("    %-22s %9.2f ms   (checksum %zu)\n", label, ms, checksum);
    return ms;
}

void bench_queries(std::size_t n, std::size_t d, std::size_t q, std::size_t k) {
    std::printf("  %zu points, dim %zu, %zu queries, k=%zu\n", n, d, q, k);
    Matrix pts = random_points(n, d, 1);
    std::vector<int> labels(n);
    Rng rng(2);
    for (int& l : labels) l = static_cast<int>(rng.uniform_int(5));
    Matrix queries = random_points(q, d, 3);

    std::size_t serial_sum = 0;
    double t0 = omp_get_wtime();
    for (std::size_t i = 0; i < q; ++i)
        serial_sum += reference::knn_query(pts, labels, 5, queries.row(i), k).prediction;
    double serial_ms = time_once("serial reference", serial_sum, t0, omp_get_wtime());

    KnnIndex brute(pts, labels, 5, KnnBackend::BruteForce);
    t0 = omp_get_wtime();
    auto rb = brute.query_batch(queries, k);
    std::size_t brute_sum = 0;
    for (const auto& r : rb) brute_sum += r.prediction;
    double brute_ms = time_once("brute force (omp)", brute_sum, t0, omp_get_wtime());

    double build0 = omp_get_wtime();
    KnnIndex tree(pts, labels, 5, KnnBackend::KdTree);
    double build_ms = (omp_get_wtime() - build0) * 1e3;
    t0 = omp_get_wtime();
    auto rt = tree.query_batch(queries, k);
    std::size_t tree_sum = 0;
    for (const auto& r : rt) tree_sum += r.prediction;
    double tree_ms = time_once("kd-tree (omp)", tree_sum, t0, omp_get_wtime());
    std::printf("    %-22s %9.2f ms\n", "kd-tree build", build_ms);

    if (serial_sum != brute_sum || serial_sum != tree_sum)
        std::printf("    WARNING: kernel disagreement\n");
    std::printf("    speedup vs serial: brute %.1fx, kd-tree %.1fx\n\n",
                serial_ms / brute_ms, serial_ms / tree_ms);
}

void bench_pairwise(std::size_t n, std::size_t d) {
    std::printf("  min pairwise distance, %zu points, dim %zu\n", n, d);
    Matrix pts = random_points(n, d, 7);
    double t0 = omp_get_wtime();
    double serial = reference::min_pairwise_distance(pts);
    double serial_ms = (omp_get_wtime() - t0) * 1e3;
    t0 = omp_get_wtime();
    double parallel = min_pairwise_distance(pts);
    double par_ms = (omp_get_wtime() - t0) * 1e3;
    std::printf("    serial %9.2f ms, omp %9.2f ms, speedup %.1fx%s\n\n", serial_ms,
                par_ms, serial_ms / par_ms, serial == parallel ? "" : "  MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
    std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 20000;
    std::printf("kernel benchmark (%d threads)\n\n", omp_get_max_threads());
    bench_queries(n, 2, 2000, 10);
    bench_queries(n, 10, 2000, 50);
    bench_pairwise(n / 2, 3);
    return 0;
}
