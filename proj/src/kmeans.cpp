#include "cghair/kmeans.h"

#include <algorithm>
#include <limits>

#include "cghair/binary_io.h"
#include "cghair/error.h"
#include "cghair/parallel.h"
#include "cghair/random.h"

namespace cghair {
namespace {

double squared_distance(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
    return (a.col(i) - b.col(j)).squaredNorm();
}

Eigen::MatrixXd seed_plus_plus(const Eigen::MatrixXd& x, std::size_t k, Rng& rng) {
    const Eigen::Index n = x.cols();
    Eigen::MatrixXd c(x.rows(), static_cast<Eigen::Index>(k));
    c.col(0) = x.col(static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) d2[i] = squared_distance(x, i, c, 0);

    for (std::size_t j = 1; j < k; ++j) {
        double total = 0.0;
        for (double d : d2) total += d;
        Eigen::Index pick = n - 1;
        if (total > 0.0) {
            const double r = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += d2[i];
                if (d2[i] > 0.0 && acc > r) {
                    pick = i;
                    break;
                }
            }
            while (d2[pick] == 0.0 && pick > 0) --pick;  // guard against round-off at the tail
        } else {
            pick = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
        }
        c.col(static_cast<Eigen::Index>(j)) = x.col(pick);
        for (Eigen::Index i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], squared_distance(x, i, c, static_cast<Eigen::Index>(j)));
    }
    return c;
}

void assign_all(const Eigen::MatrixXd& x, const Eigen::MatrixXd& c, std::vector<std::uint32_t>& assign,
                std::vector<double>& dist, int threads) {
    const Eigen::Index k = c.cols();
    parallel_for(static_cast<std::size_t>(x.cols()), threads, [&](std::size_t i) {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (Eigen::Index j = 0; j < k; ++j) {
            const double d = squared_distance(x, static_cast<Eigen::Index>(i), c, j);
            if (d < best) {
                best = d;
                arg = static_cast<std::uint32_t>(j);
            }
        }
        assign[i] = arg;
        dist[i] = best;
    });
}

// Moves the farthest sample of a multi-member cluster into each empty one.
void repair_empty(const Eigen::MatrixXd& x, Eigen::MatrixXd& c, std::vector<std::uint32_t>& assign,
                  std::vector<double>& dist) {
    const auto k = static_cast<std::size_t>(c.cols());
    std::vector<std::size_t> counts(k, 0);
    for (auto a : assign) ++counts[a];
    for (std::size_t j = 0; j < k; ++j) {
        if (counts[j] != 0) continue;
        std::size_t far = assign.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < assign.size(); ++i)
            if (counts[assign[i]] > 1 && dist[i] > far_d) {
                far_d = dist[i];
                far = i;
            }
        if (far == assign.size()) break;
        --counts[assign[far]];
        ++counts[j];
        assign[far] = static_cast<std::uint32_t>(j);
        dist[far] = 0.0;
        c.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(far));
    }
}

double sum(const std::vector<double>& v) {
    double s = 0.0;
    for (double d : v) s += d;
    return s;
}

}  // namespace

KMeansResult kmeans(const Eigen::MatrixXd& samples, const KMeansOptions& opts) {
    const auto n = static_cast<std::size_t>(samples.cols());
    if (n == 0 || samples.rows() == 0) throw Error(ErrorCode::EmptyInput, "no samples");
    if (opts.k < 1) throw Error(ErrorCode::InvalidArgument, "k must be >= 1");
    if (opts.k > n)
        throw Error(ErrorCode::KTooLarge, "k=" + std::to_string(opts.k) + " exceeds " + std::to_string(n) + " samples");
    if (!samples.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite sample");

    Rng rng(opts.seed);
    KMeansResult r;
    r.centroids = seed_plus_plus(samples, opts.k, rng);
    r.assignments.assign(n, 0);
    std::vector<double> dist(n, 0.0);

    for (;;) {
        assign_all(samples, r.centroids, r.assignments, dist, opts.threads);
        repair_empty(samples, r.centroids, r.assignments, dist);
        r.inertia_history.push_back(sum(dist));
        if (r.iterations >= opts.max_iter) break;

        // Ordered reduction keeps the update independent of the worker count.
        Eigen::MatrixXd next = Eigen::MatrixXd::Zero(samples.rows(), r.centroids.cols());
        std::vector<std::size_t> counts(opts.k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            next.col(r.assignments[i]) += samples.col(static_cast<Eigen::Index>(i));
            ++counts[r.assignments[i]];
        }
        double shift = 0.0;
        for (std::size_t j = 0; j < opts.k; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            if (counts[j] == 0) {
                next.col(jj) = r.centroids.col(jj);
                continue;
            }
            next.col(jj) /= static_cast<double>(counts[j]);
            shift = std::max(shift, (next.col(jj) - r.centroids.col(jj)).norm());
        }
        r.centroids = std::move(next);
        ++r.iterations;
        if (shift < opts.tol) {
            assign_all(samples, r.centroids, r.assignments, dist, opts.threads);
            repair_empty(samples, r.centroids, r.assignments, dist);
            r.inertia_history.push_back(sum(dist));
            break;
        }
    }
    r.inertia = r.inertia_history.back();
    return r;
}

Eigen::VectorXd strand_feature(const Strand& s, std::size_t expected_points) {
    if (s.points.size() != expected_points)
        throw Error(ErrorCode::WrongPointCount, "strand has " + std::to_string(s.points.size()) +
                                                    " points, expected " + std::to_string(expected_points));
    Eigen::VectorXd f(static_cast<Eigen::Index>(3 * s.points.size()));
    for (std::size_t i = 0; i < s.points.size(); ++i) f.segment<3>(static_cast<Eigen::Index>(3 * i)) = s.points[i];
    return f;
}

std::vector<StrandCluster> cluster_strands(const Hairstyle& h, std::size_t n_c, std::uint64_t seed,
                                           std::size_t max_iter, int threads) {
    if (h.strands.empty()) throw Error(ErrorCode::EmptyInput, "hairstyle has no strands");
    const std::size_t l = h.strands.front().points.size();
    Eigen::MatrixXd x(static_cast<Eigen::Index>(3 * l), static_cast<Eigen::Index>(h.strands.size()));
    for (std::size_t i = 0; i < h.strands.size(); ++i)
        x.col(static_cast<Eigen::Index>(i)) = strand_feature(h.strands[i], l);

    KMeansOptions opts;
    opts.k = n_c;
    opts.seed = seed;
    opts.max_iter = max_iter;
    opts.threads = threads;
    const KMeansResult km = kmeans(x, opts);

    std::vector<StrandCluster> clusters(n_c);
    for (std::size_t j = 0; j < n_c; ++j) clusters[j].id = static_cast<std::uint32_t>(j);
    for (std::size_t i = 0; i < km.assignments.size(); ++i)
        clusters[km.assignments[i]].members.push_back(static_cast<std::uint32_t>(i));

    for (auto& c : clusters) {
        c.guide.points.assign(l, Vec3::Zero());
        if (c.members.empty()) {
            for (std::size_t p = 0; p < l; ++p)
                c.guide.points[p] = km.centroids.col(c.id).segment<3>(static_cast<Eigen::Index>(3 * p));
            continue;
        }
        for (auto m : c.members)
            for (std::size_t p = 0; p < l; ++p) c.guide.points[p] += h.strands[m].points[p];
        for (auto& p : c.guide.points) p /= static_cast<double>(c.members.size());
    }
    return clusters;
}

std::vector<std::uint32_t> cluster_assignments(std::span<const StrandCluster> clusters, std::size_t n_items) {
    std::vector<std::uint32_t> out(n_items, 0);
    for (const auto& c : clusters)
        for (auto m : c.members) out.at(m) = c.id;
    return out;
}

std::vector<std::uint8_t> write_index_file(std::span<const std::uint32_t> assignments, std::uint32_t groups) {
    ByteWriter out;
    out.magic("CGHI");
    out.u32(static_cast<std::uint32_t>(assignments.size()));
    out.u32(groups);
    for (auto a : assignments) out.u32(a);
    return out.take();
}

std::vector<std::uint32_t> parse_index_file(std::span<const std::uint8_t> bytes, std::uint32_t* groups) {
    ByteReader in(bytes);
    in.expect_magic("CGHI");
    const std::uint32_t n = in.u32();
    const std::uint32_t g = in.u32();
    if (in.remaining() != std::size_t{n} * 4)
        throw Error(ErrorCode::InconsistentCounts, "index file size does not match its count");
    std::vector<std::uint32_t> out(n);
    for (auto& a : out) {
        a = in.u32();
        if (a >= g) throw Error(ErrorCode::InconsistentCounts, "index exceeds group count");
    }
    if (groups) *groups = g;
    return out;
}

}  // namespace cghair
