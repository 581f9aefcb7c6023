#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cghair/types.h"

namespace cghair {

struct KMeansOptions {
    std::size_t k = 1;
    std::uint64_t seed = 0;
    std::size_t max_iter = 100;
    double tol = 1e-10;
    int threads = 1;
};

struct KMeansResult {
    std::vector<std::uint32_t> assignments;
    Eigen::MatrixXd centroids;  // dim x k
    double inertia = 0.0;
    std::size_t iterations = 0;
    // Inertia after every assignment step, in order; non-increasing.
    std::vector<double> inertia_history;
};

// Lloyd iterations with k-means++ seeding. `samples` holds one sample per
// column. Ties go to the lowest centroid index; empty clusters are refilled
// with the sample farthest from its centroid.
KMeansResult kmeans(const Eigen::MatrixXd& samples, const KMeansOptions& opts);

Eigen::VectorXd strand_feature(const Strand& s, std::size_t expected_points = 100);

struct StrandCluster {
    std::uint32_t id = 0;
    std::vector<std::uint32_t> members;  // strand indices, ascending
    Strand guide;                        // member mean, reshaped to points
};

std::vector<StrandCluster> cluster_strands(const Hairstyle& h, std::size_t n_c, std::uint64_t seed,
                                           std::size_t max_iter = 100, int threads = 1);

// strand -> cluster table from a cluster list.
std::vector<std::uint32_t> cluster_assignments(std::span<const StrandCluster> clusters, std::size_t n_items);

// Index files: 'CGHI', u32 item count, u32 group count, u32 group per item.
std::vector<std::uint8_t> write_index_file(std::span<const std::uint32_t> assignments, std::uint32_t groups);
std::vector<std::uint32_t> parse_index_file(std::span<const std::uint8_t> bytes, std::uint32_t* groups = nullptr);

}  // namespace cghair
