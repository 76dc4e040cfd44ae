#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "modjoint/common.hpp"

namespace modjoint {

struct PathCost {
    double seconds = 0.0;
    double meters = 0.0;
};

// Single-source shortest-path result over the dense node indexing.
struct SsspTable {
    std::vector<double> seconds;  // +inf when unreachable
    std::vector<double> meters;
    std::vector<int> parent;  // dense index of predecessor, -1 for source/unreached
};

/// Directed road network with travel times (s) and lengths (m) on edges.
/// Immutable after finalize(); all queries are const and thread-safe.
class RoadNetwork {
   public:
    void add_node(NodeId id, double x, double y);
    void add_edge(NodeId src, NodeId dst, double travel_time_s, double length_m);
    void finalize();

    static RoadNetwork from_csv(const std::string& node_path, const std::string& edge_path);
    // Synthetic rows x cols lattice with bidirectional edges; spacing in
    // meters, constant speed in m/s.
    static RoadNetwork grid(int rows, int cols, double spacing_m, double speed_mps);

    int node_count() const { return static_cast<int>(ids_.size()); }
    bool has_node(NodeId id) const { return index_.count(id) > 0; }
    const std::vector<NodeId>& node_ids() const { return ids_; }
    std::pair<double, double> coords(NodeId id) const;
    int index_of(NodeId id) const;
    NodeId id_of(int index) const { return ids_.at(static_cast<size_t>(index)); }

    double shortest_travel_time(NodeId origin, NodeId dest) const;
    PathCost shortest_path_cost(NodeId origin, NodeId dest) const;
    std::vector<NodeId> shortest_path_nodes(NodeId origin, NodeId dest) const;

    // Cached single-source tables; "to" runs on the reversed graph, giving
    // travel times from every node into `dest` with one query.
    std::shared_ptr<const SsspTable> sssp_from(NodeId origin) const;
    std::shared_ptr<const SsspTable> sssp_to(NodeId dest) const;

    // Every listed node must reach every other one (vehicles must be able to
    // chain any dropoff to any pickup). Throws ValidationError otherwise.
    void validate_strongly_connected(const std::vector<NodeId>& used) const;

   private:
    struct Arc {
        int to;
        double seconds;
        double meters;
    };
    struct PendingEdge {
        int from;
        int to;
        double seconds;
        double meters;
    };

    SsspTable run_dijkstra(int source, bool reversed) const;

    bool finalized_ = false;
    std::vector<PendingEdge> pending_edges_;
    std::vector<NodeId> ids_;
    std::vector<double> xs_, ys_;
    std::unordered_map<NodeId, int> index_;
    std::vector<std::vector<Arc>> fwd_, rev_;

    // synchronized memoized single-source tables, capped to bound memory
    struct Cache {
        std::mutex mutex;
        std::unordered_map<int, std::shared_ptr<const SsspTable>> fwd, rev;
    };
    mutable std::unique_ptr<Cache> cache_ = std::make_unique<Cache>();
};

/// Node -> cluster assignment produced by kmeans_cluster. Medoid is the
/// member node nearest the centroid, used for cluster-level travel times.
struct ClusterMap {
    int k = 0;
    std::unordered_map<NodeId, ClusterId> assignment;
    std::vector<std::pair<double, double>> centroids;
    std::vector<NodeId> medoids;

    ClusterId cluster_of(NodeId node) const;
};

/// Lloyd's algorithm with k-means++ seeding on node coordinates.
/// Deterministic for a fixed seed; iteration cap 100.
ClusterMap kmeans_cluster(const RoadNetwork& net, int k, std::uint64_t seed);

/// All-pairs travel times between cluster medoids, precomputed once.
class ClusterTimes {
   public:
    ClusterTimes() = default;
    ClusterTimes(const RoadNetwork& net, const ClusterMap& clusters);
    double seconds(ClusterId from, ClusterId to) const;
    int k() const { return k_; }

   private:
    int k_ = 0;
    std::vector<double> table_;
};

}  // namespace modjoint
