#include "modjoint/network.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>

#include "modjoint/rng.hpp"

namespace modjoint {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) out.push_back(field);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_double(const std::string& s, const std::string& file, int line_no, const char* what) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) pos++;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(file + ":" + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

long parse_long(const std::string& s, const std::string& file, int line_no, const char* what) {
    try {
        size_t pos = 0;
        long v = std::stol(s, &pos);
        while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) pos++;
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ValidationError(file + ":" + std::to_string(line_no) + ": bad " + what + " value '" + s + "'");
    }
}

}  // namespace

void RoadNetwork::add_node(NodeId id, double x, double y) {
    if (finalized_) throw Error("network already finalized");
    if (index_.count(id)) throw ValidationError("duplicate node id " + std::to_string(id));
    index_.emplace(id, static_cast<int>(ids_.size()));
    ids_.push_back(id);
    xs_.push_back(x);
    ys_.push_back(y);
}

void RoadNetwork::add_edge(NodeId src, NodeId dst, double travel_time_s, double length_m) {
    if (finalized_) throw Error("network already finalized");
    auto is = index_.find(src);
    auto id = index_.find(dst);
    if (is == index_.end() || id == index_.end())
        throw ValidationError("edge endpoint not in node set: " + std::to_string(src) + "->" + std::to_string(dst));
    if (!(travel_time_s > 0.0)) throw ValidationError("edge travel time must be > 0");
    if (length_m < 0.0) throw ValidationError("edge length must be >= 0");
    pending_edges_.push_back({is->second, id->second, travel_time_s, length_m});
}

void RoadNetwork::finalize() {
    if (finalized_) return;
    fwd_.assign(ids_.size(), {});
    rev_.assign(ids_.size(), {});
    for (const auto& e : pending_edges_) {
        fwd_[static_cast<size_t>(e.from)].push_back({e.to, e.seconds, e.meters});
        rev_[static_cast<size_t>(e.to)].push_back({e.from, e.seconds, e.meters});
    }
    pending_edges_.clear();
    pending_edges_.shrink_to_fit();
    finalized_ = true;
}

RoadNetwork RoadNetwork::from_csv(const std::string& node_path, const std::string& edge_path) {
    RoadNetwork net;
    {
        std::ifstream in(node_path);
        if (!in) throw ValidationError("cannot open node file " + node_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            line_no++;
            if (line_no == 1) {
                if (line.rfind("node_id", 0) != 0)
                    throw ValidationError(node_path + ":1: expected header 'node_id,x,y'");
                continue;
            }
            if (line.empty()) continue;
            auto f = split_csv_line(line);
            if (f.size() != 3) throw ValidationError(node_path + ":" + std::to_string(line_no) + ": expected 3 fields");
            net.add_node(static_cast<NodeId>(parse_long(f[0], node_path, line_no, "node_id")),
                         parse_double(f[1], node_path, line_no, "x"), parse_double(f[2], node_path, line_no, "y"));
        }
    }
    {
        std::ifstream in(edge_path);
        if (!in) throw ValidationError("cannot open edge file " + edge_path);
        std::string line;
        int line_no = 0;
        while (std::getline(in, line)) {
            line_no++;
            if (line_no == 1) {
                if (line.rfind("src", 0) != 0)
                    throw ValidationError(edge_path + ":1: expected header 'src,dst,travel_time_s,length_m'");
                continue;
            }
            if (line.empty()) continue;
            auto f = split_csv_line(line);
            if (f.size() != 4) throw ValidationError(edge_path + ":" + std::to_string(line_no) + ": expected 4 fields");
            try {
                net.add_edge(static_cast<NodeId>(parse_long(f[0], edge_path, line_no, "src")),
                             static_cast<NodeId>(parse_long(f[1], edge_path, line_no, "dst")),
                             parse_double(f[2], edge_path, line_no, "travel_time_s"),
                             parse_double(f[3], edge_path, line_no, "length_m"));
            } catch (const ValidationError& e) {
                throw ValidationError(edge_path + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
    }
    net.finalize();
    return net;
}

RoadNetwork RoadNetwork::grid(int rows, int cols, double spacing_m, double speed_mps) {
    if (rows < 1 || cols < 1) throw ValidationError("grid needs rows, cols >= 1");
    if (!(spacing_m > 0) || !(speed_mps > 0)) throw ValidationError("grid needs positive spacing and speed");
    RoadNetwork net;
    const double tt = spacing_m / speed_mps;
    for (int r = 0; r < rows; r++)
        for (int c = 0; c < cols; c++) net.add_node(r * cols + c, c * spacing_m, r * spacing_m);
    auto link = [&](NodeId a, NodeId b) {
        net.add_edge(a, b, tt, spacing_m);
        net.add_edge(b, a, tt, spacing_m);
    };
    for (int r = 0; r < rows; r++)
        for (int c = 0; c < cols; c++) {
            if (c + 1 < cols) link(r * cols + c, r * cols + c + 1);
            if (r + 1 < rows) link(r * cols + c, (r + 1) * cols + c);
        }
    net.finalize();
    return net;
}

std::pair<double, double> RoadNetwork::coords(NodeId id) const {
    int i = index_of(id);
    return {xs_[static_cast<size_t>(i)], ys_[static_cast<size_t>(i)]};
}

int RoadNetwork::index_of(NodeId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw ValidationError("unknown node id " + std::to_string(id));
    return it->second;
}

SsspTable RoadNetwork::run_dijkstra(int source, bool reversed) const {
    const auto& adj = reversed ? rev_ : fwd_;
    const size_t n = ids_.size();
    SsspTable t;
    t.seconds.assign(n, kInf);
    t.meters.assign(n, kInf);
    t.parent.assign(n, -1);
    using QEntry = std::pair<double, int>;
    std::priority_queue<QEntry, std::vector<QEntry>, std::greater<>> q;
    t.seconds[static_cast<size_t>(source)] = 0.0;
    t.meters[static_cast<size_t>(source)] = 0.0;
    q.emplace(0.0, source);
    while (!q.empty()) {
        auto [d, u] = q.top();
        q.pop();
        if (d > t.seconds[static_cast<size_t>(u)]) continue;
        for (const Arc& a : adj[static_cast<size_t>(u)]) {
            double nd = d + a.seconds;
            if (nd < t.seconds[static_cast<size_t>(a.to)]) {
                t.seconds[static_cast<size_t>(a.to)] = nd;
                t.meters[static_cast<size_t>(a.to)] = t.meters[static_cast<size_t>(u)] + a.meters;
                t.parent[static_cast<size_t>(a.to)] = u;
                q.emplace(nd, a.to);
            }
        }
    }
    return t;
}

std::shared_ptr<const SsspTable> RoadNetwork::sssp_from(NodeId origin) const {
    int i = index_of(origin);
    {
        std::lock_guard<std::mutex> lock(cache_->mutex);
        auto it = cache_->fwd.find(i);
        if (it != cache_->fwd.end()) return it->second;
    }
    auto table = std::make_shared<const SsspTable>(run_dijkstra(i, false));
    std::lock_guard<std::mutex> lock(cache_->mutex);
    if (cache_->fwd.size() > 20000) cache_->fwd.clear();
    auto [it, inserted] = cache_->fwd.emplace(i, table);
    return it->second;
}

std::shared_ptr<const SsspTable> RoadNetwork::sssp_to(NodeId dest) const {
    int i = index_of(dest);
    {
        std::lock_guard<std::mutex> lock(cache_->mutex);
        auto it = cache_->rev.find(i);
        if (it != cache_->rev.end()) return it->second;
    }
    auto table = std::make_shared<const SsspTable>(run_dijkstra(i, true));
    std::lock_guard<std::mutex> lock(cache_->mutex);
    if (cache_->rev.size() > 20000) cache_->rev.clear();
    auto [it, inserted] = cache_->rev.emplace(i, table);
    return it->second;
}

double RoadNetwork::shortest_travel_time(NodeId origin, NodeId dest) const {
    return shortest_path_cost(origin, dest).seconds;
}

PathCost RoadNetwork::shortest_path_cost(NodeId origin, NodeId dest) const {
    auto t = sssp_from(origin);
    int j = index_of(dest);
    double s = t->seconds[static_cast<size_t>(j)];
    if (!(s < kInf))
        throw NoPathError("no path from " + std::to_string(origin) + " to " + std::to_string(dest));
    return {s, t->meters[static_cast<size_t>(j)]};
}

std::vector<NodeId> RoadNetwork::shortest_path_nodes(NodeId origin, NodeId dest) const {
    auto t = sssp_from(origin);
    int j = index_of(dest);
    if (!(t->seconds[static_cast<size_t>(j)] < kInf))
        throw NoPathError("no path from " + std::to_string(origin) + " to " + std::to_string(dest));
    std::vector<NodeId> path;
    for (int u = j; u != -1; u = t->parent[static_cast<size_t>(u)]) path.push_back(ids_[static_cast<size_t>(u)]);
    std::reverse(path.begin(), path.end());
    return path;
}

void RoadNetwork::validate_strongly_connected(const std::vector<NodeId>& used) const {
    if (used.empty()) return;
    auto fwd = sssp_from(used.front());
    auto rev = sssp_to(used.front());
    for (NodeId id : used) {
        int i = index_of(id);
        if (!(fwd->seconds[static_cast<size_t>(i)] < kInf) || !(rev->seconds[static_cast<size_t>(i)] < kInf))
            throw ValidationError("network not strongly connected over demand nodes (node " + std::to_string(id) + ")");
    }
}

ClusterId ClusterMap::cluster_of(NodeId node) const {
    auto it = assignment.find(node);
    if (it == assignment.end()) throw ValidationError("node " + std::to_string(node) + " not in cluster map");
    return it->second;
}

ClusterMap kmeans_cluster(const RoadNetwork& net, int k, std::uint64_t seed) {
    const int n = net.node_count();
    if (k <= 0 || k > n) throw ValidationError("kmeans: K must be in [1, node_count]");

    std::vector<double> xs(static_cast<size_t>(n)), ys(static_cast<size_t>(n));
    for (int i = 0; i < n; i++) {
        auto [x, y] = net.coords(net.id_of(i));
        xs[static_cast<size_t>(i)] = x;
        ys[static_cast<size_t>(i)] = y;
    }
    auto sqdist = [&](int i, double cx, double cy) {
        double dx = xs[static_cast<size_t>(i)] - cx;
        double dy = ys[static_cast<size_t>(i)] - cy;
        return dx * dx + dy * dy;
    };

    // k-means++ seeding
    Rng rng(seed, "kmeans");
    std::vector<double> cx(static_cast<size_t>(k)), cy(static_cast<size_t>(k));
    std::vector<double> d2(static_cast<size_t>(n), 0.0);
    int first = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    cx[0] = xs[static_cast<size_t>(first)];
    cy[0] = ys[static_cast<size_t>(first)];
    for (int c = 1; c < k; c++) {
        double total = 0.0;
        for (int i = 0; i < n; i++) {
            double best = sqdist(i, cx[0], cy[0]);
            for (int j = 1; j < c; j++) best = std::min(best, sqdist(i, cx[static_cast<size_t>(j)], cy[static_cast<size_t>(j)]));
            d2[static_cast<size_t>(i)] = best;
            total += best;
        }
        int pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            for (int i = 0; i < n; i++) {
                acc += d2[static_cast<size_t>(i)];
                if (acc >= r) {
                    pick = i;
                    break;
                }
                pick = i;
            }
        } else {
            pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
        }
        cx[static_cast<size_t>(c)] = xs[static_cast<size_t>(pick)];
        cy[static_cast<size_t>(c)] = ys[static_cast<size_t>(pick)];
    }

    std::vector<int> assign(static_cast<size_t>(n), -1);
    constexpr int kMaxIters = 100;
    for (int iter = 0; iter < kMaxIters; iter++) {
        bool changed = false;
        for (int i = 0; i < n; i++) {
            int best = 0;
            double bd = sqdist(i, cx[0], cy[0]);
            for (int c = 1; c < k; c++) {
                double d = sqdist(i, cx[static_cast<size_t>(c)], cy[static_cast<size_t>(c)]);
                if (d < bd) {
                    bd = d;
                    best = c;
                }
            }
            if (assign[static_cast<size_t>(i)] != best) {
                assign[static_cast<size_t>(i)] = best;
                changed = true;
            }
        }
        // re-seed empty clusters with the point farthest from its centroid
        std::vector<int> counts(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; i++) counts[static_cast<size_t>(assign[static_cast<size_t>(i)])]++;
        for (int c = 0; c < k; c++) {
            if (counts[static_cast<size_t>(c)] > 0) continue;
            int far = -1;
            double fd = -1.0;
            for (int i = 0; i < n; i++) {
                int a = assign[static_cast<size_t>(i)];
                if (counts[static_cast<size_t>(a)] <= 1) continue;
                double d = sqdist(i, cx[static_cast<size_t>(a)], cy[static_cast<size_t>(a)]);
                if (d > fd) {
                    fd = d;
                    far = i;
                }
            }
            if (far < 0) throw CalibrationError("kmeans: cannot fill empty cluster");
            counts[static_cast<size_t>(assign[static_cast<size_t>(far)])]--;
            assign[static_cast<size_t>(far)] = c;
            counts[static_cast<size_t>(c)] = 1;
            changed = true;
        }
        if (!changed && iter > 0) break;
        std::vector<double> sx(static_cast<size_t>(k), 0.0), sy(static_cast<size_t>(k), 0.0);
        std::vector<int> cnt(static_cast<size_t>(k), 0);
        for (int i = 0; i < n; i++) {
            int a = assign[static_cast<size_t>(i)];
            sx[static_cast<size_t>(a)] += xs[static_cast<size_t>(i)];
            sy[static_cast<size_t>(a)] += ys[static_cast<size_t>(i)];
            cnt[static_cast<size_t>(a)]++;
        }
        for (int c = 0; c < k; c++) {
            cx[static_cast<size_t>(c)] = sx[static_cast<size_t>(c)] / cnt[static_cast<size_t>(c)];
            cy[static_cast<size_t>(c)] = sy[static_cast<size_t>(c)] / cnt[static_cast<size_t>(c)];
        }
        if (!changed) break;
    }

    ClusterMap cm;
    cm.k = k;
    cm.centroids.resize(static_cast<size_t>(k));
    cm.medoids.assign(static_cast<size_t>(k), -1);
    std::vector<double> med_d(static_cast<size_t>(k), kInf);
    for (int c = 0; c < k; c++) cm.centroids[static_cast<size_t>(c)] = {cx[static_cast<size_t>(c)], cy[static_cast<size_t>(c)]};
    for (int i = 0; i < n; i++) {
        int a = assign[static_cast<size_t>(i)];
        cm.assignment.emplace(net.id_of(i), a);
        double d = sqdist(i, cx[static_cast<size_t>(a)], cy[static_cast<size_t>(a)]);
        if (d < med_d[static_cast<size_t>(a)]) {
            med_d[static_cast<size_t>(a)] = d;
            cm.medoids[static_cast<size_t>(a)] = net.id_of(i);
        }
    }
    return cm;
}

ClusterTimes::ClusterTimes(const RoadNetwork& net, const ClusterMap& clusters) : k_(clusters.k) {
    table_.assign(static_cast<size_t>(k_) * static_cast<size_t>(k_), 0.0);
    for (int a = 0; a < k_; a++) {
        auto t = net.sssp_from(clusters.medoids[static_cast<size_t>(a)]);
        for (int b = 0; b < k_; b++) {
            int j = net.index_of(clusters.medoids[static_cast<size_t>(b)]);
            table_[static_cast<size_t>(a) * static_cast<size_t>(k_) + static_cast<size_t>(b)] =
                t->seconds[static_cast<size_t>(j)];
        }
    }
}

double ClusterTimes::seconds(ClusterId from, ClusterId to) const {
    if (from < 0 || from >= k_ || to < 0 || to >= k_) throw ValidationError("cluster index out of range");
    return table_[static_cast<size_t>(from) * static_cast<size_t>(k_) + static_cast<size_t>(to)];
}

}  // namespace modjoint
