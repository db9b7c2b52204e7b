// SPDX-License-Identifier: Apache-2.0
#include <citynav/error.hpp>
#include <citynav/rng.hpp>
#include <citynav/sampler.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

namespace citynav::sampler
{

using graph::NavGraph;
using graph::NodeIndex;

void SamplerConfig::validate() const
{
    if (!(d_target > 0.0))
        fail(ErrorCode::InvalidArgument, "d_target must be positive");
    if (!(t_min > 0.0) || !(t_max > 0.0) || t_min > t_max)
        fail(ErrorCode::InvalidArgument, "temperatures must satisfy 0 < t_min <= t_max");
    if (!(gamma > 0.0 && gamma < 1.0))
        fail(ErrorCode::InvalidArgument, "gamma must lie in (0, 1)");
    if (d_min_final < 1)
        fail(ErrorCode::InvalidArgument, "d_min_final must be at least 1");
    if (max_extra_steps < 0)
        fail(ErrorCode::InvalidArgument, "max_extra_steps must be non-negative");
}

CandidateDistribution candidate_distribution(std::span<const Candidate> candidates, double temperature, double gamma)
{
    if (candidates.empty())
        fail(ErrorCode::InvalidArgument, "candidate_distribution needs at least one candidate");
    if (!(temperature > 0.0))
        fail(ErrorCode::InvalidArgument, "temperature must be positive");

    constexpr double kDegToRad = std::numbers::pi / 180.0;
    CandidateDistribution out;
    out.weights.reserve(candidates.size());
    double total = 0.0;
    for (const auto& c: candidates)
    {
        const double w = std::exp(std::cos(c.theta_deg * kDegToRad) / temperature) * std::pow(gamma, c.visits);
        out.weights.push_back(w);
        total += w;
    }

    const auto n = candidates.size();
    if (total == 0.0)
    {
        out.uniform_fallback = true;
        out.probabilities.assign(n, 1.0 / static_cast<double>(n));
        return out;
    }

    if (!std::isfinite(total))
    {
        // Very small temperatures overflow exp(); normalize in log space instead.
        std::vector<double> logw;
        logw.reserve(n);
        for (const auto& c: candidates)
            logw.push_back(std::cos(c.theta_deg * kDegToRad) / temperature + c.visits * std::log(gamma));
        const double peak = *std::max_element(logw.begin(), logw.end());
        double sum = 0.0;
        for (double& v: logw)
        {
            v = std::exp(v - peak);
            sum += v;
        }
        for (const double v: logw)
            out.probabilities.push_back(v / sum);
        return out;
    }

    for (const double w: out.weights)
        out.probabilities.push_back(w / total);
    return out;
}

double anneal_temperature(double d_from_seed, const SamplerConfig& cfg)
{
    if (d_from_seed < 0.0)
        fail(ErrorCode::InvalidArgument, "distance must be non-negative");
    const double remaining = std::max(0.0, 1.0 - d_from_seed / cfg.d_target);
    return cfg.t_min + (cfg.t_max - cfg.t_min) * remaining;
}

namespace
{

constexpr NodeIndex kNone = std::numeric_limits<NodeIndex>::max();

class Crawler
{
  public:
    Crawler(const NavGraph& g, NodeIndex seed, const SamplerConfig& cfg):
        _g(g), _seed(seed), _cfg(cfg), _rng(cfg.rng_seed), _visits(g.node_count(), 0),
        _untried(g.node_count()), _initialized(g.node_count(), false)
    {
        // Drawn unconditionally so the random stream does not depend on the seed's shape.
        _seedHeading = _rng.uniform() * 360.0;
        _cur = seed;
        _visits[seed] = 1;
        _walk.push_back({g.id(seed), false});
    }

    double radial(NodeIndex v) const { return geo::haversine_distance(_g.point(_seed), _g.point(v)); }
    bool reached(NodeIndex v) const { return radial(v) >= _cfg.d_target; }
    NodeIndex current() const { return _cur; }
    bool lastWasMove() const { return _lastMove; }

    /// Follows nodes with exactly one onward neighbor. Returns true if the
    /// target radius was reached along the way.
    bool followCorridor()
    {
        while (true)
        {
            const auto onward = candidates();
            if (onward.size() != 1 || _visits[onward.front()] > 0)
                return false;
            moveTo(onward.front());
            if (reached(_cur))
                return true;
        }
    }

    /// One depth-first move or backtrack. Returns false once the junction stack is exhausted.
    bool advance()
    {
        auto cands = candidates();
        if (cands.empty())
        {
            while (!_stack.empty() && untried(_stack.back()).empty())
                _stack.pop_back();
            if (_stack.empty())
                return false;
            _cur = _stack.back();
            _prev = kNone;
            _lastMove = false;
            _walk.push_back({_g.id(_cur), true});
            return true;
        }

        NodeIndex next = cands.front();
        if (cands.size() > 1)
            next = sample(cands);

        const NodeIndex from = _cur;
        moveTo(next);
        if (!untried(from).empty() && (_stack.empty() || _stack.back() != from))
            _stack.push_back(from);
        return true;
    }

    std::vector<WalkStep> takeWalk() { return std::move(_walk); }

  private:
    std::vector<NodeIndex>& untried(NodeIndex v)
    {
        if (!_initialized[v])
        {
            _initialized[v] = true;
            for (const auto& l: _g.links(v))
                _untried[v].push_back(l.to);
        }
        return _untried[v];
    }

    std::vector<NodeIndex> candidates()
    {
        std::vector<NodeIndex> out;
        for (const NodeIndex w: untried(_cur))
        {
            if (w != _prev)
                out.push_back(w);
        }
        return out;
    }

    void moveTo(NodeIndex next)
    {
        std::erase(untried(_cur), next);
        _prev = _cur;
        _cur = next;
        ++_visits[next];
        _lastMove = true;
        _walk.push_back({_g.id(next), false});
    }

    double desiredHeading() const
    {
        if (_cur == _seed)
            return _seedHeading;
        try
        {
            return geo::initial_bearing(_g.point(_seed), _g.point(_cur));
        }
        catch (const Error&)
        {
            return _seedHeading;
        }
    }

    NodeIndex sample(const std::vector<NodeIndex>& cands)
    {
        const double desired = desiredHeading();
        std::vector<Candidate> weighted;
        weighted.reserve(cands.size());
        for (const NodeIndex w: cands)
        {
            double theta = 90.0;
            try
            {
                theta = geo::angular_difference(geo::initial_bearing(_g.point(_cur), _g.point(w)), desired);
            }
            catch (const Error&)
            {
            }
            weighted.push_back({theta, _visits[w]});
        }
        const double temperature = anneal_temperature(radial(_cur), _cfg);
        const auto dist = candidate_distribution(weighted, temperature, _cfg.gamma);

        const double u = _rng.uniform();
        double acc = 0.0;
        for (std::size_t i = 0; i < cands.size(); ++i)
        {
            acc += dist.probabilities[i];
            if (u < acc)
                return cands[i];
        }
        return cands.back();
    }

    const NavGraph& _g;
    NodeIndex _seed;
    const SamplerConfig& _cfg;
    Rng _rng;
    double _seedHeading = 0.0;

    NodeIndex _cur = kNone;
    NodeIndex _prev = kNone;
    bool _lastMove = false;
    std::vector<int> _visits;
    std::vector<std::vector<NodeIndex>> _untried;
    std::vector<bool> _initialized;
    std::vector<NodeIndex> _stack;
    std::vector<WalkStep> _walk;
};

} // namespace

CrawlResult crawl_start_point(const NavGraph& g, const graph::NodeId& seed, const SamplerConfig& cfg)
{
    cfg.validate();
    const NodeIndex seedIndex = g.index_of(seed);
    Crawler crawler(g, seedIndex, cfg);

    bool arrived = crawler.followCorridor();
    while (!arrived)
    {
        if (!crawler.advance())
            fail(ErrorCode::TargetUnreachable, "search from '" + seed + "' exhausted the graph before reaching "
                                                   + std::to_string(cfg.d_target) + " m");
        arrived = crawler.lastWasMove() && crawler.reached(crawler.current());
    }

    // Optionally keep walking a little to finish on a well-connected node.
    NodeIndex best = crawler.current();
    for (int extra = 0; extra < cfg.max_extra_steps && g.degree(best) < static_cast<std::size_t>(cfg.d_min_final);
         ++extra)
    {
        if (!crawler.advance())
            break;
        const NodeIndex v = crawler.current();
        if (crawler.lastWasMove() && crawler.reached(v) && g.degree(v) > g.degree(best))
            best = v;
    }

    return {g.id(best), crawler.radial(best), crawler.takeWalk()};
}

} // namespace citynav::sampler
