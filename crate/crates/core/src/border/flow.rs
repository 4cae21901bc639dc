use std::collections::VecDeque;

use super::types::{nonempty_subsets, BidRates, CapacityBounds, InterimTarget, SubsetId};
use super::{some_bidder_probability, subset_probabilities};
use crate::error::{Error, Result};
use crate::TOL;

/// Stand-in for an unbounded edge; total flow never exceeds 1.
pub const UNBOUNDED_CAPACITY: f64 = 2.0;

/// Dinic's max-flow on `f64` capacities.
#[derive(Clone, Debug)]
pub struct Dinic {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<i64>,
    next: Vec<usize>,
}

impl Dinic {
    pub fn new(nodes: usize) -> Self {
        Dinic {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; nodes],
            next: vec![0; nodes],
        }
    }

    /// Adds `from -> to` and returns its index; the reverse residual edge is
    /// `index ^ 1`.
    pub fn add_edge(&mut self, from: usize, to: usize, capacity: f64) -> usize {
        let id = self.to.len();
        self.to.push(to);
        self.cap.push(capacity);
        self.adj[from].push(id);
        self.to.push(from);
        self.cap.push(0.0);
        self.adj[to].push(id + 1);
        id
    }

    pub fn residual(&self, edge: usize) -> f64 {
        self.cap[edge]
    }

    fn bfs(&mut self, source: usize, sink: usize) -> bool {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[source] = 0;
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > 0.0 && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        self.level[sink] >= 0
    }

    fn dfs(&mut self, u: usize, sink: usize, limit: f64) -> f64 {
        if u == sink {
            return limit;
        }
        while self.next[u] < self.adj[u].len() {
            let e = self.adj[u][self.next[u]];
            let v = self.to[e];
            if self.cap[e] > 0.0 && self.level[v] == self.level[u] + 1 {
                let pushed = self.dfs(v, sink, limit.min(self.cap[e]));
                if pushed > 0.0 {
                    self.cap[e] -= pushed;
                    self.cap[e ^ 1] += pushed;
                    return pushed;
                }
            }
            self.next[u] += 1;
        }
        0.0
    }

    /// Runs to completion and returns the flow value.
    pub fn run(&mut self, source: usize, sink: usize) -> f64 {
        let mut total = 0.0;
        while self.bfs(source, sink) {
            self.next.iter_mut().for_each(|n| *n = 0);
            loop {
                let pushed = self.dfs(source, sink, f64::INFINITY);
                if pushed <= 0.0 {
                    break;
                }
                total += pushed;
            }
        }
        total
    }

    /// Nodes reachable from `source` through edges with residual above `eps`.
    pub fn reachable(&self, source: usize, eps: f64) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[source] = true;
        let mut stack = vec![source];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > eps && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

/// A node of the allocation network.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Node {
    Source,
    Subset(SubsetId),
    Agent(usize),
    Sink,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowEdge {
    pub from: Node,
    pub to: Node,
    pub capacity: f64,
}

/// Source to every bidder set `S` (capacity `Pr(S)`), `S` to each member `i`
/// (capacity `bound * Pr(S)` or unbounded), and each agent to the sink
/// (capacity `p_i beta_i`).
///
/// Edges are stored as: source edges by mask, then middle edges by mask and
/// member, then sink edges by agent.
#[derive(Clone, Debug)]
pub struct FlowNetwork {
    n: usize,
    edges: Vec<FlowEdge>,
    middle_start: Vec<usize>,
    sink_start: usize,
}

impl FlowNetwork {
    /// Builds the network, rejecting targets whose total demand differs from
    /// the chance that anyone bids.
    pub fn build(rates: &BidRates, target: &InterimTarget, bounds: &CapacityBounds) -> Result<Self> {
        target.check_len(rates.len())?;
        let n = rates.len();
        let lhs: f64 = rates.as_slice().iter().zip(target.as_slice()).map(|(b, p)| b * p).sum();
        let rhs = some_bidder_probability(rates.as_slice(), SubsetId::full(n));
        if (lhs - rhs).abs() > TOL {
            return Err(Error::BorderEquality { lhs, rhs });
        }
        Self::build_unchecked(rates, target, bounds)
    }

    /// Builds the network without the total-demand check.
    pub fn build_unchecked(rates: &BidRates, target: &InterimTarget, bounds: &CapacityBounds) -> Result<Self> {
        let n = rates.len();
        target.check_len(n)?;
        bounds.check_agents(n)?;
        let pr = subset_probabilities(rates);
        let mut edges = Vec::new();
        for s in nonempty_subsets(n) {
            edges.push(FlowEdge {
                from: Node::Source,
                to: Node::Subset(s),
                capacity: pr[s.mask() as usize],
            });
        }
        let mut middle_start = vec![0; 1 << n];
        for s in nonempty_subsets(n) {
            middle_start[s.mask() as usize] = edges.len();
            for i in s.members() {
                let capacity = match bounds.get(s, i) {
                    Some(b) => b * pr[s.mask() as usize],
                    None => UNBOUNDED_CAPACITY,
                };
                edges.push(FlowEdge {
                    from: Node::Subset(s),
                    to: Node::Agent(i),
                    capacity,
                });
            }
        }
        let sink_start = edges.len();
        for (i, (p, b)) in target.as_slice().iter().zip(rates.as_slice()).enumerate() {
            edges.push(FlowEdge {
                from: Node::Agent(i),
                to: Node::Sink,
                capacity: p * b,
            });
        }
        Ok(FlowNetwork {
            n,
            edges,
            middle_start,
            sink_start,
        })
    }

    pub fn agents(&self) -> usize {
        self.n
    }

    pub fn node_count(&self) -> usize {
        (1 << self.n) + self.n + 1
    }

    /// Dense node index: source 0, subset `S` at its mask, agent `i` at
    /// `2^n + i`, sink last.
    pub fn index(&self, node: Node) -> usize {
        match node {
            Node::Source => 0,
            Node::Subset(s) => s.mask() as usize,
            Node::Agent(i) => (1 << self.n) + i,
            Node::Sink => (1 << self.n) + self.n,
        }
    }

    pub fn edges(&self) -> &[FlowEdge] {
        &self.edges
    }

    pub fn source_edge(&self, s: SubsetId) -> usize {
        s.mask() as usize - 1
    }

    pub fn middle_edge(&self, s: SubsetId, agent: usize) -> usize {
        self.middle_start[s.mask() as usize] + s.rank_of(agent)
    }

    pub fn sink_edge(&self, agent: usize) -> usize {
        self.sink_start + agent
    }

    pub fn capacity(&self, edge: usize) -> f64 {
        self.edges[edge].capacity
    }

    /// Sum of source capacities, `Pr(someone bids)`.
    pub fn supply(&self) -> f64 {
        self.edges[..self.middle_start.get(1).copied().unwrap_or(0)]
            .iter()
            .map(|e| e.capacity)
            .sum()
    }

    /// Sum of sink capacities, `sum_i p_i beta_i`.
    pub fn demand(&self) -> f64 {
        self.edges[self.sink_start..].iter().map(|e| e.capacity).sum()
    }
}

/// A maximum flow with per-edge values aligned with
/// [`FlowNetwork::edges`].
#[derive(Clone, Debug)]
pub struct MaxFlow {
    pub value: f64,
    pub flows: Vec<f64>,
    /// Nodes on the source side of a minimum cut.
    pub source_side: Vec<bool>,
}

/// Residual tolerance used to read the minimum cut off a finished flow.
const CUT_EPS: f64 = 1e-12;

pub fn max_flow(net: &FlowNetwork) -> MaxFlow {
    let mut dinic = Dinic::new(net.node_count());
    let ids: Vec<usize> = net
        .edges
        .iter()
        .map(|e| dinic.add_edge(net.index(e.from), net.index(e.to), e.capacity))
        .collect();
    let source = net.index(Node::Source);
    let sink = net.index(Node::Sink);
    let value = dinic.run(source, sink);
    let flows = ids
        .iter()
        .zip(&net.edges)
        .map(|(&id, e)| (e.capacity - dinic.residual(id)).max(0.0))
        .collect();
    MaxFlow {
        value,
        flows,
        source_side: dinic.reachable(source, CUT_EPS),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::border::{worst_case_interim, FairShares};

    fn half() -> BidRates {
        BidRates::new(vec![0.5, 0.5]).unwrap()
    }

    #[test]
    fn network_capacities() {
        let target = InterimTarget::new(vec![0.75, 0.75]).unwrap();
        let net = FlowNetwork::build(&half(), &target, &CapacityBounds::new()).unwrap();
        assert_eq!(net.node_count(), 4 + 2 + 1);
        let both = SubsetId::full(2);
        assert_eq!(net.capacity(net.source_edge(both)), 0.25);
        assert!((net.supply() - 0.75).abs() < 1e-15);
        assert_eq!(net.capacity(net.middle_edge(both, 0)), UNBOUNDED_CAPACITY);

        let mut bounds = CapacityBounds::new();
        bounds.set(both, 0, 0.5).unwrap();
        let net = FlowNetwork::build(&half(), &target, &bounds).unwrap();
        assert_eq!(net.capacity(net.middle_edge(both, 0)), 0.125);
    }

    #[test]
    fn build_rejects_total_demand_mismatch() {
        let target = InterimTarget::new(vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            FlowNetwork::build(&half(), &target, &CapacityBounds::new()),
            Err(Error::BorderEquality { .. })
        ));
    }

    #[test]
    fn feasible_flow_saturates() {
        let shares = FairShares::symmetric(5).unwrap();
        let rates = shares.to_rates();
        let net = FlowNetwork::build(&rates, &worst_case_interim(&shares), &CapacityBounds::new()).unwrap();
        let flow = max_flow(&net);
        assert!((flow.value - net.supply()).abs() < 1e-9);
    }

    #[test]
    fn overdemanded_flow_falls_short() {
        let target = InterimTarget::new(vec![1.0, 1.0]).unwrap();
        let net = FlowNetwork::build_unchecked(&half(), &target, &CapacityBounds::new()).unwrap();
        let flow = max_flow(&net);
        assert!(flow.value < 0.75 + 1e-12);
        assert!(flow.value < net.demand());
    }

    #[test]
    fn flow_is_conserving() {
        let rates = BidRates::new(vec![0.2, 0.9, 0.4, 0.6]).unwrap();
        let target = InterimTarget::new(vec![0.3, 0.8, 0.5, 0.9]).unwrap();
        let net = FlowNetwork::build_unchecked(&rates, &target, &CapacityBounds::new()).unwrap();
        let flow = max_flow(&net);
        let mut balance = vec![0.0; net.node_count()];
        for (e, f) in net.edges().iter().zip(&flow.flows) {
            assert!(*f <= e.capacity + 1e-12);
            balance[net.index(e.from)] -= f;
            balance[net.index(e.to)] += f;
        }
        for (k, b) in balance.iter().enumerate() {
            if k != 0 && k != net.index(Node::Sink) {
                assert!(b.abs() < 1e-12);
            }
        }
        assert!((balance[net.index(Node::Sink)] - flow.value).abs() < 1e-12);
    }
}
