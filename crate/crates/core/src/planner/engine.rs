//! Edge-based best-first search with parallel edge expansion.
//!
//! OPEN holds edges. A state first appears through its dummy edge; popping
//! the dummy moves the state into BE ("being expanded") and generates its
//! real edges, each of which is evaluated by a worker. Once every real edge
//! of a state has been processed the state moves to CLOSED. The coordinator
//! pops only while some worker is idle, so with one worker the expansion
//! order is fully deterministic.

use std::cmp::Ordering;
use std::collections::hash_map::DefaultHasher;
use std::collections::{BinaryHeap, HashMap, VecDeque};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::graph::{Edge, Heuristic, LowDState, ProblemInstance, StateKey};

/// Strict improvement slack for g updates.
pub const G_SLACK: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct Ancestor<P> {
    pub state: LowDState,
    pub payload: Arc<P>,
}

/// Computes the cost and payload of reaching `edge.to` through `edge`.
/// `chain` lists the ancestors of `edge.from`, start first, ending with
/// `edge.from` itself.
pub trait EdgeEvaluator: Sync {
    type Payload: Send + Sync;

    fn root(&self, problem: &ProblemInstance) -> (f64, Self::Payload);

    fn evaluate(
        &self,
        problem: &ProblemInstance,
        chain: &[Ancestor<Self::Payload>],
        edge: &Edge,
    ) -> Option<(f64, Self::Payload)>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchStatus {
    Solved,
    Exhausted,
    Timeout,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    /// Edges popped and handed to a worker (dummy and real).
    pub expansions: usize,
    /// Real edges whose successor was evaluated.
    pub evaluations: usize,
    pub wall_time_s: f64,
    pub threads_spawned: usize,
    pub closed_states: usize,
    /// Bookkeeping invariant breaches observed under the lock.
    pub audit_violations: usize,
    pub trace_hash: u64,
}

pub struct SearchOutcome<P> {
    pub status: SearchStatus,
    pub payload: Option<Arc<P>>,
    pub cost: f64,
    /// Low-D states from start to the goal state.
    pub path: Vec<LowDState>,
    pub stats: SearchStats,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchConfig {
    pub threads: usize,
    pub heuristic_weight: f64,
    pub timeout: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Membership {
    Open,
    BeingExpanded,
    Closed,
}

struct Node<P> {
    state: LowDState,
    g: f64,
    h: f64,
    parent: Option<usize>,
    payload: Option<Arc<P>>,
    version: u64,
    membership: Membership,
    edges: Vec<Edge>,
    generated: usize,
}

#[derive(Debug, Clone, Copy)]
enum EntryKind {
    Dummy { version: u64 },
    Real { edge: usize },
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    f: f64,
    g: f64,
    seq: u64,
    node: usize,
    kind: EntryKind,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Entry {
    /// Reversed so the max-heap yields the smallest `(f, g, seq)`.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then(other.g.total_cmp(&self.g))
            .then(other.seq.cmp(&self.seq))
    }
}

enum Task<P> {
    Dummy {
        node: usize,
        state: LowDState,
    },
    Real {
        node: usize,
        edge: Edge,
        chain: Vec<Ancestor<P>>,
        target_done: bool,
    },
}

enum Done<P> {
    Dummy {
        node: usize,
        edges: Vec<Edge>,
    },
    Real {
        node: usize,
        target: LowDState,
        target_h: f64,
        result: Option<(f64, P)>,
    },
}

struct Shared<P> {
    open: BinaryHeap<Entry>,
    nodes: Vec<Node<P>>,
    index: HashMap<StateKey, usize>,
    seq: u64,
    tasks: VecDeque<Task<P>>,
    idle: usize,
    spawned: usize,
    in_flight: usize,
    terminate: bool,
    stats: SearchStats,
    hasher: DefaultHasher,
}

impl<P> Shared<P> {
    fn push(&mut self, node: usize, kind: EntryKind, w_h: f64) {
        let n = &self.nodes[node];
        if !n.h.is_finite() || !n.g.is_finite() {
            return;
        }
        self.seq += 1;
        self.open.push(Entry {
            f: n.g + w_h * n.h,
            g: n.g,
            seq: self.seq,
            node,
            kind,
        });
    }

    fn pop_valid(&mut self) -> Option<Entry> {
        while let Some(e) = self.open.pop() {
            let n = &self.nodes[e.node];
            match e.kind {
                EntryKind::Dummy { version } => {
                    if n.membership == Membership::Open && version == n.version {
                        return Some(e);
                    }
                }
                EntryKind::Real { .. } => return Some(e),
            }
        }
        None
    }

    fn chain(&self, node: usize) -> Vec<Ancestor<P>> {
        let mut out = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            let n = &self.nodes[i];
            out.push(Ancestor {
                state: n.state.clone(),
                payload: n.payload.clone().expect("expanded states carry a payload"),
            });
            cur = n.parent;
            if out.len() > self.nodes.len() {
                break;
            }
        }
        out.reverse();
        out
    }

    fn path(&self, node: usize) -> Vec<LowDState> {
        let mut out = Vec::new();
        let mut cur = Some(node);
        while let Some(i) = cur {
            out.push(self.nodes[i].state.clone());
            cur = self.nodes[i].parent;
            if out.len() > self.nodes.len() {
                break;
            }
        }
        out.reverse();
        out
    }

    fn close(&mut self, node: usize) {
        let n = &mut self.nodes[node];
        if n.membership != Membership::BeingExpanded {
            self.stats.audit_violations += 1;
        }
        n.membership = Membership::Closed;
        self.stats.closed_states += 1;
    }

    fn commit(&mut self, done: Done<P>, w_h: f64) {
        match done {
            Done::Dummy { node, edges } => {
                let g = self.nodes[node].g;
                let n_edges = edges.len();
                self.nodes[node].edges = edges;
                if n_edges == 0 {
                    self.close(node);
                    return;
                }
                let h = self.nodes[node].h;
                for i in 0..n_edges {
                    self.seq += 1;
                    self.open.push(Entry {
                        f: g + w_h * h,
                        g,
                        seq: self.seq,
                        node,
                        kind: EntryKind::Real { edge: i },
                    });
                }
            }
            Done::Real {
                node,
                target,
                target_h,
                result,
            } => {
                if let Some((cost, payload)) = result {
                    let idx = match self.index.get(&target.key) {
                        Some(&i) => i,
                        None => {
                            let i = self.nodes.len();
                            self.index.insert(target.key.clone(), i);
                            self.nodes.push(Node {
                                state: target,
                                g: f64::INFINITY,
                                h: target_h,
                                parent: None,
                                payload: None,
                                version: 0,
                                membership: Membership::Open,
                                edges: Vec::new(),
                                generated: 0,
                            });
                            i
                        }
                    };
                    let t = &mut self.nodes[idx];
                    if t.membership == Membership::Open && cost + G_SLACK < t.g {
                        t.g = cost;
                        t.parent = Some(node);
                        t.payload = Some(Arc::new(payload));
                        t.version += 1;
                        let version = t.version;
                        self.push(idx, EntryKind::Dummy { version }, w_h);
                    }
                }
                let n = &mut self.nodes[node];
                n.generated += 1;
                if n.generated > n.edges.len() {
                    self.stats.audit_violations += 1;
                }
                if n.generated == n.edges.len() {
                    self.close(node);
                }
            }
        }
    }
}

fn work<E: EdgeEvaluator>(
    task: Task<E::Payload>,
    problem: &ProblemInstance,
    heuristic: &dyn Heuristic,
    evaluator: &E,
) -> Done<E::Payload> {
    match task {
        Task::Dummy { node, state } => {
            Done::Dummy {
                node,
                edges: problem.successors(&state),
            }
        }
        Task::Real {
            node,
            edge,
            chain,
            target_done,
        } => {
            let result = if target_done {
                None
            } else {
                evaluator.evaluate(problem, &chain, &edge)
            };
            Done::Real {
                node,
                target_h: heuristic.h(&edge.to.coords),
                target: edge.to,
                result,
            }
        }
    }
}

/// Runs the search. `cfg.threads` bounds the number of expansion workers,
/// which are spawned only when every existing worker is busy.
pub fn search<E: EdgeEvaluator>(
    problem: &ProblemInstance,
    heuristic: &dyn Heuristic,
    evaluator: &E,
    cfg: &SearchConfig,
) -> SearchOutcome<E::Payload> {
    let started = Instant::now();
    let deadline = started + cfg.timeout;
    let w_h = cfg.heuristic_weight;
    let threads = cfg.threads.max(1);

    let (root_cost, root_payload) = evaluator.root(problem);
    let start = problem.start.clone();
    let mut shared = Shared {
        open: BinaryHeap::new(),
        nodes: Vec::new(),
        index: HashMap::new(),
        seq: 0,
        tasks: VecDeque::new(),
        idle: 0,
        spawned: 0,
        in_flight: 0,
        terminate: false,
        stats: SearchStats::default(),
        hasher: DefaultHasher::new(),
    };
    shared.index.insert(start.key.clone(), 0);
    shared.nodes.push(Node {
        h: heuristic.h(&start.coords),
        state: start,
        g: root_cost,
        parent: None,
        payload: Some(Arc::new(root_payload)),
        version: 0,
        membership: Membership::Open,
        edges: Vec::new(),
        generated: 0,
    });
    // The start is always expanded, even when its heuristic is infinite.
    if !shared.nodes[0].h.is_finite() {
        shared.nodes[0].h = 0.0;
    }
    shared.push(0, EntryKind::Dummy { version: 0 }, w_h);

    let lock = Mutex::new(shared);
    let changed = Condvar::new();

    let (status, goal_node) = std::thread::scope(|scope| {
        let worker = || {
            let mut guard = lock.lock().expect("planner lock");
            loop {
                while guard.tasks.is_empty() && !guard.terminate {
                    guard = changed.wait(guard).expect("planner lock");
                }
                if guard.terminate {
                    break;
                }
                let task = guard.tasks.pop_front().expect("nonempty");
                drop(guard);
                let done = work(task, problem, heuristic, evaluator);
                guard = lock.lock().expect("planner lock");
                if !guard.terminate {
                    guard.commit(done, w_h);
                }
                guard.in_flight -= 1;
                guard.idle += 1;
                changed.notify_all();
            }
        };

        let mut guard = lock.lock().expect("planner lock");
        let outcome = loop {
            let now = Instant::now();
            if now >= deadline {
                break (SearchStatus::Timeout, None);
            }
            if guard.idle == 0 && guard.spawned < threads && !guard.open.is_empty() {
                guard.spawned += 1;
                guard.idle += 1;
                scope.spawn(worker);
            }
            if guard.idle > guard.tasks.len() {
                if let Some(entry) = guard.pop_valid() {
                    let n = &guard.nodes[entry.node];
                    if problem.goal.contains(&n.state.coords) {
                        break (SearchStatus::Solved, Some(entry.node));
                    }
                    let task = match entry.kind {
                        EntryKind::Dummy { .. } => {
                            let state = n.state.clone();
                            guard.nodes[entry.node].membership = Membership::BeingExpanded;
                            state.key.hash(&mut guard.hasher);
                            u64::MAX.hash(&mut guard.hasher);
                            Task::Dummy {
                                node: entry.node,
                                state,
                            }
                        }
                        EntryKind::Real { edge } => {
                            let e = n.edges[edge].clone();
                            let from_key = n.state.key.clone();
                            let target_done = guard.index.get(&e.to.key).is_some_and(|&i| {
                                guard.nodes[i].membership != Membership::Open
                            });
                            from_key.hash(&mut guard.hasher);
                            (edge as u64).hash(&mut guard.hasher);
                            if !target_done {
                                guard.stats.evaluations += 1;
                            }
                            Task::Real {
                                node: entry.node,
                                chain: guard.chain(entry.node),
                                edge: e,
                                target_done,
                            }
                        }
                    };
                    guard.stats.expansions += 1;
                    guard.tasks.push_back(task);
                    guard.idle -= 1;
                    guard.in_flight += 1;
                    changed.notify_all();
                    continue;
                }
                if guard.in_flight == 0 {
                    break (SearchStatus::Exhausted, None);
                }
            }
            let wait = deadline.saturating_duration_since(now);
            guard = changed.wait_timeout(guard, wait).expect("planner lock").0;
        };
        guard.terminate = true;
        guard.stats.threads_spawned = guard.spawned;
        changed.notify_all();
        drop(guard);
        outcome
    });

    let mut shared = lock.into_inner().expect("planner lock");
    shared.stats.wall_time_s = started.elapsed().as_secs_f64();
    shared.stats.trace_hash = shared.hasher.finish();
    let (payload, cost, path) = match goal_node {
        Some(i) => (
            shared.nodes[i].payload.clone(),
            shared.nodes[i].g,
            shared.path(i),
        ),
        None => (None, f64::INFINITY, Vec::new()),
    };
    SearchOutcome {
        status,
        payload,
        cost,
        path,
        stats: shared.stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(f: f64, g: f64, seq: u64) -> Entry {
        Entry {
            f,
            g,
            seq,
            node: 0,
            kind: EntryKind::Dummy { version: 0 },
        }
    }

    #[test]
    fn heap_pops_lexicographic_minimum() {
        let mut h = BinaryHeap::new();
        h.push(entry(2.0, 0.0, 1));
        h.push(entry(1.0, 0.5, 3));
        h.push(entry(1.0, 0.5, 2));
        h.push(entry(1.0, 0.2, 4));
        let order: Vec<u64> = std::iter::from_fn(|| h.pop().map(|e| e.seq)).collect();
        assert_eq!(order, vec![4, 2, 3, 1]);
    }
}
