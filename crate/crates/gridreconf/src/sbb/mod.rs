//! Spatial branch-and-bound engine.
//!
//! Nodes carry variable boxes. Each node is relaxed to an LP (McCormick
//! envelopes for products and bilinear terms, secants and tangents for
//! squares, outer-approximation cuts for the convex rows), bounds are
//! tightened by interval propagation, branching goes binaries-first then
//! spatial, and integral nodes are repaired into feasible incumbents by a
//! load-flow sweep. Node selection is best-bound with depth-first plunging;
//! the search terminates with a certified optimality gap.

pub mod branch;
pub mod fbbt;
pub mod relax;
pub mod repair;

pub use branch::{select_branch, BranchDecision, BILINEAR_TOL, INT_TOL};
pub use relax::{convex_violation, effective_cones, CutPool, RelaxOutcome, OA_TOL};
pub use repair::{repair_incumbent, INCUMBENT_TOL};

/// The node relaxations are plain LPs; `solve_lp` is the narrow contract the
/// engine relies on.
pub use crate::lp::{solve as solve_lp, LpOutcome, LpProblem};

use crate::model::{residuals, ModelInstance, OperatingPoint, Variant};
use crate::radiality::SwitchTopology;
use serde::Serialize;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex};
use std::time::Instant;
use thiserror::Error;

/// Default relative optimality-gap target (0.01%).
pub const DEFAULT_GAP: f64 = 1e-4;

#[derive(Debug, Clone)]
pub struct SolveParams {
    /// Relative optimality gap at which the search stops.
    pub gap_target: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: Option<f64>,
    pub node_limit: Option<u64>,
    /// Worker threads; 0 = available parallelism.
    pub threads: usize,
    /// Single-ordered processing: identical inputs yield identical results.
    pub deterministic: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            gap_target: DEFAULT_GAP,
            time_limit: None,
            node_limit: None,
            threads: 0,
            deterministic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    GapReached,
    TimeLimit,
    NodeLimit,
    Infeasible,
}

/// A feasible solution: topology, operating point, objective value in the
/// model's declared sense.
#[derive(Debug, Clone, Serialize)]
pub struct Incumbent {
    pub topology: SwitchTopology,
    pub point: OperatingPoint,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub termination: Termination,
    /// Best feasible objective value (declared sense).
    pub primal: Option<f64>,
    /// Certified bound on the optimum (declared sense); absent if infeasible.
    pub bound: Option<f64>,
    /// `(bound − primal) / max(|bound|, ε)` in the maximization sense.
    pub gap: Option<f64>,
    pub nodes: u64,
    pub lp_solves: u64,
    pub cuts: u64,
    pub wall_time_s: f64,
    pub incumbent: Option<Incumbent>,
}

impl SolveResult {
    /// Deterministic summary: the result with timing zeroed out.
    pub fn summary_json(&self) -> String {
        let mut clone = self.clone();
        clone.wall_time_s = 0.0;
        serde_json::to_string_pretty(&clone).expect("result serialization cannot fail")
    }
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

const OBJ_EPS: f64 = 1e-9;

/// Internal incumbent bookkeeping (values in the internal maximize sense).
struct Best {
    value: f64,
    topology: SwitchTopology,
    point: OperatingPoint,
}

/// A queued node: bound plus the branching chain that reconstructs its boxes.
struct QueuedNode {
    bound: f64,
    id: u64,
    depth: u32,
    chain: Option<Arc<Decision>>,
}

struct Decision {
    parent: Option<Arc<Decision>>,
    var: usize,
    lo: f64,
    hi: f64,
}

impl Decision {
    fn apply(chain: &Option<Arc<Decision>>, boxes: &mut [(f64, f64)]) {
        let mut cursor = chain;
        while let Some(d) = cursor {
            let b = &mut boxes[d.var];
            b.0 = b.0.max(d.lo);
            b.1 = b.1.min(d.hi);
            cursor = &d.parent;
        }
    }
}

impl PartialEq for QueuedNode {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.id == other.id
    }
}
impl Eq for QueuedNode {}
impl PartialOrd for QueuedNode {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for QueuedNode {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Max-heap: higher bound first, then lower id for determinism.
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

struct State {
    queue: BinaryHeap<QueuedNode>,
    in_flight: Vec<Option<f64>>,
    best: Option<Best>,
    pool: CutPool,
    processed: u64,
    lp_solves: u64,
    next_id: u64,
    finish: Option<Termination>,
}

struct Shared {
    state: Mutex<State>,
    cv: Condvar,
    stop: AtomicBool,
}

impl State {
    fn primal(&self) -> f64 {
        self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.value)
    }

    /// Best bound over open nodes, in-flight work and the incumbent.
    fn global_bound(&self) -> f64 {
        let mut bound = self.primal();
        if let Some(top) = self.queue.peek() {
            bound = bound.max(top.bound);
        }
        for b in self.in_flight.iter().flatten() {
            bound = bound.max(*b);
        }
        bound
    }

    fn gap(&self) -> Option<f64> {
        self.best.as_ref()?;
        let bound = self.global_bound();
        Some((bound - self.primal()).max(0.0) / bound.abs().max(OBJ_EPS))
    }

    fn prune_threshold(&self) -> f64 {
        let p = self.primal();
        if !p.is_finite() {
            return f64::NEG_INFINITY;
        }
        p + 1e-9 * p.abs().max(1.0)
    }
}

/// Solve a model instance by spatial branch-and-bound.
pub fn solve(model: &ModelInstance, params: &SolveParams) -> Result<SolveResult, SolveError> {
    if params.gap_target < 0.0 || params.gap_target.is_nan() {
        return Err(SolveError::InvalidParams(format!(
            "gap target {} must be nonnegative",
            params.gap_target
        )));
    }
    if params.time_limit.is_some_and(|t| t <= 0.0) {
        return Err(SolveError::InvalidParams("time limit must be positive".into()));
    }
    let threads = if params.deterministic {
        1
    } else if params.threads == 0 {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    } else {
        params.threads
    };

    // Internal sense is always maximize.
    let mut objective = vec![0.0; model.num_vars()];
    for &(v, a) in &model.objective.coeffs {
        objective[v] += if model.objective.maximize { a } else { -a };
    }
    let cones = effective_cones(model);
    let root_boxes: Vec<(f64, f64)> = model.vars.iter().map(|v| (v.lo, v.hi)).collect();

    let start = Instant::now();
    let shared = Shared {
        state: Mutex::new(State {
            queue: BinaryHeap::new(),
            in_flight: vec![None; threads],
            best: None,
            pool: CutPool::default(),
            processed: 0,
            lp_solves: 0,
            next_id: 1,
            finish: None,
        }),
        cv: Condvar::new(),
        stop: AtomicBool::new(false),
    };
    shared.state.lock().unwrap().queue.push(QueuedNode {
        bound: f64::INFINITY,
        id: 0,
        depth: 0,
        chain: None,
    });

    let ctx = WorkerCtx {
        model,
        params,
        objective: &objective,
        cones: &cones,
        root_boxes: &root_boxes,
        shared: &shared,
        start,
    };
    if threads == 1 {
        worker(&ctx, 0);
    } else {
        std::thread::scope(|scope| {
            for w in 0..threads {
                let ctx = &ctx;
                scope.spawn(move || worker(ctx, w));
            }
        });
    }

    let state = shared.state.lock().unwrap();
    let termination = state.finish.unwrap_or({
        if state.best.is_some() {
            Termination::GapReached
        } else {
            Termination::Infeasible
        }
    });
    let internal_bound = match termination {
        Termination::Infeasible => f64::NEG_INFINITY,
        _ => state.global_bound(),
    };
    let gap = state.gap();
    let sense = if model.objective.maximize { 1.0 } else { -1.0 };
    let incumbent = state.best.as_ref().map(|b| Incumbent {
        topology: b.topology.clone(),
        point: b.point.clone(),
        value: sense * b.value,
    });
    Ok(SolveResult {
        termination,
        primal: incumbent.as_ref().map(|i| i.value),
        bound: internal_bound.is_finite().then_some(sense * internal_bound),
        gap,
        nodes: state.processed,
        lp_solves: state.lp_solves,
        cuts: state.pool.len() as u64,
        wall_time_s: start.elapsed().as_secs_f64(),
        incumbent,
    })
}

struct WorkerCtx<'a> {
    model: &'a ModelInstance,
    params: &'a SolveParams,
    objective: &'a [f64],
    cones: &'a [crate::model::RotatedConeRow],
    root_boxes: &'a [(f64, f64)],
    shared: &'a Shared,
    start: Instant,
}

fn worker(ctx: &WorkerCtx, w: usize) {
    loop {
        // Acquire work.
        let node = {
            let mut state = ctx.shared.state.lock().unwrap();
            loop {
                if state.finish.is_some() {
                    return;
                }
                if check_limits(ctx, &mut state) {
                    ctx.shared.cv.notify_all();
                    return;
                }
                let threshold = state.prune_threshold();
                match state.queue.pop() {
                    Some(node) if node.bound > threshold => {
                        state.in_flight[w] = Some(node.bound);
                        break node;
                    }
                    Some(_) => continue, // dominated, drop
                    None => {
                        if state.in_flight.iter().all(Option::is_none) {
                            state.finish = Some(if state.best.is_some() {
                                Termination::GapReached
                            } else {
                                Termination::Infeasible
                            });
                            ctx.shared.stop.store(true, Ordering::Relaxed);
                            ctx.shared.cv.notify_all();
                            return;
                        }
                        state = ctx.shared.cv.wait(state).unwrap();
                    }
                }
            }
        };
        plunge(ctx, w, node);
        let mut state = ctx.shared.state.lock().unwrap();
        state.in_flight[w] = None;
        ctx.shared.cv.notify_all();
    }
}

/// Termination checks that need the lock. Returns true when the solve is done.
fn check_limits(ctx: &WorkerCtx, state: &mut State) -> bool {
    if state.finish.is_some() {
        return true;
    }
    if let Some(limit) = ctx.params.time_limit {
        if ctx.start.elapsed().as_secs_f64() > limit {
            state.finish = Some(Termination::TimeLimit);
            ctx.shared.stop.store(true, Ordering::Relaxed);
            return true;
        }
    }
    if let Some(limit) = ctx.params.node_limit {
        if state.processed >= limit {
            state.finish = Some(Termination::NodeLimit);
            ctx.shared.stop.store(true, Ordering::Relaxed);
            return true;
        }
    }
    if state.best.is_some() && state.gap().is_some_and(|g| g <= ctx.params.gap_target) {
        state.finish = Some(Termination::GapReached);
        ctx.shared.stop.store(true, Ordering::Relaxed);
        return true;
    }
    false
}

/// Process a node, then dive depth-first into one child until the dive ends,
/// queueing the siblings.
fn plunge(ctx: &WorkerCtx, w: usize, mut node: QueuedNode) {
    loop {
        if ctx.shared.stop.load(Ordering::Relaxed) {
            return;
        }
        // Materialize boxes: root ∩ branching chain, then tighten.
        let mut boxes = ctx.root_boxes.to_vec();
        Decision::apply(&node.chain, &mut boxes);
        if !fbbt::tighten(ctx.model, &mut boxes) {
            count_fathomed(ctx, &node, Vec::new(), 0);
            return;
        }

        let (pool_rows, threshold) = {
            let state = ctx.shared.state.lock().unwrap();
            (state.pool.snapshot(), state.prune_threshold())
        };
        if node.bound <= threshold {
            count_fathomed(ctx, &node, Vec::new(), 0);
            return;
        }

        let (outcome, new_cuts, lps) =
            relax::solve_node_relaxation(ctx.model, &boxes, ctx.cones, &pool_rows, ctx.objective);
        let (x, lp_value) = match outcome {
            RelaxOutcome::Bounded { x, value } => (x, value),
            RelaxOutcome::Infeasible => {
                count_fathomed(ctx, &node, new_cuts, lps);
                return;
            }
            RelaxOutcome::Failure(msg) => {
                log::warn!("node {} unresolved ({msg}); splitting blindly", node.id);
                blind_split(ctx, node, boxes, new_cuts, lps);
                return;
            }
        };
        let bound = lp_value.min(node.bound);
        node.bound = bound;

        // Early repair at integral binaries feeds the primal side fast.
        let integral = ctx
            .model
            .index
            .pi
            .iter()
            .all(|&v| (x[v] - x[v].round()).abs() <= INT_TOL);
        let mut repaired: Option<Best> = None;
        if integral && ctx.model.variant != Variant::LinDistFlow {
            if let Some((topology, point)) = repair_incumbent(ctx.model, &x) {
                let value = internal_value(ctx, &point);
                repaired = Some(Best { value, topology, point });
            }
        }

        let decision = select_branch(ctx.model, &boxes, &x);
        let leaf = matches!(decision, BranchDecision::None);
        let mut leaf_best: Option<Best> = None;
        if leaf {
            leaf_best = accept_leaf(ctx, &x);
        }

        // Publish bookkeeping for this node.
        let (threshold, finished) = {
            let mut state = ctx.shared.state.lock().unwrap();
            state.processed += 1;
            state.lp_solves += lps;
            state.pool.merge(new_cuts);
            for cand in [repaired, leaf_best].into_iter().flatten() {
                if cand.value > state.primal() {
                    state.best = Some(cand);
                    log::info!(
                        "node={} bound={:.6} incumbent={:.6} gap={:.3e} open={}",
                        node.id,
                        state.global_bound(),
                        state.primal(),
                        state.gap().unwrap_or(f64::INFINITY),
                        state.queue.len()
                    );
                }
            }
            let level = if state.processed % 512 == 0 {
                log::Level::Info
            } else {
                log::Level::Debug
            };
            log::log!(
                level,
                "node={} bound={:.6} incumbent={:.6} gap={:.3e} open={}",
                node.id,
                state.global_bound(),
                state.primal(),
                state.gap().unwrap_or(f64::INFINITY),
                state.queue.len()
            );
            let done = check_limits(ctx, &mut state);
            if done {
                ctx.shared.cv.notify_all();
            }
            (state.prune_threshold(), done)
        };
        if finished || leaf || bound <= threshold {
            return;
        }

        // Branch: push the sibling, dive into the child containing x.
        let (dive, sibling) = match decision {
            BranchDecision::Binary { var } => {
                let fix = |v: f64| Decision {
                    parent: node.chain.clone(),
                    var,
                    lo: v,
                    hi: v,
                };
                if x[var].round() >= 0.5 {
                    (fix(1.0), fix(0.0))
                } else {
                    (fix(0.0), fix(1.0))
                }
            }
            BranchDecision::Spatial { var, at } => {
                let lower = Decision {
                    parent: node.chain.clone(),
                    var,
                    lo: f64::NEG_INFINITY,
                    hi: at,
                };
                let upper = Decision {
                    parent: node.chain.clone(),
                    var,
                    lo: at,
                    hi: f64::INFINITY,
                };
                if x[var] <= at {
                    (lower, upper)
                } else {
                    (upper, lower)
                }
            }
            BranchDecision::None => unreachable!("leaves return above"),
        };
        let dive_id = {
            let mut state = ctx.shared.state.lock().unwrap();
            let dive_id = state.next_id;
            state.next_id += 2;
            state.queue.push(QueuedNode {
                bound,
                id: dive_id + 1,
                depth: node.depth + 1,
                chain: Some(Arc::new(sibling)),
            });
            state.in_flight[w] = Some(bound);
            ctx.shared.cv.notify_all();
            dive_id
        };
        node = QueuedNode {
            bound,
            id: dive_id,
            depth: node.depth + 1,
            chain: Some(Arc::new(dive)),
        };
    }
}

/// Count a fathomed node (infeasible or pruned).
fn count_fathomed(ctx: &WorkerCtx, node: &QueuedNode, cuts: Vec<relax::CutRecord>, lps: u64) {
    let mut state = ctx.shared.state.lock().unwrap();
    state.processed += 1;
    state.lp_solves += lps;
    state.pool.merge(cuts);
    log::debug!(
        "node={} bound={:.6} incumbent={:.6} gap={:.3e} open={} (fathomed)",
        node.id,
        state.global_bound(),
        state.primal(),
        state.gap().unwrap_or(f64::INFINITY),
        state.queue.len()
    );
    if check_limits(ctx, &mut state) {
        ctx.shared.cv.notify_all();
    }
}

/// Nodes whose LP failed twice are split down the middle of their widest box
/// so the search still makes progress; both children keep the parent bound.
fn blind_split(
    ctx: &WorkerCtx,
    node: QueuedNode,
    boxes: Vec<(f64, f64)>,
    cuts: Vec<relax::CutRecord>,
    lps: u64,
) {
    let widest = boxes
        .iter()
        .enumerate()
        .max_by(|a, b| (a.1 .1 - a.1 .0).total_cmp(&(b.1 .1 - b.1 .0)))
        .map(|(var, &(lo, hi))| (var, lo, hi));
    let mut state = ctx.shared.state.lock().unwrap();
    state.processed += 1;
    state.lp_solves += lps;
    state.pool.merge(cuts);
    let Some((var, lo, hi)) = widest else { return };
    if hi - lo < 1e-9 {
        return;
    }
    let mid = 0.5 * (lo + hi);
    for (lo2, hi2) in [(f64::NEG_INFINITY, mid), (mid, f64::INFINITY)] {
        let id = state.next_id;
        state.next_id += 1;
        state.queue.push(QueuedNode {
            bound: node.bound,
            id,
            depth: node.depth + 1,
            chain: Some(Arc::new(Decision {
                parent: node.chain.clone(),
                var,
                lo: lo2,
                hi: hi2,
            })),
        });
    }
    ctx.shared.cv.notify_all();
}

/// Objective value of a feasible operating point, internal (maximize) sense.
fn internal_value(ctx: &WorkerCtx, point: &OperatingPoint) -> f64 {
    let model = ctx.model;
    let dg = point.total_dg();
    let loss = point.total_loss(&model.case);
    let original = match model.objective_tag {
        crate::model::Objective::DgMax | crate::model::Objective::DgMaxLossCap(_) => dg,
        crate::model::Objective::LossMin => loss,
        crate::model::Objective::Weighted(rho) => rho * loss - (1.0 - rho) * dg,
    };
    if model.objective.maximize {
        original
    } else {
        -original
    }
}

/// Accept a leaf LP point as an incumbent when it is genuinely feasible for
/// the model variant.
fn accept_leaf(ctx: &WorkerCtx, x: &[f64]) -> Option<Best> {
    let model = ctx.model;
    let topology = model.extract_topology(x, INT_TOL)?;
    if convex_violation(model, ctx.cones, x) > 1e-6 {
        return None;
    }
    let point = model.extract_point(x, &topology);
    if model.variant == Variant::Exact {
        let report = residuals(&model.case, &topology, &point);
        if !report.exact_feasible(INCUMBENT_TOL) {
            return None;
        }
    }
    Some(Best { value: leaf_value(ctx, x), topology, point })
}

fn leaf_value(ctx: &WorkerCtx, x: &[f64]) -> f64 {
    let v = ctx.model.objective_value(x);
    if ctx.model.objective.maximize {
        v
    } else {
        -v
    }
}
