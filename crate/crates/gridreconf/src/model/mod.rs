//! ROPF model assembly.
//!
//! [`build_model`] turns a validated case into a [`ModelInstance`] in one of
//! three variants:
//!
//! - `exact`: reconfigurable DistFlow with every binary-continuous product
//!   linearized exactly and the voltage-current-flow coupling kept as
//!   bilinear equalities `w_n·ℓ_n = P_n² + Q_n²` (decomposed into one product
//!   and two square terms per bus for the branch-and-bound engine);
//! - `conic`: the same model with the coupling relaxed to rotated
//!   second-order-cone inequalities;
//! - `lindistflow`: the loss-free linear approximation with a surrogate
//!   current limit in place of the dropped `ℓ` variables.

pub mod bounds;
pub mod linearize;
pub mod residuals;

pub use bounds::{derive_flow_bounds, BoundsError, FlowBounds};
pub use linearize::{
    linearize_switch_product, mccormick_envelope, square_envelope, square_tangent, LinearizeError,
};
pub use residuals::{residuals, ResidualReport};

use crate::lp::{LinRow, RowOp};
use crate::netcase::{NetworkCase, ValidationReport, SLACK};
use crate::radiality::{self, SwitchTopology};
use serde::Serialize;
use thiserror::Error;

/// Model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Exact,
    Conic,
    LinDistFlow,
}

/// Objective selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Objective {
    /// Maximize total DG active power.
    DgMax,
    /// Minimize total line loss.
    LossMin,
    /// Minimize `ρ·loss − (1−ρ)·ΣpG`.
    Weighted(f64),
    /// Maximize DG subject to a total-loss cap.
    DgMaxLossCap(f64),
}

/// Continuous network state for every bus and its incoming line.
///
/// Line quantities are indexed by the child bus: `p_line[n]` is the active
/// power flowing from `parent[n]` toward `n`, measured at the parent, and
/// `ell[n]` the squared current on that line. Slack entries are zero.
#[derive(Debug, Clone, Serialize)]
pub struct OperatingPoint {
    pub nu: Vec<f64>,
    pub ell: Vec<f64>,
    pub p_line: Vec<f64>,
    pub q_line: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub parent: Vec<Option<usize>>,
}

impl OperatingPoint {
    pub fn total_dg(&self) -> f64 {
        self.p_gen.iter().sum()
    }

    /// Total line loss `Σ r_n ℓ_n` given the case impedances.
    pub fn total_loss(&self, case: &NetworkCase) -> f64 {
        let mut loss = 0.0;
        for bus in 1..case.n_buses() {
            if let Some(parent) = self.parent[bus] {
                if let Some(l) = case.line_between(parent, bus) {
                    loss += case.lines[l].r * self.ell[bus];
                }
            }
        }
        loss
    }
}

/// What a variable stands for; used by dumps and extraction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Nu(usize),
    Ell(usize),
    PLine(usize),
    QLine(usize),
    PGen(usize),
    QGen(usize),
    Pi(usize, usize),
    Flow(usize, usize),
    ZP(usize, usize),
    ZQ(usize, usize),
    ZL(usize, usize),
    ZNu(usize, usize),
    W(usize),
    S(usize),
    Sp(usize),
    Sq(usize),
}

impl std::fmt::Display for VarKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            VarKind::Nu(b) => write!(f, "nu[{b}]"),
            VarKind::Ell(b) => write!(f, "ell[{b}]"),
            VarKind::PLine(b) => write!(f, "P[{b}]"),
            VarKind::QLine(b) => write!(f, "Q[{b}]"),
            VarKind::PGen(b) => write!(f, "pG[{b}]"),
            VarKind::QGen(b) => write!(f, "qG[{b}]"),
            VarKind::Pi(a, b) => write!(f, "pi[{a}->{b}]"),
            VarKind::Flow(a, b) => write!(f, "f[{a}->{b}]"),
            VarKind::ZP(a, b) => write!(f, "zP[{a}->{b}]"),
            VarKind::ZQ(a, b) => write!(f, "zQ[{a}->{b}]"),
            VarKind::ZL(a, b) => write!(f, "zL[{a}->{b}]"),
            VarKind::ZNu(a, b) => write!(f, "zNu[{a}->{b}]"),
            VarKind::W(b) => write!(f, "w[{b}]"),
            VarKind::S(b) => write!(f, "s[{b}]"),
            VarKind::Sp(b) => write!(f, "sp[{b}]"),
            VarKind::Sq(b) => write!(f, "sq[{b}]"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct VarDef {
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
    pub binary: bool,
}

/// An exactly-linearized binary-continuous product `z = π·x`.
#[derive(Debug, Clone, Copy)]
pub struct ProductTerm {
    pub pi: usize,
    pub x: usize,
    pub z: usize,
}

/// The bilinear equality of one bus, `s = w·ℓ` with `s = sp + sq`,
/// `sp = P²`, `sq = Q²` (one group per reconfigurable DistFlow coupling row).
#[derive(Debug, Clone, Copy)]
pub struct BilinearGroup {
    pub bus: usize,
    pub s: usize,
    pub w: usize,
    pub ell: usize,
    pub sp: usize,
    pub p: usize,
    pub sq: usize,
    pub q: usize,
    /// Row index of the linking equality `s − sp − sq = 0`.
    pub link_row: usize,
}

/// One continuous bilinear relation `w = u·v` handed to the engine
/// (`u == v` marks a square).
#[derive(Debug, Clone, Copy)]
pub struct BilinearTerm {
    pub w: usize,
    pub u: usize,
    pub v: usize,
}

/// Rotated second-order cone `w·ℓ ≥ P² + Q²` (conic variant).
#[derive(Debug, Clone, Copy)]
pub struct RotatedConeRow {
    pub bus: usize,
    pub w: usize,
    pub ell: usize,
    pub p: usize,
    pub q: usize,
}

/// Convex quadratic-under-linear row `p² + q² ≤ Σ lin·x + c`; covers the
/// inverter capacity circle (empty `lin`) and the LinDistFlow surrogate
/// current limit.
#[derive(Debug, Clone)]
pub struct QuadRow {
    pub bus: usize,
    pub p: usize,
    pub q: usize,
    pub lin: Vec<(usize, f64)>,
    pub c: f64,
}

#[derive(Debug, Clone)]
pub struct ObjectiveSpec {
    pub maximize: bool,
    pub coeffs: Vec<(usize, f64)>,
}

/// Mapping between the network and the variable space.
#[derive(Debug, Clone)]
pub struct ModelIndex {
    /// Directed arcs `(parent, child)`, both orientations of every
    /// `alpha_ub = 1` line, in radiality-block order.
    pub arcs: Vec<(usize, usize)>,
    pub line_of_arc: Vec<usize>,
    pub nu: Vec<usize>,
    pub ell: Vec<Option<usize>>,
    pub p_line: Vec<Option<usize>>,
    pub q_line: Vec<Option<usize>>,
    pub p_gen: Vec<Option<usize>>,
    pub q_gen: Vec<Option<usize>>,
    pub pi: Vec<usize>,
    pub f: Vec<usize>,
    pub z_p: Vec<Option<usize>>,
    pub z_q: Vec<Option<usize>>,
    pub z_l: Vec<Option<usize>>,
    pub z_nu: Vec<Option<usize>>,
    pub w: Vec<Option<usize>>,
}

/// A fully assembled optimization model.
#[derive(Debug, Clone)]
pub struct ModelInstance {
    pub case: NetworkCase,
    pub variant: Variant,
    pub objective_tag: Objective,
    pub k_max: u32,
    pub vars: Vec<VarDef>,
    pub rows: Vec<LinRow>,
    pub products: Vec<ProductTerm>,
    pub bilinear_groups: Vec<BilinearGroup>,
    pub cones: Vec<RotatedConeRow>,
    pub quads: Vec<QuadRow>,
    pub objective: ObjectiveSpec,
    pub index: ModelIndex,
    pub flow_bounds: FlowBounds,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("case failed validation: {0:?}")]
    InvalidCase(Box<ValidationReport>),
    #[error(transparent)]
    Bounds(#[from] BoundsError),
    #[error("objective {objective:?} is not available for variant {variant:?}: {reason}")]
    IncompatibleObjective { variant: Variant, objective: Objective, reason: String },
    #[error("invalid parameter: {0}")]
    BadParameter(String),
}

/// Assemble the ROPF model for a validated case.
pub fn build_model(
    case: &NetworkCase,
    k_max: u32,
    variant: Variant,
    objective: Objective,
) -> Result<ModelInstance, ModelError> {
    let report = case.validate();
    if !report.is_ok() {
        return Err(ModelError::InvalidCase(Box::new(report)));
    }
    match objective {
        Objective::Weighted(rho) if !(0.0..=1.0).contains(&rho) => {
            return Err(ModelError::BadParameter(format!("weighted rho {rho} outside [0, 1]")));
        }
        Objective::DgMaxLossCap(cap) if cap < 0.0 => {
            return Err(ModelError::BadParameter(format!("loss cap {cap} negative")));
        }
        _ => {}
    }
    if variant == Variant::LinDistFlow
        && !matches!(objective, Objective::DgMax)
    {
        return Err(ModelError::IncompatibleObjective {
            variant,
            objective,
            reason: "the loss term is absent from the LinDistFlow model".into(),
        });
    }

    let fb = derive_flow_bounds(case)?;
    let n_buses = case.n_buses();
    let block = radiality::build_radiality_block(case);
    let arcs = block.arcs.clone();
    let line_of_arc = block.line_of_arc.clone();
    let num_arcs = arcs.len();
    let has_ell = variant != Variant::LinDistFlow;
    let has_w = variant != Variant::LinDistFlow;

    let mut vars: Vec<VarDef> = Vec::new();
    let push = |kind: VarKind, lo: f64, hi: f64, binary: bool, vars: &mut Vec<VarDef>| {
        vars.push(VarDef { kind, lo, hi, binary });
        vars.len() - 1
    };

    let mut index = ModelIndex {
        arcs: arcs.clone(),
        line_of_arc: line_of_arc.clone(),
        nu: vec![usize::MAX; n_buses],
        ell: vec![None; n_buses],
        p_line: vec![None; n_buses],
        q_line: vec![None; n_buses],
        p_gen: vec![None; n_buses],
        q_gen: vec![None; n_buses],
        pi: vec![usize::MAX; num_arcs],
        f: vec![usize::MAX; num_arcs],
        z_p: vec![None; num_arcs],
        z_q: vec![None; num_arcs],
        z_l: vec![None; num_arcs],
        z_nu: vec![None; num_arcs],
        w: vec![None; n_buses],
    };

    for bus in 0..n_buses {
        let (lo, hi) = if bus == SLACK {
            (1.0, 1.0)
        } else {
            (case.buses[bus].v_min_sq, case.buses[bus].v_max_sq)
        };
        index.nu[bus] = push(VarKind::Nu(bus), lo, hi, false, &mut vars);
    }
    for bus in 1..n_buses {
        if has_ell {
            index.ell[bus] = Some(push(VarKind::Ell(bus), 0.0, fb.ell_u[bus], false, &mut vars));
        }
        index.p_line[bus] = Some(push(VarKind::PLine(bus), -fb.b[bus], fb.b[bus], false, &mut vars));
        index.q_line[bus] = Some(push(VarKind::QLine(bus), -fb.b[bus], fb.b[bus], false, &mut vars));
    }
    for bus in 1..n_buses {
        if let Some(dg) = &case.buses[bus].dg {
            index.p_gen[bus] = Some(push(VarKind::PGen(bus), dg.p_min, dg.p_max, false, &mut vars));
            index.q_gen[bus] = Some(push(VarKind::QGen(bus), dg.q_min, dg.q_max, false, &mut vars));
        }
    }
    for (a, &(from, to)) in arcs.iter().enumerate() {
        let hi = if to == SLACK { 0.0 } else { 1.0 };
        index.pi[a] = push(VarKind::Pi(from, to), 0.0, hi, true, &mut vars);
    }
    for (a, &(from, to)) in arcs.iter().enumerate() {
        index.f[a] = push(VarKind::Flow(from, to), 0.0, case.n() as f64, false, &mut vars);
    }
    for (a, &(from, to)) in arcs.iter().enumerate() {
        if to == SLACK {
            continue;
        }
        let b = fb.b[to];
        index.z_p[a] = Some(push(VarKind::ZP(from, to), -b, b, false, &mut vars));
        index.z_q[a] = Some(push(VarKind::ZQ(from, to), -b, b, false, &mut vars));
        if has_ell {
            index.z_l[a] =
                Some(push(VarKind::ZL(from, to), 0.0, fb.ell_u[to], false, &mut vars));
        }
        let (nu_lo, nu_hi) = if from == SLACK {
            (1.0, 1.0)
        } else {
            (case.buses[from].v_min_sq, case.buses[from].v_max_sq)
        };
        index.z_nu[a] =
            Some(push(VarKind::ZNu(from, to), 0.0_f64.min(nu_lo), nu_hi.max(0.0), false, &mut vars));
    }
    if has_w {
        for bus in 1..n_buses {
            index.w[bus] = Some(push(VarKind::W(bus), fb.nu_l[bus], fb.nu_u[bus], false, &mut vars));
        }
    }

    let mut groups: Vec<BilinearGroup> = Vec::new();
    let mut s_vars = vec![None::<usize>; n_buses];
    let mut sp_vars = vec![None::<usize>; n_buses];
    let mut sq_vars = vec![None::<usize>; n_buses];
    if variant == Variant::Exact {
        for bus in 1..n_buses {
            let s_hi = fb.nu_u[bus] * fb.ell_u[bus];
            s_vars[bus] = Some(push(VarKind::S(bus), 0.0, s_hi, false, &mut vars));
            let b2 = fb.b[bus] * fb.b[bus];
            sp_vars[bus] = Some(push(VarKind::Sp(bus), 0.0, b2, false, &mut vars));
            sq_vars[bus] = Some(push(VarKind::Sq(bus), 0.0, b2, false, &mut vars));
        }
    }

    // Rows.
    let mut rows: Vec<LinRow> = Vec::new();

    // (2): per-line switch-status bounds on α = π_ab + π_ba.
    let mut seen_line = vec![false; case.lines.len()];
    for (a, &l) in line_of_arc.iter().enumerate() {
        if seen_line[l] {
            continue;
        }
        seen_line[l] = true;
        let (from, to) = arcs[a];
        let rev = arcs.iter().position(|&(x, y)| (x, y) == (to, from)).unwrap();
        let coeffs = vec![(index.pi[a], 1.0), (index.pi[rev], 1.0)];
        if case.lines[l].alpha_lb == 1 {
            rows.push(LinRow::new(coeffs, RowOp::Eq, 1.0));
        } else {
            rows.push(LinRow::new(coeffs, RowOp::Le, 1.0));
        }
    }

    // Every non-slack bus has exactly one parent in a rooted spanning tree;
    // imposing it directly strengthens the relaxation and pins the box of w.
    for bus in 1..n_buses {
        let coeffs: Vec<_> = arcs
            .iter()
            .enumerate()
            .filter(|&(_, &(_, to))| to == bus)
            .map(|(a, _)| (index.pi[a], 1.0))
            .collect();
        rows.push(LinRow::new(coeffs, RowOp::Eq, 1.0));
    }

    // (3): single-commodity-flow radiality, remapped onto model variables.
    for row in &block.rows {
        let coeffs = row
            .coeffs
            .iter()
            .map(|&(local, a)| {
                let mapped = if local < num_arcs {
                    index.pi[local]
                } else {
                    index.f[local - num_arcs]
                };
                (mapped, a)
            })
            .collect();
        rows.push(LinRow::new(coeffs, row.op, row.rhs));
    }

    // (4): switch-change budget.
    let budget = radiality::build_switch_budget(case, &block, k_max);
    rows.push(LinRow::new(
        budget.coeffs.iter().map(|&(local, a)| (index.pi[local], a)).collect(),
        budget.op,
        budget.rhs,
    ));

    // (6a), (6b): reconfigurable power balance.
    for bus in 1..n_buses {
        let mut p_row = vec![(index.p_line[bus].unwrap(), 1.0)];
        let mut q_row = vec![(index.q_line[bus].unwrap(), 1.0)];
        if let Some(pg) = index.p_gen[bus] {
            p_row.push((pg, 1.0));
            q_row.push((index.q_gen[bus].unwrap(), 1.0));
        }
        for (a, &(from, to)) in arcs.iter().enumerate() {
            if from == bus && to != SLACK {
                // − Σ π_bus,k · P_k  (flows continuing to children)
                p_row.push((index.z_p[a].unwrap(), -1.0));
                q_row.push((index.z_q[a].unwrap(), -1.0));
            }
            if to == bus && has_ell {
                let line = &case.lines[line_of_arc[a]];
                p_row.push((index.z_l[a].unwrap(), -line.r));
                q_row.push((index.z_l[a].unwrap(), -line.x));
            }
        }
        rows.push(LinRow::new(p_row, RowOp::Eq, case.buses[bus].p_load));
        rows.push(LinRow::new(q_row, RowOp::Eq, case.buses[bus].q_load));
    }

    // (6c): reconfigurable voltage drop.
    for bus in 1..n_buses {
        let mut row = vec![(index.nu[bus], -1.0)];
        for (a, &(_, to)) in arcs.iter().enumerate() {
            if to != bus {
                continue;
            }
            let line = &case.lines[line_of_arc[a]];
            row.push((index.z_nu[a].unwrap(), 1.0));
            row.push((index.z_p[a].unwrap(), -2.0 * line.r));
            row.push((index.z_q[a].unwrap(), -2.0 * line.x));
            if has_ell {
                row.push((index.z_l[a].unwrap(), line.r * line.r + line.x * line.x));
            }
        }
        rows.push(LinRow::new(row, RowOp::Eq, 0.0));
    }

    // w_n = Σ π_kn ν_k (parent voltage seen by bus n).
    if has_w {
        for bus in 1..n_buses {
            let mut row = vec![(index.w[bus].unwrap(), 1.0)];
            for (a, &(_, to)) in arcs.iter().enumerate() {
                if to == bus {
                    row.push((index.z_nu[a].unwrap(), -1.0));
                }
            }
            rows.push(LinRow::new(row, RowOp::Eq, 0.0));
        }
    }

    // (6d): s = sp + sq with s = w·ℓ, sp = P², sq = Q² (exact variant).
    if variant == Variant::Exact {
        for bus in 1..n_buses {
            let link_row = rows.len();
            rows.push(LinRow::new(
                vec![
                    (s_vars[bus].unwrap(), 1.0),
                    (sp_vars[bus].unwrap(), -1.0),
                    (sq_vars[bus].unwrap(), -1.0),
                ],
                RowOp::Eq,
                0.0,
            ));
            groups.push(BilinearGroup {
                bus,
                s: s_vars[bus].unwrap(),
                w: index.w[bus].unwrap(),
                ell: index.ell[bus].unwrap(),
                sp: sp_vars[bus].unwrap(),
                p: index.p_line[bus].unwrap(),
                sq: sq_vars[bus].unwrap(),
                q: index.q_line[bus].unwrap(),
                link_row,
            });
        }
    }

    // (9): realized current limit ℓ_n ≤ Σ π_kn ℓ̄_kn.
    if has_ell {
        for bus in 1..n_buses {
            let mut row = vec![(index.ell[bus].unwrap(), 1.0)];
            for (a, &(_, to)) in arcs.iter().enumerate() {
                if to == bus {
                    row.push((index.pi[a], -case.lines[line_of_arc[a]].i_max_sq));
                }
            }
            rows.push(LinRow::new(row, RowOp::Le, 0.0));
        }
    }

    // (7c): ±q ≤ tan(acos(pf))·p per DG bus.
    for bus in 1..n_buses {
        if let (Some(pg), Some(qg), Some(dg)) =
            (index.p_gen[bus], index.q_gen[bus], case.buses[bus].dg.as_ref())
        {
            let tan = dg.pf_min.acos().tan();
            rows.push(LinRow::new(vec![(qg, 1.0), (pg, -tan)], RowOp::Le, 0.0));
            rows.push(LinRow::new(vec![(qg, -1.0), (pg, -tan)], RowOp::Le, 0.0));
        }
    }

    // Cone rows (conic) / surrogate current limit (lindistflow).
    let mut cones = Vec::new();
    let mut quads = Vec::new();
    if variant == Variant::Conic {
        for bus in 1..n_buses {
            cones.push(RotatedConeRow {
                bus,
                w: index.w[bus].unwrap(),
                ell: index.ell[bus].unwrap(),
                p: index.p_line[bus].unwrap(),
                q: index.q_line[bus].unwrap(),
            });
        }
    }
    if variant == Variant::LinDistFlow {
        // (15): (Σ π_kn ν_k)(Σ π_kn ℓ̄_kn) ≥ P² + Q²; the binary products
        // collapse to Σ ℓ̄_kn z^ν_kn because a bus has exactly one parent.
        for bus in 1..n_buses {
            let lin: Vec<_> = arcs
                .iter()
                .enumerate()
                .filter(|&(_, &(_, to))| to == bus)
                .map(|(a, _)| (index.z_nu[a].unwrap(), case.lines[line_of_arc[a]].i_max_sq))
                .collect();
            quads.push(QuadRow {
                bus,
                p: index.p_line[bus].unwrap(),
                q: index.q_line[bus].unwrap(),
                lin,
                c: 0.0,
            });
        }
    }
    // (7b): inverter apparent-power circle, all variants.
    for bus in 1..n_buses {
        if let (Some(pg), Some(qg), Some(dg)) =
            (index.p_gen[bus], index.q_gen[bus], case.buses[bus].dg.as_ref())
        {
            quads.push(QuadRow {
                bus,
                p: pg,
                q: qg,
                lin: Vec::new(),
                c: dg.capacity * dg.capacity,
            });
        }
    }

    // Exact binary-continuous products (Eq. 5 family), one set per arc with a
    // non-slack child.
    let mut products = Vec::new();
    for (a, &(_, to)) in arcs.iter().enumerate() {
        if to == SLACK {
            continue;
        }
        products.push(ProductTerm {
            pi: index.pi[a],
            x: index.p_line[to].unwrap(),
            z: index.z_p[a].unwrap(),
        });
        products.push(ProductTerm {
            pi: index.pi[a],
            x: index.q_line[to].unwrap(),
            z: index.z_q[a].unwrap(),
        });
        if has_ell {
            products.push(ProductTerm {
                pi: index.pi[a],
                x: index.ell[to].unwrap(),
                z: index.z_l[a].unwrap(),
            });
        }
        let (from, _) = arcs[a];
        products.push(ProductTerm {
            pi: index.pi[a],
            x: index.nu[from],
            z: index.z_nu[a].unwrap(),
        });
    }

    // Objective.
    let loss_coeffs = || -> Vec<(usize, f64)> {
        arcs.iter()
            .enumerate()
            .filter_map(|(a, &(_, to))| {
                (to != SLACK).then(|| {
                    (index.z_l[a].unwrap(), case.lines[line_of_arc[a]].r)
                })
            })
            .collect()
    };
    let dg_coeffs: Vec<(usize, f64)> =
        (1..n_buses).filter_map(|bus| index.p_gen[bus].map(|v| (v, 1.0))).collect();
    let objective_spec = match objective {
        Objective::DgMax => ObjectiveSpec { maximize: true, coeffs: dg_coeffs },
        Objective::LossMin => ObjectiveSpec { maximize: false, coeffs: loss_coeffs() },
        Objective::Weighted(rho) => {
            let mut coeffs: Vec<(usize, f64)> =
                loss_coeffs().into_iter().map(|(v, a)| (v, rho * a)).collect();
            coeffs.extend(dg_coeffs.iter().map(|&(v, _)| (v, -(1.0 - rho))));
            ObjectiveSpec { maximize: false, coeffs }
        }
        Objective::DgMaxLossCap(cap) => {
            rows.push(LinRow::new(loss_coeffs(), RowOp::Le, cap));
            ObjectiveSpec { maximize: true, coeffs: dg_coeffs }
        }
    };

    Ok(ModelInstance {
        case: case.clone(),
        variant,
        objective_tag: objective,
        k_max,
        vars,
        rows,
        products,
        bilinear_groups: groups,
        cones,
        quads,
        objective: objective_spec,
        index,
        flow_bounds: fb,
    })
}

impl ModelInstance {
    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    /// Flattened bilinear relations for the engine: `(s, w·ℓ)`, `(sp, P²)`,
    /// `(sq, Q²)` per group.
    pub fn bilinear_terms(&self) -> Vec<BilinearTerm> {
        let mut terms = Vec::with_capacity(3 * self.bilinear_groups.len());
        for g in &self.bilinear_groups {
            terms.push(BilinearTerm { w: g.s, u: g.w, v: g.ell });
            terms.push(BilinearTerm { w: g.sp, u: g.p, v: g.p });
            terms.push(BilinearTerm { w: g.sq, u: g.q, v: g.q });
        }
        terms
    }

    /// Round the π variables of a point into a topology. `None` when any
    /// binary is fractional beyond `tol` or the pattern is not a tree.
    pub fn extract_topology(&self, x: &[f64], tol: f64) -> Option<SwitchTopology> {
        let mut closed = vec![false; self.case.lines.len()];
        for (a, &l) in self.index.line_of_arc.iter().enumerate() {
            let v = x[self.index.pi[a]];
            if (v - v.round()).abs() > tol {
                return None;
            }
            if v.round() == 1.0 {
                closed[l] = true;
            }
        }
        SwitchTopology::orient(&self.case, &closed)
    }

    /// Read the continuous state out of an LP point.
    pub fn extract_point(&self, x: &[f64], topology: &SwitchTopology) -> OperatingPoint {
        let n_buses = self.case.n_buses();
        let mut point = OperatingPoint {
            nu: (0..n_buses).map(|b| x[self.index.nu[b]]).collect(),
            ell: vec![0.0; n_buses],
            p_line: vec![0.0; n_buses],
            q_line: vec![0.0; n_buses],
            p_gen: vec![0.0; n_buses],
            q_gen: vec![0.0; n_buses],
            parent: topology.parent.clone(),
        };
        for bus in 1..n_buses {
            point.p_line[bus] = self.index.p_line[bus].map_or(0.0, |v| x[v]);
            point.q_line[bus] = self.index.q_line[bus].map_or(0.0, |v| x[v]);
            point.ell[bus] = match self.index.ell[bus] {
                Some(v) => x[v],
                // LinDistFlow has no current variables; report the implied
                // current at the perceived parent voltage.
                None => {
                    let parent_nu = topology.parent[bus].map_or(1.0, |p| point.nu[p]);
                    (point.p_line[bus].powi(2) + point.q_line[bus].powi(2)) / parent_nu.max(1e-9)
                }
            };
            point.p_gen[bus] = self.index.p_gen[bus].map_or(0.0, |v| x[v]);
            point.q_gen[bus] = self.index.q_gen[bus].map_or(0.0, |v| x[v]);
        }
        point
    }

    pub fn total_dg(&self, x: &[f64]) -> f64 {
        (1..self.case.n_buses())
            .filter_map(|bus| self.index.p_gen[bus].map(|v| x[v]))
            .sum()
    }

    /// Embed an operating point under a fixed radial topology into the full
    /// variable space: parent orientation to π, subtree sizes to the
    /// fictitious flows, products and bilinear terms to their exact values.
    pub fn embed_point(&self, topology: &SwitchTopology, point: &OperatingPoint) -> Vec<f64> {
        let n_buses = self.case.n_buses();
        let mut x = vec![0.0; self.num_vars()];
        for bus in 0..n_buses {
            x[self.index.nu[bus]] = point.nu[bus];
        }
        for bus in 1..n_buses {
            if let Some(v) = self.index.ell[bus] {
                x[v] = point.ell[bus];
            }
            if let Some(v) = self.index.p_line[bus] {
                x[v] = point.p_line[bus];
            }
            if let Some(v) = self.index.q_line[bus] {
                x[v] = point.q_line[bus];
            }
            if let Some(v) = self.index.p_gen[bus] {
                x[v] = point.p_gen[bus];
            }
            if let Some(v) = self.index.q_gen[bus] {
                x[v] = point.q_gen[bus];
            }
        }
        // Subtree sizes for the single-commodity flows.
        let mut subtree = vec![1.0_f64; n_buses];
        let mut order: Vec<usize> = (0..n_buses).collect();
        order.sort_by_key(|&b| {
            let mut depth = 0usize;
            let mut cur = b;
            while let Some(p) = topology.parent[cur] {
                cur = p;
                depth += 1;
            }
            std::cmp::Reverse(depth)
        });
        for &bus in &order {
            if let Some(p) = topology.parent[bus] {
                let add = subtree[bus];
                subtree[p] += add;
            }
        }
        for (a, &(from, to)) in self.index.arcs.iter().enumerate() {
            let closed = topology.parent[to] == Some(from);
            if closed {
                x[self.index.pi[a]] = 1.0;
                x[self.index.f[a]] = subtree[to];
            }
        }
        for t in &self.products {
            x[t.z] = x[t.pi] * x[t.x];
        }
        for bus in 1..n_buses {
            if let Some(w) = self.index.w[bus] {
                x[w] = topology.parent[bus].map_or(0.0, |p| point.nu[p]);
            }
        }
        for g in &self.bilinear_groups {
            x[g.s] = x[g.w] * x[g.ell];
            x[g.sp] = x[g.p] * x[g.p];
            x[g.sq] = x[g.q] * x[g.q];
        }
        x
    }

    /// Objective value at a point, in the declared optimization sense.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.coeffs.iter().map(|&(v, a)| a * x[v]).sum()
    }

    /// Debug dump of the assembled instance.
    pub fn dump_json(&self) -> String {
        #[derive(Serialize)]
        struct VarDump {
            kind: String,
            lo: f64,
            hi: f64,
            binary: bool,
        }
        #[derive(Serialize)]
        struct Dump<'a> {
            variant: Variant,
            objective: Objective,
            k_max: u32,
            num_vars: usize,
            num_rows: usize,
            num_products: usize,
            num_bilinear: usize,
            num_cones: usize,
            num_quads: usize,
            vars: Vec<VarDump>,
            rows: &'a [LinRow],
            maximize: bool,
            objective_coeffs: &'a [(usize, f64)],
        }
        let dump = Dump {
            variant: self.variant,
            objective: self.objective_tag,
            k_max: self.k_max,
            num_vars: self.vars.len(),
            num_rows: self.rows.len(),
            num_products: self.products.len(),
            num_bilinear: self.bilinear_groups.len(),
            num_cones: self.cones.len(),
            num_quads: self.quads.len(),
            vars: self
                .vars
                .iter()
                .map(|v| VarDump {
                    kind: v.kind.to_string(),
                    lo: v.lo,
                    hi: v.hi,
                    binary: v.binary,
                })
                .collect(),
            rows: &self.rows,
            maximize: self.objective.maximize,
            objective_coeffs: &self.objective.coeffs,
        };
        serde_json::to_string_pretty(&dump).expect("dump serialization cannot fail")
    }
}
