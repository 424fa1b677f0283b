//! Network case ingestion: parsing, validation and per-unit normalization.
//!
//! A [`NetworkCase`] is the single-phase-equivalent description of a
//! distribution network: buses with loads and optional DG ratings, candidate
//! lines with impedances, current ratings and switch bounds, plus the system
//! bases. All downstream modules assume a validated case in per-unit.

mod mcase;
mod native;

pub use mcase::parse_mcase;
pub use native::{parse_native, serialize_native, parse_switch_list};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of the slack bus. Bus ids are contiguous `0..=N` with 0 the slack.
pub const SLACK: usize = 0;

/// Floor applied to the resistance of zero-impedance lines (pu).
pub const R_FLOOR: f64 = 1e-6;

/// Squared current limit assigned to unrated lines (pu²); effectively
/// unlimited but finite so flow bounds stay finite.
pub const UNRATED_I_MAX_SQ: f64 = 1e4;

/// Inverter rating at a bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgRating {
    /// Active generation bounds (pu).
    pub p_min: f64,
    pub p_max: f64,
    /// Reactive generation bounds (pu).
    pub q_min: f64,
    pub q_max: f64,
    /// Apparent power rating (pu).
    pub capacity: f64,
    /// Minimum power factor in (0, 1].
    pub pf_min: f64,
}

/// A bus with its load and limits. Squared voltage limits are in pu².
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusData {
    pub id: usize,
    pub p_load: f64,
    pub q_load: f64,
    pub v_min_sq: f64,
    pub v_max_sq: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dg: Option<DgRating>,
}

/// A candidate line between two buses.
///
/// `alpha_lb`/`alpha_ub` bound the switch status (always-open, always-closed
/// or free); `alpha0` is the initial status used by the switch-change budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineData {
    pub from: usize,
    pub to: usize,
    /// Series resistance and reactance (pu).
    pub r: f64,
    pub x: f64,
    /// Squared current limit (pu²).
    pub i_max_sq: f64,
    pub switchable: bool,
    pub alpha_lb: u8,
    pub alpha_ub: u8,
    pub alpha0: u8,
}

impl LineData {
    /// The endpoint other than `bus`, if this line touches `bus`.
    pub fn other(&self, bus: usize) -> Option<usize> {
        if self.from == bus {
            Some(self.to)
        } else if self.to == bus {
            Some(self.from)
        } else {
            None
        }
    }

    pub fn touches(&self, a: usize, b: usize) -> bool {
        (self.from == a && self.to == b) || (self.from == b && self.to == a)
    }
}

/// Whether loads/generation describe the three-phase aggregate or one phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseMode {
    ThreePhaseAggregate,
    PerPhase,
}

/// Unit system the numeric fields are currently expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Units {
    #[default]
    PerUnit,
    /// Impedances in Ω, powers in MW/Mvar, current limits in A².
    Physical,
}

/// Direction for [`NetworkCase::phase_scale`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseScale {
    /// Three-phase aggregate → per-phase (divide powers by 3).
    Split,
    /// Per-phase → three-phase aggregate (multiply powers by 3).
    Merge,
}

/// An immutable network case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub buses: Vec<BusData>,
    pub lines: Vec<LineData>,
    /// MVA base.
    pub s_base_mva: f64,
    /// kV base (line-to-line).
    pub v_base_kv: f64,
    pub phase_mode: PhaseMode,
    #[serde(default)]
    pub units: Units,
}

/// Errors raised while constructing or transforming a case.
#[derive(Debug, Error)]
pub enum CaseError {
    #[error("syntax error at line {line}, column {col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("no slack bus (type-3 / id-0) found")]
    MissingSlack,
    #[error("duplicate slack bus: {0} and {1}")]
    DuplicateSlack(usize, usize),
    #[error("duplicate bus id {0}")]
    DuplicateBus(usize),
    #[error("base values must be positive: s_base={s_base}, v_base={v_base}")]
    NonPositiveBase { s_base: f64, v_base: f64 },
    #[error("case is in {0:?} units, expected {1:?}")]
    WrongUnits(Units, Units),
    #[error("phase scale {0:?} requires phase mode {1:?}")]
    WrongPhaseMode(PhaseScale, PhaseMode),
    #[error("unknown bus {0} referenced by a line")]
    UnknownBus(usize),
}

/// One violated case invariant. Violations are data, not errors.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonContiguousBusIds,
    MissingSlack,
    VoltageLimitsInverted { bus: usize },
    DgBoundsInvalid { bus: usize, reason: String },
    ZeroImpedance { line: usize },
    NegativeImpedance { line: usize },
    NonPositiveCurrentLimit { line: usize },
    AlphaBoundsInvalid { line: usize },
    NonSwitchableFreeAlpha { line: usize },
    ParallelDuplicate { from: usize, to: usize },
    AllClosedDisconnected { components: usize },
    TooFewLines { lines: usize, needed: usize },
    NotPerUnit,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::NonContiguousBusIds => write!(f, "bus ids are not contiguous 0..N"),
            Violation::MissingSlack => write!(f, "no bus with id 0"),
            Violation::VoltageLimitsInverted { bus } => {
                write!(f, "bus {bus}: v_min_sq >= v_max_sq")
            }
            Violation::DgBoundsInvalid { bus, reason } => write!(f, "bus {bus}: {reason}"),
            Violation::ZeroImpedance { line } => write!(f, "line {line}: r = x = 0"),
            Violation::NegativeImpedance { line } => write!(f, "line {line}: negative r or x"),
            Violation::NonPositiveCurrentLimit { line } => {
                write!(f, "line {line}: i_max_sq <= 0")
            }
            Violation::AlphaBoundsInvalid { line } =>

                write!(f, "line {line}: alpha bounds/initial status inconsistent"),
            Violation::NonSwitchableFreeAlpha { line } => {
                write!(f, "line {line}: non-switchable but alpha_lb < alpha_ub")
            }
            Violation::ParallelDuplicate { from, to } => {
                write!(f, "parallel duplicate line between {from} and {to}")
            }
            Violation::AllClosedDisconnected { components } => {
                write!(f, "all-closed graph has {components} components")
            }
            Violation::TooFewLines { lines, needed } => {
                write!(f, "{lines} lines cannot span {needed} non-slack buses")
            }
            Violation::NotPerUnit => write!(f, "case is not in per-unit"),
        }
    }
}

/// Outcome of [`NetworkCase::validate`]. `notes` carry non-blocking
/// normalization remarks (floored impedances, unrated lines).
#[derive(Debug, Clone, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Supported case text formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    MCase,
    Native,
}

/// Parse case text in the given format into a validated per-unit case.
///
/// For m-case input, branches with status 0 become switchable lines that are
/// initially open; closed branches stay non-switchable unless upgraded by a
/// switch list afterwards (see [`parse_switch_list`] and
/// [`NetworkCase::apply_switch_list`]).
pub fn parse_case(text: &str, format: CaseFormat) -> Result<NetworkCase, CaseError> {
    match format {
        CaseFormat::MCase => parse_mcase(text),
        CaseFormat::Native => parse_native(text),
    }
}

impl NetworkCase {
    /// Number of non-slack buses (`N`).
    pub fn n(&self) -> usize {
        self.buses.len().saturating_sub(1)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    /// Current base in amperes, `I_base = S_base / (√3 · V_base)`.
    pub fn i_base_amps(&self) -> f64 {
        self.s_base_mva * 1e6 / (3f64.sqrt() * self.v_base_kv * 1e3)
    }

    /// Line indices incident to `bus` with `alpha_ub = 1`.
    pub fn candidate_lines(&self, bus: usize) -> impl Iterator<Item = usize> + '_ {
        self.lines
            .iter()
            .enumerate()
            .filter(move |(_, l)| l.alpha_ub == 1 && l.other(bus).is_some())
            .map(|(i, _)| i)
    }

    pub fn line_between(&self, a: usize, b: usize) -> Option<usize> {
        self.lines.iter().position(|l| l.touches(a, b))
    }

    /// Mark the listed closed lines as switchable. Pairs not matching any
    /// line are reported as errors.
    pub fn apply_switch_list(&mut self, pairs: &[(usize, usize)]) -> Result<(), CaseError> {
        for &(a, b) in pairs {
            let idx = self
                .line_between(a, b)
                .ok_or(CaseError::UnknownBus(if self.buses.iter().any(|x| x.id == a) { b } else { a }))?;
            let line = &mut self.lines[idx];
            line.switchable = true;
            line.alpha_lb = 0;
            line.alpha_ub = 1;
        }
        Ok(())
    }

    /// Convert a physical-unit case to per-unit. Idempotent on per-unit cases.
    pub fn to_per_unit(&self, s_base_mva: f64, v_base_kv: f64) -> Result<NetworkCase, CaseError> {
        if s_base_mva <= 0.0 || v_base_kv <= 0.0 {
            return Err(CaseError::NonPositiveBase { s_base: s_base_mva, v_base: v_base_kv });
        }
        if self.units == Units::PerUnit {
            return Ok(self.clone());
        }
        let z_base = v_base_kv * v_base_kv / s_base_mva; // Ω
        let i_base = s_base_mva * 1e3 / (3f64.sqrt() * v_base_kv); // A
        let mut out = self.clone();
        out.s_base_mva = s_base_mva;
        out.v_base_kv = v_base_kv;
        out.units = Units::PerUnit;
        for bus in &mut out.buses {
            bus.p_load /= s_base_mva;
            bus.q_load /= s_base_mva;
            if let Some(dg) = &mut bus.dg {
                dg.p_min /= s_base_mva;
                dg.p_max /= s_base_mva;
                dg.q_min /= s_base_mva;
                dg.q_max /= s_base_mva;
                dg.capacity /= s_base_mva;
            }
        }
        for line in &mut out.lines {
            line.r /= z_base;
            line.x /= z_base;
            line.i_max_sq /= i_base * i_base;
        }
        Ok(out)
    }

    /// Inverse of [`NetworkCase::to_per_unit`].
    pub fn to_physical(&self) -> Result<NetworkCase, CaseError> {
        if self.units == Units::Physical {
            return Ok(self.clone());
        }
        let s = self.s_base_mva;
        let v = self.v_base_kv;
        if s <= 0.0 || v <= 0.0 {
            return Err(CaseError::NonPositiveBase { s_base: s, v_base: v });
        }
        let z_base = v * v / s;
        let i_base = s * 1e3 / (3f64.sqrt() * v);
        let mut out = self.clone();
        out.units = Units::Physical;
        for bus in &mut out.buses {
            bus.p_load *= s;
            bus.q_load *= s;
            if let Some(dg) = &mut bus.dg {
                dg.p_min *= s;
                dg.p_max *= s;
                dg.q_min *= s;
                dg.q_max *= s;
                dg.capacity *= s;
            }
        }
        for line in &mut out.lines {
            line.r *= z_base;
            line.x *= z_base;
            line.i_max_sq *= i_base * i_base;
        }
        Ok(out)
    }

    /// Scale between three-phase aggregate and per-phase representations by
    /// dividing (split) or multiplying (merge) all loads, DG bounds and
    /// capacities by three. Impedances and current ratings are per-phase
    /// quantities already and stay unchanged.
    pub fn phase_scale(&self, direction: PhaseScale) -> Result<NetworkCase, CaseError> {
        let (expect, next, factor) = match direction {
            PhaseScale::Split => (PhaseMode::ThreePhaseAggregate, PhaseMode::PerPhase, 1.0 / 3.0),
            PhaseScale::Merge => (PhaseMode::PerPhase, PhaseMode::ThreePhaseAggregate, 3.0),
        };
        if self.phase_mode != expect {
            return Err(CaseError::WrongPhaseMode(direction, self.phase_mode));
        }
        let mut out = self.clone();
        out.phase_mode = next;
        for bus in &mut out.buses {
            bus.p_load *= factor;
            bus.q_load *= factor;
            if let Some(dg) = &mut bus.dg {
                dg.p_min *= factor;
                dg.p_max *= factor;
                dg.q_min *= factor;
                dg.q_max *= factor;
                dg.capacity *= factor;
            }
        }
        Ok(out)
    }

    /// Check every case invariant. An empty violation list means the case is
    /// accepted by the model and solver modules.
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.units != Units::PerUnit {
            report.violations.push(Violation::NotPerUnit);
        }
        // Bus ids contiguous 0..N, exactly one slack.
        let n_buses = self.buses.len();
        let mut seen = vec![false; n_buses];
        let mut contiguous = true;
        for bus in &self.buses {
            if bus.id >= n_buses || seen[bus.id] {
                contiguous = false;
                break;
            }
            seen[bus.id] = true;
        }
        if !contiguous {
            report.violations.push(Violation::NonContiguousBusIds);
        } else if n_buses == 0 || !seen[SLACK] {
            report.violations.push(Violation::MissingSlack);
        }
        for bus in &self.buses {
            if bus.v_min_sq >= bus.v_max_sq {
                report.violations.push(Violation::VoltageLimitsInverted { bus: bus.id });
            }
            if let Some(dg) = &bus.dg {
                if !(0.0 <= dg.p_min && dg.p_min <= dg.p_max) {
                    report.violations.push(Violation::DgBoundsInvalid {
                        bus: bus.id,
                        reason: format!("require 0 <= p_min <= p_max, got [{}, {}]", dg.p_min, dg.p_max),
                    });
                }
                if dg.q_min > dg.q_max {
                    report.violations.push(Violation::DgBoundsInvalid {
                        bus: bus.id,
                        reason: format!("q_min {} > q_max {}", dg.q_min, dg.q_max),
                    });
                }
                if dg.capacity <= 0.0 {
                    report.violations.push(Violation::DgBoundsInvalid {
                        bus: bus.id,
                        reason: format!("capacity {} <= 0", dg.capacity),
                    });
                }
                if !(dg.pf_min > 0.0 && dg.pf_min <= 1.0) {
                    report.violations.push(Violation::DgBoundsInvalid {
                        bus: bus.id,
                        reason: format!("pf_min {} outside (0, 1]", dg.pf_min),
                    });
                }
            }
        }
        for (i, line) in self.lines.iter().enumerate() {
            if line.r < 0.0 || line.x < 0.0 {
                report.violations.push(Violation::NegativeImpedance { line: i });
            }
            if line.r + line.x <= 0.0 {
                report.violations.push(Violation::ZeroImpedance { line: i });
            } else if line.r < R_FLOOR && line.x > 0.0 && line.r > 0.0 {
                report.notes.push(format!("line {i}: resistance near floor ({:.1e} pu)", line.r));
            }
            if line.i_max_sq <= 0.0 {
                report.violations.push(Violation::NonPositiveCurrentLimit { line: i });
            }
            if line.i_max_sq >= UNRATED_I_MAX_SQ {
                report.notes.push(format!("line {i}: unrated (default current limit applied)"));
            }
            let ok_alpha = line.alpha_lb <= line.alpha0
                && line.alpha0 <= line.alpha_ub
                && line.alpha_ub <= 1;
            if !ok_alpha {
                report.violations.push(Violation::AlphaBoundsInvalid { line: i });
            }
            if !line.switchable && line.alpha_lb != line.alpha_ub {
                report.violations.push(Violation::NonSwitchableFreeAlpha { line: i });
            }
            if line.from >= n_buses || line.to >= n_buses || line.from == line.to {
                report.violations.push(Violation::AlphaBoundsInvalid { line: i });
            }
        }
        // Parallel duplicates should have been merged at ingest.
        for (i, a) in self.lines.iter().enumerate() {
            for b in self.lines.iter().skip(i + 1) {
                if b.touches(a.from, a.to) {
                    report
                        .violations
                        .push(Violation::ParallelDuplicate { from: a.from, to: a.to });
                }
            }
        }
        if contiguous && n_buses > 0 {
            let n = self.n();
            if self.lines.len() < n {
                report.violations.push(Violation::TooFewLines { lines: self.lines.len(), needed: n });
            }
            // Connectivity with every alpha_ub = 1 line closed.
            let mut uf = UnionFind::new(n_buses);
            for line in &self.lines {
                if line.alpha_ub == 1 && line.from < n_buses && line.to < n_buses {
                    uf.union(line.from, line.to);
                }
            }
            let components = uf.component_count();
            if components > 1 {
                report.violations.push(Violation::AllClosedDisconnected { components });
            }
        }
        report
    }
}

/// Plain union-find over dense indices.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut a: usize) -> usize {
        while self.parent[a] != a {
            self.parent[a] = self.parent[self.parent[a]];
            a = self.parent[a];
        }
        a
    }

    /// Returns false if `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }

    pub fn component_count(&mut self) -> usize {
        let n = self.parent.len();
        (0..n).filter(|&i| self.find(i) == i).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_bus_case() -> NetworkCase {
        NetworkCase {
            buses: vec![
                BusData { id: 0, p_load: 0.0, q_load: 0.0, v_min_sq: 0.9025, v_max_sq: 1.1025, dg: None },
                BusData { id: 1, p_load: 0.1, q_load: 0.0, v_min_sq: 0.9025, v_max_sq: 1.1025, dg: None },
            ],
            lines: vec![LineData {
                from: 0,
                to: 1,
                r: 0.01,
                x: 0.0,
                i_max_sq: 1.0,
                switchable: false,
                alpha_lb: 1,
                alpha_ub: 1,
                alpha0: 1,
            }],
            s_base_mva: 10.0,
            v_base_kv: 12.0,
            phase_mode: PhaseMode::ThreePhaseAggregate,
            units: Units::PerUnit,
        }
    }

    #[test]
    fn two_bus_validates_clean() {
        assert!(two_bus_case().validate().is_ok());
    }

    #[test]
    fn per_unit_conversion_matches_hand_arithmetic() {
        // Z_base = 12² / 10 = 14.4 Ω, so 1.44 Ω → 0.1 pu.
        // I_base = 10 MVA / (√3 · 12 kV) = 481.125 A, so 481.13 A ≈ 1 pu.
        let mut phys = two_bus_case();
        phys.units = Units::Physical;
        phys.lines[0].r = 1.44;
        phys.lines[0].x = 0.0;
        let i_base = 10.0 * 1e3 / (3f64.sqrt() * 12.0);
        phys.lines[0].i_max_sq = i_base * i_base;
        phys.buses[1].p_load = 1.0; // MW

        let pu = phys.to_per_unit(10.0, 12.0).unwrap();
        assert!((pu.lines[0].r - 0.1).abs() < 1e-12);
        assert!((pu.lines[0].i_max_sq - 1.0).abs() < 1e-9);
        assert!((pu.buses[1].p_load - 0.1).abs() < 1e-15);

        // Idempotent on a per-unit case.
        let again = pu.to_per_unit(10.0, 12.0).unwrap();
        assert_eq!(pu, again);
    }

    #[test]
    fn per_unit_round_trip() {
        let pu = two_bus_case();
        let phys = pu.to_physical().unwrap();
        let back = phys.to_per_unit(10.0, 12.0).unwrap();
        for (a, b) in pu.lines.iter().zip(back.lines.iter()) {
            assert!((a.r - b.r).abs() <= 1e-12 * a.r.abs().max(1.0));
            assert!((a.i_max_sq - b.i_max_sq).abs() <= 1e-12 * a.i_max_sq.abs().max(1.0));
        }
        for (a, b) in pu.buses.iter().zip(back.buses.iter()) {
            assert!((a.p_load - b.p_load).abs() <= 1e-12 * a.p_load.abs().max(1.0));
        }
    }

    #[test]
    fn non_positive_base_rejected() {
        let mut phys = two_bus_case();
        phys.units = Units::Physical;
        assert!(matches!(
            phys.to_per_unit(0.0, 12.0),
            Err(CaseError::NonPositiveBase { .. })
        ));
    }

    #[test]
    fn phase_split_divides_loads_by_three() {
        let mut case = two_bus_case();
        case.buses[1].p_load = 3.0;
        let split = case.phase_scale(PhaseScale::Split).unwrap();
        assert_eq!(split.phase_mode, PhaseMode::PerPhase);
        assert!((split.buses[1].p_load - 1.0).abs() < 1e-15);

        // Split on an already per-phase case is a precondition error.
        assert!(matches!(
            split.phase_scale(PhaseScale::Split),
            Err(CaseError::WrongPhaseMode(..))
        ));

        let merged = split.phase_scale(PhaseScale::Merge).unwrap();
        for (a, b) in case.buses.iter().zip(merged.buses.iter()) {
            assert!((a.p_load - b.p_load).abs() <= f64::EPSILON * a.p_load.abs());
            assert!((a.q_load - b.q_load).abs() <= f64::EPSILON * a.q_load.abs());
        }
    }

    #[test]
    fn zero_impedance_flagged() {
        let mut case = two_bus_case();
        case.lines[0].r = 0.0;
        case.lines[0].x = 0.0;
        let report = case.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::ZeroImpedance { line: 0 })));
    }

    #[test]
    fn disconnected_all_closed_graph_flagged() {
        let mut case = two_bus_case();
        case.buses.push(BusData {
            id: 2,
            p_load: 0.0,
            q_load: 0.0,
            v_min_sq: 0.9025,
            v_max_sq: 1.1025,
            dg: None,
        });
        // No line to bus 2, also fewer lines than N.
        let report = case.validate();
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::AllClosedDisconnected { components: 2 })));
        assert!(report
            .violations
            .iter()
            .any(|v| matches!(v, Violation::TooFewLines { .. })));
    }
}
