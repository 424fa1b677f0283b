//! Native JSON case format.
//!
//! The schema mirrors [`NetworkCase`] field-for-field so that
//! parse ∘ serialize is the identity:
//!
//! ```json
//! {
//!   "s_base_mva": 1.0,
//!   "v_base_kv": 10.0,
//!   "phase_mode": "three-phase-aggregate",
//!   "units": "per-unit",
//!   "buses": [
//!     { "id": 0, "p_load": 0.0, "q_load": 0.0, "v_min_sq": 0.9025, "v_max_sq": 1.1025 },
//!     { "id": 1, "p_load": 2.0, "q_load": 0.5, "v_min_sq": 0.9025, "v_max_sq": 1.1025,
//!       "dg": { "p_min": 0.0, "p_max": 10.0, "q_min": -10.0, "q_max": 10.0,
//!                "capacity": 10.0, "pf_min": 0.9 } }
//!   ],
//!   "lines": [
//!     { "from": 0, "to": 1, "r": 0.01, "x": 0.0075, "i_max_sq": 25.0,
//!       "switchable": false, "alpha_lb": 1, "alpha_ub": 1, "alpha0": 1 }
//!   ]
//! }
//! ```
//!
//! A switch list sidecar is a JSON array of `[from, to]` bus pairs naming
//! closed lines to treat as switchable.

use super::{CaseError, NetworkCase};

pub fn parse_native(text: &str) -> Result<NetworkCase, CaseError> {
    serde_json::from_str::<NetworkCase>(text).map_err(|e| CaseError::Syntax {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })
}

pub fn serialize_native(case: &NetworkCase) -> String {
    serde_json::to_string_pretty(case).expect("case serialization cannot fail")
}

/// Parse a sidecar switch list: a JSON array of `[from, to]` pairs.
pub fn parse_switch_list(text: &str) -> Result<Vec<(usize, usize)>, CaseError> {
    let pairs: Vec<[usize; 2]> = serde_json::from_str(text).map_err(|e| CaseError::Syntax {
        line: e.line(),
        col: e.column(),
        msg: e.to_string(),
    })?;
    Ok(pairs.into_iter().map(|[a, b]| (a, b)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::{parse_case, BusData, CaseFormat, LineData, PhaseMode, Units};

    fn sample() -> NetworkCase {
        NetworkCase {
            buses: vec![
                BusData { id: 0, p_load: 0.0, q_load: 0.0, v_min_sq: 0.9025, v_max_sq: 1.1025, dg: None },
                BusData { id: 1, p_load: 0.1, q_load: 0.02, v_min_sq: 0.9025, v_max_sq: 1.1025, dg: None },
            ],
            lines: vec![LineData {
                from: 0,
                to: 1,
                r: 0.01,
                x: 0.005,
                i_max_sq: 4.0,
                switchable: false,
                alpha_lb: 1,
                alpha_ub: 1,
                alpha0: 1,
            }],
            s_base_mva: 1.0,
            v_base_kv: 10.0,
            phase_mode: PhaseMode::ThreePhaseAggregate,
            units: Units::PerUnit,
        }
    }

    #[test]
    fn round_trip_identity() {
        let case = sample();
        let text = serialize_native(&case);
        let back = parse_case(&text, CaseFormat::Native).unwrap();
        assert_eq!(case, back);
    }

    #[test]
    fn syntax_error_carries_position() {
        match parse_native("{ \"buses\": [ }") {
            Err(CaseError::Syntax { line, col, .. }) => {
                assert_eq!(line, 1);
                assert!(col > 0);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn switch_list_upgrades_lines() {
        let mut case = sample();
        let pairs = parse_switch_list("[[0, 1]]").unwrap();
        case.apply_switch_list(&pairs).unwrap();
        assert!(case.lines[0].switchable);
        assert_eq!(case.lines[0].alpha_lb, 0);
        assert_eq!(case.lines[0].alpha_ub, 1);
    }
}
