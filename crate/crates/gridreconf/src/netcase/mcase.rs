//! Parser for Matpower-style `.m` case files.
//!
//! Only the fields used by the ROPF model are read: bus ids, types, loads and
//! voltage limits; branch endpoints, impedances, MVA ratings and status; and
//! generator buses with their bounds. Everything else is ignored. Buses are
//! re-indexed to contiguous ids with the slack at 0; branches with status 0
//! become switchable lines that start open.

use super::{
    BusData, CaseError, DgRating, LineData, NetworkCase, PhaseMode, Units, R_FLOOR,
    UNRATED_I_MAX_SQ,
};
use std::collections::BTreeMap;

/// Power factor assigned to generators read from m-case files, which carry no
/// power-factor field of their own.
pub const DEFAULT_PF_MIN: f64 = 0.9;

#[derive(Debug, Default)]
struct RawTables {
    base_mva: Option<f64>,
    bus: Vec<(usize, Vec<f64>)>,
    gen: Vec<(usize, Vec<f64>)>,
    branch: Vec<(usize, Vec<f64>)>,
}

pub fn parse_mcase(text: &str) -> Result<NetworkCase, CaseError> {
    let raw = scan_tables(text)?;
    let base_mva = raw
        .base_mva
        .ok_or_else(|| syntax(0, 0, "missing mpc.baseMVA"))?;
    if base_mva <= 0.0 {
        return Err(CaseError::NonPositiveBase { s_base: base_mva, v_base: 0.0 });
    }

    // Bus table: BUS_I TYPE PD QD GS BS AREA VM VA BASE_KV ZONE VMAX VMIN
    let mut slack: Option<usize> = None;
    let mut v_base_kv = 0.0;
    let mut buses_by_id: BTreeMap<usize, BusData> = BTreeMap::new();
    for (line_no, row) in &raw.bus {
        if row.len() < 13 {
            return Err(syntax(*line_no, 1, "bus row needs 13 columns"));
        }
        let id = row[0] as usize;
        let bus_type = row[1] as i64;
        if buses_by_id.contains_key(&id) {
            return Err(CaseError::DuplicateBus(id));
        }
        if bus_type == 3 {
            if let Some(prev) = slack {
                return Err(CaseError::DuplicateSlack(prev, id));
            }
            slack = Some(id);
            v_base_kv = row[9];
        }
        let v_max = if row[11] > 0.0 { row[11] } else { 1.05 };
        let v_min = if row[12] > 0.0 { row[12] } else { 0.95 };
        buses_by_id.insert(
            id,
            BusData {
                id, // re-indexed below
                p_load: row[2] / base_mva,
                q_load: row[3] / base_mva,
                v_min_sq: v_min * v_min,
                v_max_sq: v_max * v_max,
                dg: None,
            },
        );
    }
    let slack = slack.ok_or(CaseError::MissingSlack)?;
    if v_base_kv <= 0.0 {
        return Err(CaseError::NonPositiveBase { s_base: base_mva, v_base: v_base_kv });
    }

    // Contiguous re-indexing: slack → 0, remaining buses in ascending id order.
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    index.insert(slack, 0);
    let mut next = 1usize;
    for &id in buses_by_id.keys() {
        if id != slack {
            index.insert(id, next);
            next += 1;
        }
    }
    let mut buses: Vec<BusData> = vec![
        BusData { id: 0, p_load: 0.0, q_load: 0.0, v_min_sq: 0.0, v_max_sq: 0.0, dg: None };
        buses_by_id.len()
    ];
    for (orig, mut bus) in buses_by_id {
        let new_id = index[&orig];
        bus.id = new_id;
        buses[new_id] = bus;
    }

    // Generator table: GEN_BUS PG QG QMAX QMIN VG MBASE STATUS PMAX PMIN ...
    for (line_no, row) in &raw.gen {
        if row.len() < 10 {
            return Err(syntax(*line_no, 1, "gen row needs 10 columns"));
        }
        let orig_bus = row[0] as usize;
        let bus = *index
            .get(&orig_bus)
            .ok_or(CaseError::UnknownBus(orig_bus))?;
        if bus == 0 {
            continue; // the slack feed-in is implied, not a DG unit
        }
        let status = row[7];
        if status == 0.0 {
            continue;
        }
        let p_max = row[8] / base_mva;
        let p_min = (row[9] / base_mva).max(0.0);
        let q_max = row[3] / base_mva;
        let q_min = row[4] / base_mva;
        let m_base = row[6];
        let capacity = if m_base > 0.0 {
            m_base / base_mva
        } else {
            p_max.max(q_max.abs()).max(q_min.abs()).max(1e-9)
        };
        buses[bus].dg = Some(DgRating {
            p_min,
            p_max,
            q_min,
            q_max,
            capacity,
            pf_min: DEFAULT_PF_MIN,
        });
    }

    // Branch table: F_BUS T_BUS R X B RATE_A ... STATUS(col 11)
    // RATE_A in MVA is read as a current limit at nominal voltage; RATE_A = 0
    // means unrated. Parallel branches between one pair are merged: complex
    // impedances in parallel, current ratings summed.
    let mut merged: BTreeMap<(usize, usize), LineData> = BTreeMap::new();
    for (line_no, row) in &raw.branch {
        if row.len() < 11 {
            return Err(syntax(*line_no, 1, "branch row needs 11 columns"));
        }
        let f = *index.get(&(row[0] as usize)).ok_or(CaseError::UnknownBus(row[0] as usize))?;
        let t = *index.get(&(row[1] as usize)).ok_or(CaseError::UnknownBus(row[1] as usize))?;
        let (a, b) = if f < t { (f, t) } else { (t, f) };
        let mut r = row[2];
        let x = row[3];
        if r <= 0.0 && x <= 0.0 {
            r = R_FLOOR;
        } else if r <= 0.0 {
            r = R_FLOOR;
        }
        let i_max = if row[5] > 0.0 { row[5] / base_mva } else { UNRATED_I_MAX_SQ.sqrt() };
        let closed = row[10] != 0.0;
        let line = LineData {
            from: a,
            to: b,
            r,
            x,
            i_max_sq: (i_max * i_max).min(UNRATED_I_MAX_SQ),
            switchable: !closed,
            alpha_lb: if closed { 1 } else { 0 },
            alpha_ub: 1,
            alpha0: u8::from(closed),
        };
        match merged.get_mut(&(a, b)) {
            None => {
                merged.insert((a, b), line);
            }
            Some(existing) => {
                let (pr, px) = parallel_impedance(existing.r, existing.x, line.r, line.x);
                existing.r = pr.max(R_FLOOR);
                existing.x = px;
                let rating = existing.i_max_sq.sqrt() + line.i_max_sq.sqrt();
                existing.i_max_sq = (rating * rating).min(UNRATED_I_MAX_SQ);
                existing.alpha0 = existing.alpha0.max(line.alpha0);
                existing.switchable = existing.switchable || line.switchable;
                if existing.alpha0 == 1 && !existing.switchable {
                    existing.alpha_lb = 1;
                } else {
                    existing.alpha_lb = 0;
                }
            }
        }
    }
    let lines: Vec<LineData> = merged.into_values().collect();

    Ok(NetworkCase {
        buses,
        lines,
        s_base_mva: base_mva,
        v_base_kv,
        phase_mode: PhaseMode::ThreePhaseAggregate,
        units: Units::PerUnit,
    })
}

/// Parallel combination of two series impedances: z = z1 z2 / (z1 + z2).
fn parallel_impedance(r1: f64, x1: f64, r2: f64, x2: f64) -> (f64, f64) {
    let (pr, pi) = (r1 * r2 - x1 * x2, r1 * x2 + x1 * r2); // z1 * z2
    let (sr, si) = (r1 + r2, x1 + x2);
    let denom = sr * sr + si * si;
    if denom == 0.0 {
        return (0.0, 0.0);
    }
    ((pr * sr + pi * si) / denom, (pi * sr - pr * si) / denom)
}

fn syntax(line: usize, col: usize, msg: &str) -> CaseError {
    CaseError::Syntax { line, col, msg: msg.to_string() }
}

/// Scan the matrix assignments out of the m-file text.
fn scan_tables(text: &str) -> Result<RawTables, CaseError> {
    let mut raw = RawTables::default();
    let mut current: Option<&'static str> = None;
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw_line.find('%') {
            Some(p) => &raw_line[..p],
            None => raw_line,
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if current.is_none() {
            if let Some(rest) = trimmed.strip_prefix("mpc.baseMVA") {
                let value = rest.trim_start_matches(['=', ' ', '\t']).trim_end_matches(';').trim();
                raw.base_mva = Some(
                    value
                        .parse::<f64>()
                        .map_err(|_| syntax(line_no, 1, "bad baseMVA value"))?,
                );
                continue;
            }
            for (prefix, table) in
                [("mpc.bus", "bus"), ("mpc.gen", "gen"), ("mpc.branch", "branch")]
            {
                if trimmed.starts_with(prefix)
                    && trimmed[prefix.len()..].trim_start().starts_with('=')
                    // mpc.bus_name etc. must not match mpc.bus
                    && !trimmed.starts_with(&format!("{prefix}_"))
                    && !trimmed.starts_with(&format!("{prefix}cost"))
                {
                    current = Some(table);
                    break;
                }
            }
            if current.is_some() && !trimmed.contains('[') {
                return Err(syntax(line_no, 1, "expected '[' to open matrix"));
            }
            continue;
        }
        // Inside a matrix. `];` closes it; rows are whitespace-separated
        // numbers, optionally `;`-terminated.
        let table = current.unwrap();
        if trimmed.starts_with(']') {
            current = None;
            continue;
        }
        let row_text = trimmed.trim_end_matches(';').trim();
        if row_text.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, tok) in row_text.split_whitespace().enumerate() {
            let v = tok
                .parse::<f64>()
                .map_err(|_| syntax(line_no, col + 1, "expected a number"))?;
            row.push(v);
        }
        let closes = trimmed.ends_with("];");
        match table {
            "bus" => raw.bus.push((line_no, row)),
            "gen" => raw.gen.push((line_no, row)),
            _ => raw.branch.push((line_no, row)),
        }
        if closes {
            current = None;
        }
    }
    Ok(raw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netcase::{parse_case, CaseFormat};

    const TINY: &str = r#"
function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 10;
mpc.bus = [
    1  3  0    0   0 0 1 1 0 12.66 1 1.05 0.95;
    2  1  0.1  0.06 0 0 1 1 0 12.66 1 1.05 0.95;
    3  1  0.09 0.04 0 0 1 1 0 12.66 1 1.05 0.95;
];
mpc.gen = [
    1 0 0 10 -10 1 10 1 10 0;
    3 0 0 10 -10 1 10 1 10 0;
];
mpc.branch = [
    1 2 0.0922 0.047 0 4 0 0 0 0 1;
    2 3 0.493  0.2511 0 4 0 0 0 0 1;
    1 3 2.0    2.0    0 4 0 0 0 0 0;
];
"#;

    #[test]
    fn parses_tiny_case() {
        let case = parse_case(TINY, CaseFormat::MCase).unwrap();
        assert_eq!(case.n_buses(), 3);
        assert_eq!(case.lines.len(), 3);
        assert_eq!(case.s_base_mva, 10.0);
        assert!((case.v_base_kv - 12.66).abs() < 1e-12);
        // Loads are converted to per-unit.
        assert!((case.buses[1].p_load - 0.01).abs() < 1e-12);
        // Gen at the slack is dropped; gen at bus 3 becomes a DG rating.
        assert!(case.buses[0].dg.is_none());
        let dg = case.buses[2].dg.as_ref().unwrap();
        assert!((dg.p_max - 1.0).abs() < 1e-12);
        assert!((dg.capacity - 1.0).abs() < 1e-12);
        assert_eq!(dg.pf_min, DEFAULT_PF_MIN);
        // Status-0 branch is a switchable, initially-open line.
        let tie = case.line_between(0, 2).unwrap();
        assert!(case.lines[tie].switchable);
        assert_eq!(case.lines[tie].alpha0, 0);
        // Rate 4 MVA on a 10 MVA base → i_max 0.4 pu.
        assert!((case.lines[0].i_max_sq - 0.16).abs() < 1e-12);
        assert!(case.validate().is_ok());
    }

    #[test]
    fn duplicate_slack_rejected() {
        let text = TINY.replace("2  1  0.1", "2  3  0.1");
        match parse_case(&text, CaseFormat::MCase) {
            Err(CaseError::DuplicateSlack(..)) => {}
            other => panic!("expected duplicate slack error, got {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_position() {
        let text = TINY.replace("0.0922", "zz");
        match parse_case(&text, CaseFormat::MCase) {
            Err(CaseError::Syntax { line, col, .. }) => {
                assert!(line > 0);
                assert_eq!(col, 3);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn parallel_branches_merge() {
        let text = TINY.replace(
            "1 3 2.0    2.0    0 4 0 0 0 0 0;",
            "1 3 2.0 2.0 0 4 0 0 0 0 0;\n    1 2 0.0922 0.047 0 4 0 0 0 0 1;",
        );
        let case = parse_case(&text, CaseFormat::MCase).unwrap();
        assert_eq!(case.lines.len(), 3);
        let l = &case.lines[case.line_between(0, 1).unwrap()];
        // Two equal impedances in parallel halve; ratings sum.
        assert!((l.r - 0.0461).abs() < 1e-9);
        assert!((l.x - 0.0235).abs() < 1e-9);
        assert!((l.i_max_sq - 0.64).abs() < 1e-12);
        assert!(case.validate().is_ok());
    }
}
