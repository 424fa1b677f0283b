//! Exact linearization of binary-continuous products and McCormick envelopes
//! for continuous bilinear terms.

use crate::lp::{LinRow, RowOp};

/// Rows making `z` equal the product `π · x` for binary `π` and `x ∈ [lo, hi]`:
///
/// ```text
/// lo·π ≤ z ≤ hi·π
/// x − hi·(1−π) ≤ z ≤ x − lo·(1−π)
/// ```
///
/// Exact for both binary values; no approximation is introduced.
pub fn linearize_switch_product(
    pi: usize,
    x: usize,
    z: usize,
    lo: f64,
    hi: f64,
) -> Result<[LinRow; 4], LinearizeError> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(LinearizeError::UnboundedFactor { lo, hi });
    }
    if lo > hi {
        return Err(LinearizeError::EmptyInterval { lo, hi });
    }
    Ok([
        // z − lo·π ≥ 0
        LinRow::new(vec![(z, 1.0), (pi, -lo)], RowOp::Ge, 0.0),
        // z − hi·π ≤ 0
        LinRow::new(vec![(z, 1.0), (pi, -hi)], RowOp::Le, 0.0),
        // z − x − hi·π ≥ −hi
        LinRow::new(vec![(z, 1.0), (x, -1.0), (pi, -hi)], RowOp::Ge, -hi),
        // z − x − lo·π ≤ −lo
        LinRow::new(vec![(z, 1.0), (x, -1.0), (pi, -lo)], RowOp::Le, -lo),
    ])
}

/// The four-inequality McCormick envelope of `w = u·v` over a box.
/// Exact at the box corners and when the box degenerates.
pub fn mccormick_envelope(
    w: usize,
    u: usize,
    v: usize,
    (ul, uu): (f64, f64),
    (vl, vu): (f64, f64),
) -> Result<[LinRow; 4], LinearizeError> {
    if ul > uu || vl > vu {
        return Err(LinearizeError::EmptyInterval { lo: ul.min(vl), hi: uu.max(vu) });
    }
    if !(ul.is_finite() && uu.is_finite() && vl.is_finite() && vu.is_finite()) {
        return Err(LinearizeError::UnboundedFactor { lo: ul.min(vl), hi: uu.max(vu) });
    }
    Ok([
        // w ≥ ul·v + u·vl − ul·vl
        LinRow::new(vec![(w, 1.0), (v, -ul), (u, -vl)], RowOp::Ge, -ul * vl),
        // w ≥ uu·v + u·vu − uu·vu
        LinRow::new(vec![(w, 1.0), (v, -uu), (u, -vu)], RowOp::Ge, -uu * vu),
        // w ≤ uu·v + u·vl − uu·vl
        LinRow::new(vec![(w, 1.0), (v, -uu), (u, -vl)], RowOp::Le, -uu * vl),
        // w ≤ ul·v + u·vu − ul·vu
        LinRow::new(vec![(w, 1.0), (v, -ul), (u, -vu)], RowOp::Le, -ul * vu),
    ])
}

/// Envelope rows for a square term `w = u²` over `u ∈ [lo, hi]`: the secant
/// from above plus tangents from below at both ends and the midpoint.
/// Tangents at arbitrary points are globally valid and can be added lazily.
pub fn square_envelope(w: usize, u: usize, lo: f64, hi: f64) -> Vec<LinRow> {
    let mut rows = Vec::with_capacity(4);
    // Secant: w ≤ (lo+hi)·u − lo·hi.
    rows.push(LinRow::new(vec![(w, 1.0), (u, -(lo + hi))], RowOp::Le, -lo * hi));
    for point in [lo, 0.5 * (lo + hi), hi] {
        rows.push(square_tangent(w, u, point));
    }
    rows
}

/// Valid global cut `w ≥ 2·u₀·u − u₀²` for `w = u²`.
pub fn square_tangent(w: usize, u: usize, at: f64) -> LinRow {
    LinRow::new(vec![(w, 1.0), (u, -2.0 * at)], RowOp::Ge, -at * at)
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum LinearizeError {
    #[error("continuous factor must have finite bounds, got [{lo}, {hi}]")]
    UnboundedFactor { lo: f64, hi: f64 },
    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feasible_z_interval(rows: &[LinRow; 4], pi: f64, x: f64) -> (f64, f64) {
        // Variables: 0 = π, 1 = x, 2 = z. Solve each row for z.
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for row in rows.iter() {
            let mut z_coeff = 0.0;
            let mut rest = 0.0;
            for &(var, a) in &row.coeffs {
                match var {
                    2 => z_coeff += a,
                    0 => rest += a * pi,
                    1 => rest += a * x,
                    _ => unreachable!(),
                }
            }
            assert_eq!(z_coeff, 1.0);
            let bound = row.rhs - rest;
            match row.op {
                RowOp::Ge => lo = lo.max(bound),
                RowOp::Le => hi = hi.min(bound),
                RowOp::Eq => {
                    lo = lo.max(bound);
                    hi = hi.min(bound);
                }
            }
        }
        (lo, hi)
    }

    #[test]
    fn open_switch_forces_zero() {
        let rows = linearize_switch_product(0, 1, 2, -5.25, 5.25).unwrap();
        for x in [-5.25, -4.9991, 0.0, 3.0, 5.25] {
            let (lo, hi) = feasible_z_interval(&rows, 0.0, x);
            assert!(lo <= 0.0 + 1e-12 && 0.0 <= hi + 1e-12);
            assert!((lo - 0.0).abs() < 1e-12 && (hi - 0.0).abs() < 1e-12);
        }
    }

    #[test]
    fn closed_switch_passes_value_through() {
        let rows = linearize_switch_product(0, 1, 2, -5.25, 5.25).unwrap();
        let (lo, hi) = feasible_z_interval(&rows, 1.0, -4.9991);
        assert!((lo - -4.9991).abs() < 1e-12);
        assert!((hi - -4.9991).abs() < 1e-12);
    }

    #[test]
    fn degenerate_interval_scales_binary() {
        let rows = linearize_switch_product(0, 1, 2, 2.5, 2.5).unwrap();
        let (lo0, hi0) = feasible_z_interval(&rows, 0.0, 2.5);
        assert!(lo0.abs() < 1e-12 && hi0.abs() < 1e-12);
        let (lo1, hi1) = feasible_z_interval(&rows, 1.0, 2.5);
        assert!((lo1 - 2.5).abs() < 1e-12 && (hi1 - 2.5).abs() < 1e-12);
    }

    #[test]
    fn unbounded_factor_rejected() {
        assert!(matches!(
            linearize_switch_product(0, 1, 2, f64::NEG_INFINITY, 1.0),
            Err(LinearizeError::UnboundedFactor { .. })
        ));
    }

    #[test]
    fn mccormick_corner_exactness() {
        // u ∈ [0.9025, 1.1025], v ∈ [0, 25]: the corner (1.1025, 25) forces
        // w = 27.5625.
        let rows = mccormick_envelope(2, 0, 1, (0.9025, 1.1025), (0.0, 25.0)).unwrap();
        let eval = |w: f64, u: f64, v: f64| {
            rows.iter().all(|row| {
                let act: f64 = row
                    .coeffs
                    .iter()
                    .map(|&(var, a)| a * [u, v, w][var])
                    .sum();
                match row.op {
                    RowOp::Le => act <= row.rhs + 1e-9,
                    RowOp::Ge => act >= row.rhs - 1e-9,
                    RowOp::Eq => (act - row.rhs).abs() <= 1e-9,
                }
            })
        };
        assert!(eval(27.5625, 1.1025, 25.0));
        assert!(!eval(27.5625 - 0.01, 1.1025, 25.0));
        assert!(!eval(27.5625 + 0.01, 1.1025, 25.0));
    }

    #[test]
    fn mccormick_degenerate_box_is_exact() {
        let rows = mccormick_envelope(2, 0, 1, (1.0, 1.0), (0.0, 25.0)).unwrap();
        let eval = |w: f64, v: f64| {
            rows.iter().all(|row| {
                let act: f64 = row
                    .coeffs
                    .iter()
                    .map(|&(var, a)| a * [1.0, v, w][var])
                    .sum();
                match row.op {
                    RowOp::Le => act <= row.rhs + 1e-9,
                    RowOp::Ge => act >= row.rhs - 1e-9,
                    RowOp::Eq => (act - row.rhs).abs() <= 1e-9,
                }
            })
        };
        assert!(eval(13.7, 13.7));
        assert!(!eval(13.8, 13.7));
    }

    #[test]
    fn empty_box_rejected() {
        assert!(mccormick_envelope(2, 0, 1, (1.0, 0.5), (0.0, 1.0)).is_err());
    }
}
