//! Shared test oracles, independent of the library's solution paths.

#![allow(dead_code)]

use gridreconf::netcase::NetworkCase;
use gridreconf::radiality::SwitchTopology;

/// Dense Gaussian elimination with partial pivoting. Returns `None` for
/// singular systems.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap()
        })?;
        if a[pivot][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut sum = b[row];
        for k in row + 1..n {
            sum -= a[row][k] * x[k];
        }
        x[row] = sum / a[row][row];
    }
    Some(x)
}

/// Polar Newton-Raphson load flow on the bus-injection model.
///
/// Returns per-bus voltage magnitudes (pu) at the solved point, or `None` on
/// non-convergence. Written directly from the admittance-matrix equations so
/// it shares nothing with the sweep implementation it checks.
pub fn newton_loadflow(
    case: &NetworkCase,
    topology: &SwitchTopology,
    p_gen: &[f64],
    q_gen: &[f64],
) -> Option<Vec<f64>> {
    let n_buses = case.n_buses();
    // Ybus from closed lines.
    let mut g = vec![vec![0.0; n_buses]; n_buses];
    let mut b = vec![vec![0.0; n_buses]; n_buses];
    for (l, line) in case.lines.iter().enumerate() {
        if !topology.closed[l] {
            continue;
        }
        let denom = line.r * line.r + line.x * line.x;
        let (gs, bs) = (line.r / denom, -line.x / denom);
        let (i, j) = (line.from, line.to);
        g[i][i] += gs;
        b[i][i] += bs;
        g[j][j] += gs;
        b[j][j] += bs;
        g[i][j] -= gs;
        b[i][j] -= bs;
        g[j][i] -= gs;
        b[j][i] -= bs;
    }
    let p_inj: Vec<f64> = (0..n_buses).map(|n| p_gen[n] - case.buses[n].p_load).collect();
    let q_inj: Vec<f64> = (0..n_buses).map(|n| q_gen[n] - case.buses[n].q_load).collect();

    let mut vm = vec![1.0_f64; n_buses];
    let mut va = vec![0.0_f64; n_buses];
    let m = n_buses - 1; // unknown (θ, V) per non-slack bus

    for _ in 0..60 {
        // Calculated injections.
        let mut p_calc = vec![0.0; n_buses];
        let mut q_calc = vec![0.0; n_buses];
        for i in 0..n_buses {
            for k in 0..n_buses {
                if g[i][k] == 0.0 && b[i][k] == 0.0 {
                    continue;
                }
                let t = va[i] - va[k];
                p_calc[i] += vm[i] * vm[k] * (g[i][k] * t.cos() + b[i][k] * t.sin());
                q_calc[i] += vm[i] * vm[k] * (g[i][k] * t.sin() - b[i][k] * t.cos());
            }
        }
        let mut mismatch = vec![0.0; 2 * m];
        let mut worst = 0.0_f64;
        for i in 1..n_buses {
            mismatch[i - 1] = p_inj[i] - p_calc[i];
            mismatch[m + i - 1] = q_inj[i] - q_calc[i];
            worst = worst.max(mismatch[i - 1].abs()).max(mismatch[m + i - 1].abs());
        }
        if worst < 1e-11 {
            return Some(vm);
        }
        // Jacobian: [dP/dθ dP/dV; dQ/dθ dQ/dV] over non-slack buses.
        let mut jac = vec![vec![0.0; 2 * m]; 2 * m];
        for i in 1..n_buses {
            for k in 1..n_buses {
                let t = va[i] - va[k];
                let (gik, bik) = (g[i][k], b[i][k]);
                if i == k {
                    jac[i - 1][k - 1] = -q_calc[i] - bik * vm[i] * vm[i];
                    jac[i - 1][m + k - 1] = p_calc[i] / vm[i] + gik * vm[i];
                    jac[m + i - 1][k - 1] = p_calc[i] - gik * vm[i] * vm[i];
                    jac[m + i - 1][m + k - 1] = q_calc[i] / vm[i] - bik * vm[i];
                } else if gik != 0.0 || bik != 0.0 {
                    let vivk = vm[i] * vm[k];
                    jac[i - 1][k - 1] = vivk * (gik * t.sin() - bik * t.cos());
                    jac[i - 1][m + k - 1] = vm[i] * (gik * t.cos() + bik * t.sin());
                    jac[m + i - 1][k - 1] = -vivk * (gik * t.cos() + bik * t.sin());
                    jac[m + i - 1][m + k - 1] = vm[i] * (gik * t.sin() - bik * t.cos());
                }
            }
        }
        let step = solve_dense(jac, mismatch)?;
        if !step.iter().all(|v| v.is_finite()) {
            return None;
        }
        for i in 1..n_buses {
            va[i] += step[i - 1];
            vm[i] += step[m + i - 1];
            if vm[i] <= 0.0 {
                return None;
            }
        }
    }
    None
}

/// The topology given by the initial switch statuses.
pub fn initial_topology(case: &NetworkCase) -> SwitchTopology {
    let closed: Vec<bool> = case.lines.iter().map(|l| l.alpha0 == 1).collect();
    SwitchTopology::orient(case, &closed).expect("initial configuration must be radial")
}

pub fn load_case33() -> NetworkCase {
    gridreconf::netcase::parse_case(
        include_str!("../../data/case33bw.m"),
        gridreconf::netcase::CaseFormat::MCase,
    )
    .expect("bundled case parses")
}

pub fn load_three_bus() -> NetworkCase {
    gridreconf::netcase::parse_case(
        include_str!("../../data/three_bus.json"),
        gridreconf::netcase::CaseFormat::Native,
    )
    .expect("bundled case parses")
}
