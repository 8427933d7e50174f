use crate::error::{invalid, Error, Result};

const EPS: f64 = 1e-12;

/// Optimal primal point, dual prices and objective of a linear program.
#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Shadow price of each inequality constraint.
    pub dual: Vec<f64>,
    pub objective: f64,
}

/// `max c^T x  s.t.  A x <= b, x >= 0` for `b >= 0`, by the dense tableau simplex method
/// with Bland's rule (lowest-index entering and leaving variables), which cannot cycle.
pub fn simplex_max(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpSolution> {
    let m = a.len();
    let n = c.len();
    if b.len() != m {
        return Err(invalid("b", format!("expected {m} entries, got {}", b.len())));
    }
    if a.iter().any(|row| row.len() != n) {
        return Err(invalid("A", "ragged constraint matrix"));
    }
    if b.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(invalid("b", "right-hand side must be finite and non-negative"));
    }
    if a.iter().flatten().chain(c).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("linear program coefficients"));
    }

    let width = n + m + 1;
    let mut t = vec![vec![0.0; width]; m + 1];
    for (i, row) in a.iter().enumerate() {
        t[i][..n].copy_from_slice(row);
        t[i][n + i] = 1.0;
        t[i][width - 1] = b[i];
    }
    for (j, &cj) in c.iter().enumerate() {
        t[m][j] = -cj;
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    // Bland's rule terminates; the cap only guards against numerical pathologies.
    let max_pivots = 50 * (n + m + 1) * (n + m + 1);
    for _ in 0..max_pivots {
        let Some(enter) = (0..n + m).find(|&j| t[m][j] < -EPS) else {
            let mut x = vec![0.0; n];
            for (i, &bv) in basis.iter().enumerate() {
                if bv < n {
                    x[bv] = t[i][width - 1];
                }
            }
            return Ok(LpSolution {
                x,
                dual: t[m][n..n + m].to_vec(),
                objective: t[m][width - 1],
            });
        };
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let coef = t[i][enter];
            if coef > EPS {
                let ratio = t[i][width - 1] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - EPS || (ratio <= lr + EPS && basis[i] < basis[li]) {
                            Some((i, ratio))
                        } else {
                            Some((li, lr))
                        }
                    }
                };
            }
        }
        let Some((row, _)) = leave else {
            return Err(invalid("linear program", "unbounded"));
        };
        let pivot = t[row][enter];
        t[row].iter_mut().for_each(|v| *v /= pivot);
        let pivot_row = t[row].clone();
        for (i, r) in t.iter_mut().enumerate() {
            if i != row {
                let f = r[enter];
                if f != 0.0 {
                    for (v, p) in r.iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
        basis[row] = enter;
    }
    Err(Error::NoConvergence(max_pivots))
}
