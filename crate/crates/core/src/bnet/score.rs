//! Least-squares fits of one node on a parent set, and the Gaussian BIC.
//!
//! Root nodes are not centered: their residuals are the raw normal scores.
//! Nodes with parents are regressed on complete-case rows after removing the
//! complete-case means, so the stored form is intercept-free and the
//! residuals have zero mean.

use crate::error::{Error, Result};
use crate::transform::NormalPanel;

/// Column-major copy of a normal panel used by the fitting routines.
#[derive(Debug, Clone)]
pub(crate) struct Columns {
    pub cols: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

impl Columns {
    pub fn from_panel(panel: &NormalPanel) -> Self {
        Columns {
            cols: (0..panel.n_stations()).map(|j| panel.column(j)).collect(),
            names: panel.stations.iter().map(|s| s.id.clone()).collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.cols.first().map_or(0, Vec::len)
    }

    /// Rows where every column is observed.
    pub fn complete_rows(&self) -> usize {
        (0..self.n_rows())
            .filter(|&t| self.cols.iter().all(|c| !c[t].is_nan()))
            .count()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LocalFit {
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
}

impl LocalFit {
    pub fn rows(&self) -> usize {
        self.residuals.len()
    }
}

/// Ordinary least squares of `node` on `parents` over complete-case rows.
pub(crate) fn local_fit(cols: &Columns, node: usize, parents: &[usize]) -> Result<LocalFit> {
    let y = &cols.cols[node];
    let rows: Vec<usize> = (0..y.len())
        .filter(|&t| !y[t].is_nan() && parents.iter().all(|&p| !cols.cols[p][t].is_nan()))
        .collect();
    if rows.is_empty() {
        return Err(Error::InsufficientData {
            what: "complete-case rows",
            needed: 1,
            got: 0,
            station: Some(cols.names[node].clone()),
        });
    }

    if parents.is_empty() {
        let residuals: Vec<f64> = rows.iter().map(|&t| y[t]).collect();
        let rss = residuals.iter().map(|r| r * r).sum();
        return Ok(LocalFit {
            coefficients: Vec::new(),
            residuals,
            rss,
        });
    }

    let k = parents.len();
    let m = rows.len() as f64;
    let y_mean = rows.iter().map(|&t| y[t]).sum::<f64>() / m;
    let x_mean: Vec<f64> = parents
        .iter()
        .map(|&p| rows.iter().map(|&t| cols.cols[p][t]).sum::<f64>() / m)
        .collect();

    let mut xtx = vec![0.0; k * k];
    let mut xty = vec![0.0; k];
    let mut xc = vec![0.0; k];
    for &t in &rows {
        for (a, &p) in parents.iter().enumerate() {
            xc[a] = cols.cols[p][t] - x_mean[a];
        }
        let yc = y[t] - y_mean;
        for a in 0..k {
            xty[a] += xc[a] * yc;
            for b in 0..=a {
                xtx[a * k + b] += xc[a] * xc[b];
            }
        }
    }
    for a in 0..k {
        for b in 0..a {
            xtx[b * k + a] = xtx[a * k + b];
        }
    }

    let collinear = || Error::Collinearity {
        node: cols.names[node].clone(),
    };
    let beta = solve_spd_scaled(&xtx, &xty, k).ok_or_else(collinear)?;

    let residuals: Vec<f64> = rows
        .iter()
        .map(|&t| {
            let fitted: f64 = parents
                .iter()
                .enumerate()
                .map(|(a, &p)| beta[a] * (cols.cols[p][t] - x_mean[a]))
                .sum();
            (y[t] - y_mean) - fitted
        })
        .collect();
    let rss = residuals.iter().map(|r| r * r).sum();
    Ok(LocalFit {
        coefficients: beta,
        residuals,
        rss,
    })
}

/// Solves `A x = b` for symmetric positive-definite `A` (row-major `k × k`)
/// after scaling to unit diagonal. `None` when `A` is numerically singular.
fn solve_spd_scaled(a: &[f64], b: &[f64], k: usize) -> Option<Vec<f64>> {
    let d: Vec<f64> = (0..k).map(|i| a[i * k + i].sqrt()).collect();
    if d.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return None;
    }
    // Cholesky of the correlation-scaled matrix
    let mut l = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut s = a[i * k + j] / (d[i] * d[j]);
            for p in 0..j {
                s -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if s < 1e-10 {
                    return None;
                }
                l[i * k + i] = s.sqrt();
            } else {
                l[i * k + j] = s / l[j * k + j];
            }
        }
    }
    let mut z: Vec<f64> = (0..k).map(|i| b[i] / d[i]).collect();
    for i in 0..k {
        for p in 0..i {
            z[i] -= l[i * k + p] * z[p];
        }
        z[i] /= l[i * k + i];
    }
    for i in (0..k).rev() {
        for p in i + 1..k {
            z[i] -= l[p * k + i] * z[p];
        }
        z[i] /= l[i * k + i];
    }
    Some((0..k).map(|i| z[i] / d[i]).collect())
}

/// Node BIC term `-(N/2)·ln(RSS/N) - ((|pa|+1)/2)·ln N`.
pub(crate) fn bic_term(rss: f64, rows: usize, n_parents: usize) -> f64 {
    let n = rows as f64;
    let var = (rss / n).max(f64::MIN_POSITIVE);
    -0.5 * n * var.ln() - 0.5 * (n_parents as f64 + 1.0) * n.ln()
}

/// Local BIC, `-inf` for collinear parent sets.
pub(crate) fn local_score(cols: &Columns, node: usize, parents: &[usize]) -> f64 {
    match local_fit(cols, node, parents) {
        Ok(fit) => bic_term(fit.rss, fit.rows(), parents.len()),
        Err(_) => f64::NEG_INFINITY,
    }
}
