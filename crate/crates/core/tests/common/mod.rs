//! Independent reference implementations shared by the integration tests
//! and the acceptance harness.
#![allow(dead_code)]

use chrono::Duration;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use scengen_core::data::{hours_in_month, month_range, month_start};
use scengen_core::{HistoricalPanel, NormalPanel, Resolution, ScenarioSet, StationKind, StationMeta};

/// Cyclic Jacobi eigen-decomposition of a symmetric matrix. Eigenpairs are
/// returned in descending eigenvalue order; vectors are unit length.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| (i == j) as u8 as f64).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vp, vq) = (row[p], row[q]);
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[y][y].total_cmp(&a[x][x]));
    let values = order.iter().map(|&k| a[k][k]).collect();
    let vectors = order.iter().map(|&k| (0..n).map(|i| v[i][k]).collect()).collect();
    (values, vectors)
}

/// Pearson correlation on pairwise-complete entries by the two-pass formula.
pub fn two_pass_corr(x: &[f64], y: &[f64]) -> (f64, usize) {
    let pairs: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| !a.is_nan() && !b.is_nan())
        .map(|(a, b)| (*a, *b))
        .collect();
    let n = pairs.len();
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in &pairs {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxy / (sxx * syy).sqrt(), n)
}

/// Residual sum of squares of `y` regressed on `xs`. With regressors an
/// intercept is included; without, the raw sum of squares is returned.
pub fn ols_rss(y: &[f64], xs: &[&[f64]]) -> f64 {
    if xs.is_empty() {
        return y.iter().map(|v| v * v).sum();
    }
    let k = xs.len() + 1;
    let design = |t: usize, a: usize| if a == 0 { 1.0 } else { xs[a - 1][t] };
    let mut m = vec![vec![0.0; k + 1]; k];
    for t in 0..y.len() {
        for a in 0..k {
            for b in 0..k {
                m[a][b] += design(t, a) * design(t, b);
            }
            m[a][k] += design(t, a) * y[t];
        }
    }
    // Gauss-Jordan with partial pivoting
    for c in 0..k {
        let piv = (c..k).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs())).unwrap();
        m.swap(c, piv);
        for r in 0..k {
            if r != c {
                let f = m[r][c] / m[c][c];
                for col in c..=k {
                    m[r][col] -= f * m[c][col];
                }
            }
        }
    }
    let beta: Vec<f64> = (0..k).map(|a| m[a][k] / m[a][a]).collect();
    (0..y.len())
        .map(|t| {
            let fit: f64 = (0..k).map(|a| beta[a] * design(t, a)).sum();
            (y[t] - fit).powi(2)
        })
        .sum()
}

/// Gaussian BIC of a DAG given as parent lists over `cols`.
pub fn oracle_bic(cols: &[Vec<f64>], parents: &[Vec<usize>]) -> f64 {
    parents
        .iter()
        .enumerate()
        .map(|(i, ps)| {
            let xs: Vec<&[f64]> = ps.iter().map(|&p| cols[p].as_slice()).collect();
            let n = cols[i].len() as f64;
            let rss = ols_rss(&cols[i], &xs);
            -0.5 * n * (rss / n).ln() - 0.5 * (ps.len() as f64 + 1.0) * n.ln()
        })
        .sum()
}

/// Every DAG on `n` nodes as parent lists.
pub fn all_dags(n: usize) -> Vec<Vec<Vec<usize>>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let mut out = Vec::new();
    // each unordered pair: absent, i→j or j→i
    for code in 0..3usize.pow(pairs.len() as u32) {
        let mut parents = vec![Vec::new(); n];
        let mut c = code;
        for &(i, j) in &pairs {
            match c % 3 {
                1 => parents[j].push(i),
                2 => parents[i].push(j),
                _ => {}
            }
            c /= 3;
        }
        if acyclic(&parents) {
            out.push(parents);
        }
    }
    out
}

fn acyclic(parents: &[Vec<usize>]) -> bool {
    let n = parents.len();
    let mut done = vec![false; n];
    for _ in 0..n {
        match (0..n).find(|&i| !done[i] && parents[i].iter().all(|&p| done[p])) {
            Some(i) => done[i] = true,
            None => return false,
        }
    }
    true
}

/// Undirected edge set of parent lists, as sorted `(min, max)` pairs.
pub fn skeleton(parents: &[Vec<usize>]) -> Vec<(usize, usize)> {
    let mut s: Vec<(usize, usize)> = parents
        .iter()
        .enumerate()
        .flat_map(|(i, ps)| ps.iter().map(move |&p| (p.min(i), p.max(i))))
        .collect();
    s.sort_unstable();
    s.dedup();
    s
}

pub fn meta(id: &str, kind: StationKind) -> StationMeta {
    let cap = if kind == StationKind::Hydro { 0.0 } else { 100.0 };
    StationMeta::new(id, kind, cap, kind == StationKind::Hydro)
}

/// `X1 → X2 → … → Xk` with `X_{i+1} = a·X_i + sqrt(1 - a²)·ε`, standard normal root.
pub fn chain_panel(k: usize, n: usize, a: f64, seed: u64) -> NormalPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stations: Vec<StationMeta> = (0..k).map(|i| meta(&format!("X{}", i + 1), StationKind::Wind)).collect();
    let noise = (1.0 - a * a).sqrt();
    let mut z = Vec::with_capacity(n * k);
    for _ in 0..n {
        let mut prev: f64 = rng.sample(StandardNormal);
        z.push(prev);
        for _ in 1..k {
            let e: f64 = rng.sample(StandardNormal);
            prev = a * prev + noise * e;
            z.push(prev);
        }
    }
    let index = month_range(month_start(1800, 1), n);
    NormalPanel::new(stations, index, Resolution::Monthly, z).unwrap()
}

/// Hourly history of three capacity-factor stations with daily shapes and
/// per-month levels in [0.15, 0.35]; peaks stay below 0.46 so rescaling to
/// a target in [0.18, 0.32] never leaves [0, 1].
pub fn disagg_history(first_year: i32, years: usize, seed: u64) -> HistoricalPanel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stations = vec![
        meta("W1", StationKind::Wind),
        meta("C2", StationKind::Csp),
        meta("D3", StationKind::Dgsp),
    ];
    let n = stations.len();
    let start = month_start(first_year, 1);
    let mut index = Vec::new();
    let mut values = Vec::new();
    for m in month_range(start, years * 12) {
        use chrono::Datelike;
        let hours = hours_in_month(m.year(), m.month());
        let levels: Vec<f64> = (0..n).map(|_| rng.random_range(0.15..0.35)).collect();
        let phases: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        for h in 0..hours {
            index.push(m + Duration::hours(h as i64));
            for j in 0..n {
                let day = (h % 24) as f64 / 24.0 * std::f64::consts::TAU;
                let wobble: f64 = rng.random_range(-0.05..0.05);
                values.push(levels[j] * (1.0 + 0.25 * (day + phases[j]).sin() + wobble));
            }
        }
    }
    HistoricalPanel::new(stations, index, values, Resolution::Hourly).unwrap()
}

/// Monthly scenarios with every value in [0.18, 0.32].
pub fn disagg_targets(stations: &[StationMeta], scenarios: usize, start_year: i32, months: usize, seed: u64) -> ScenarioSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = ScenarioSet::zeros(
        stations.to_vec(),
        scenarios,
        month_range(month_start(start_year, 1), months),
        Resolution::Monthly,
        seed,
    );
    for v in set.values.iter_mut() {
        *v = rng.random_range(0.18..0.32);
    }
    set
}

/// Calendar-month means of one station's hourly column, keyed by (year, month).
pub fn monthly_means(hourly: &HistoricalPanel) -> Vec<((i32, u32), Vec<f64>)> {
    use chrono::Datelike;
    let n = hourly.n_stations();
    let mut out: Vec<((i32, u32), Vec<f64>, usize)> = Vec::new();
    for (t, ts) in hourly.index().iter().enumerate() {
        let key = (ts.year(), ts.month());
        if out.last().is_none_or(|o| o.0 != key) {
            out.push((key, vec![0.0; n], 0));
        }
        let last = out.last_mut().unwrap();
        for j in 0..n {
            last.1[j] += hourly.get(t, j);
        }
        last.2 += 1;
    }
    out.into_iter()
        .map(|(k, s, c)| (k, s.into_iter().map(|v| v / c as f64).collect()))
        .collect()
}

/// Per calendar month: oracle PCA of the historical monthly vectors and the
/// brute-force nearest year for any query vector.
pub struct PcaOracle {
    pub years: Vec<i32>,
    pub rows: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub keep: usize,
}

impl PcaOracle {
    pub fn new(means: &[((i32, u32), Vec<f64>)], month: u32, threshold: f64) -> Self {
        let picked: Vec<&((i32, u32), Vec<f64>)> = means.iter().filter(|((_, m), _)| *m == month).collect();
        let years: Vec<i32> = picked.iter().map(|((y, _), _)| *y).collect();
        let rows: Vec<Vec<f64>> = picked.iter().map(|(_, r)| r.clone()).collect();
        let n = rows[0].len();
        let y = rows.len() as f64;
        let mean: Vec<f64> = (0..n).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / y).collect();
        let cov: Vec<Vec<f64>> = (0..n)
            .map(|a| {
                (0..n)
                    .map(|b| rows.iter().map(|r| (r[a] - mean[a]) * (r[b] - mean[b])).sum::<f64>() / (y - 1.0))
                    .collect()
            })
            .collect();
        let (values, vectors) = jacobi_eigen(cov);
        let total: f64 = values.iter().map(|v| v.max(0.0)).sum();
        let mut keep = 0;
        let mut acc = 0.0;
        while keep < n {
            acc += values[keep].max(0.0);
            keep += 1;
            if acc >= threshold * total * (1.0 - 1e-12) {
                break;
            }
        }
        Self {
            years,
            rows,
            mean,
            values,
            vectors,
            keep,
        }
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        self.vectors[..self.keep]
            .iter()
            .map(|v| v.iter().zip(x).zip(&self.mean).map(|((w, x), m)| w * (x - m)).sum())
            .collect()
    }

    /// Nearest historical year by exhaustive search; earliest on ties.
    pub fn nearest_year(&self, x: &[f64]) -> i32 {
        let q = self.project(x);
        let mut best = (self.years[0], f64::INFINITY);
        for (yr, row) in self.years.iter().zip(&self.rows) {
            let d: f64 = self.project(row).iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best.1 {
                best = (*yr, d);
            }
        }
        best.0
    }
}
