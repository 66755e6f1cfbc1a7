//! Gaussian-kernel density estimates with boundary reflection.
//!
//! The CDF is evaluated by direct summation of kernel CDF terms, so it is
//! exact up to rounding. A tabulated grid of `(x, F(x))` pairs brackets the
//! root search in [`MarginalModel::quantile`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;

/// Lower clamp applied by [`MarginalModel::cdf`]; the upper clamp is `1 - CDF_EPS`.
pub const CDF_EPS: f64 = 1e-9;

pub const MIN_SAMPLES: usize = 30;

pub const DEFAULT_GRID_SIZE: usize = 2048;
/// Beyond this many bandwidths a kernel's CDF is 0 or 1 to below 1e-18.
const KERNEL_CUTOFF: f64 = 9.0;

/// Grid span past the sample range for unbounded sides, in bandwidths.
/// At 8h the kernel tail mass is below 1e-15.
const TAIL_BANDWIDTHS: f64 = 8.0;

/// Optional lower / upper bounds of the support. A finite bound reflects
/// kernel mass back into the support.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Support {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
}

impl Support {
    pub const UNBOUNDED: Support = Support { lo: None, hi: None };

    pub fn interval(lo: f64, hi: f64) -> Self {
        Support {
            lo: Some(lo),
            hi: Some(hi),
        }
    }

    pub fn lower(lo: f64) -> Self {
        Support { lo: Some(lo), hi: None }
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_some() || self.hi.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KdeOptions {
    pub grid_size: usize,
    /// Overrides Silverman's rule when set.
    pub bandwidth: Option<f64>,
}

impl Default for KdeOptions {
    fn default() -> Self {
        Self {
            grid_size: DEFAULT_GRID_SIZE,
            bandwidth: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalModel {
    samples: Vec<f64>,
    bandwidth: f64,
    support: Support,
    /// `G(lo)` and `G(hi) - G(lo)`, cached so that F(lo) = 0 and F(hi) = 1 exactly.
    offset: f64,
    mass: f64,
    cdf_grid: Vec<(f64, f64)>,
}

/// Silverman's rule of thumb, `0.9 · min(σ, IQR/1.34) · n^(-1/5)`.
/// Falls back to σ when the IQR collapses to zero.
pub fn silverman_bandwidth(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Fits a KDE to `samples` with Silverman's bandwidth.
pub fn fit_kde(samples: &[f64], support: Support) -> Result<MarginalModel> {
    fit_kde_with(samples, support, KdeOptions::default())
}

pub fn fit_kde_with(samples: &[f64], support: Support, opts: KdeOptions) -> Result<MarginalModel> {
    if samples.len() < MIN_SAMPLES {
        return Err(Error::InsufficientData {
            what: "samples",
            needed: MIN_SAMPLES,
            got: samples.len(),
            station: None,
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::Argument("non-finite sample".into()));
    }
    if let (Some(lo), Some(hi)) = (support.lo, support.hi) {
        if !(lo < hi) {
            return Err(Error::Argument(format!("empty support [{lo}, {hi}]")));
        }
    }
    if let Some(x) = samples.iter().find(|&&x| {
        support.lo.is_some_and(|lo| x < lo) || support.hi.is_some_and(|hi| x > hi)
    }) {
        return Err(Error::Argument(format!("sample {x} outside the support")));
    }
    let first = samples[0];
    if samples.iter().all(|&x| x == first) {
        return Err(Error::DegenerateMarginal { station: None });
    }
    if opts.grid_size < 1024 {
        return Err(Error::Argument("KDE grid needs at least 1024 points".into()));
    }

    let bandwidth = match opts.bandwidth {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(Error::Argument(format!("bandwidth {h} must be positive"))),
        None => silverman_bandwidth(samples),
    };
    if !(bandwidth > 0.0) {
        return Err(Error::DegenerateMarginal { station: None });
    }

    let mut model = MarginalModel {
        samples: samples.to_vec(),
        bandwidth,
        support,
        offset: 0.0,
        mass: 1.0,
        cdf_grid: Vec::new(),
    };
    model.offset = support.lo.map_or(0.0, |lo| model.mixture_cdf(lo));
    let top = support
        .hi
        .map_or(model.components() as f64, |hi| model.mixture_cdf(hi));
    model.mass = top - model.offset;
    model.cdf_grid = model.tabulate(opts.grid_size);
    Ok(model)
}

impl MarginalModel {
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn support(&self) -> Support {
        self.support
    }

    pub fn bounded(&self) -> bool {
        self.support.is_bounded()
    }

    pub fn cdf_grid(&self) -> &[(f64, f64)] {
        &self.cdf_grid
    }

    /// Kernel components per sample (the sample plus its reflections).
    fn components(&self) -> usize {
        1 + self.support.lo.is_some() as usize + self.support.hi.is_some() as usize
    }

    /// Kernel centres: each sample and its reflections at finite bounds.
    fn for_each_centre(&self, mut f: impl FnMut(f64)) {
        for &xi in &self.samples {
            f(xi);
            if let Some(lo) = self.support.lo {
                f(2.0 * lo - xi);
            }
            if let Some(hi) = self.support.hi {
                f(2.0 * hi - xi);
            }
        }
    }

    /// Sum of kernel CDF terms over samples and reflections, divided by n.
    /// Terms further than `KERNEL_CUTOFF` bandwidths away are taken as 0 or 1.
    fn mixture_cdf(&self, x: f64) -> f64 {
        self.mixture(x, false).0
    }

    /// `(Σ Φ((x - c)/h), Σ φ((x - c)/h))` over kernel centres `c`, divided by n.
    fn mixture(&self, x: f64, with_pdf: bool) -> (f64, f64) {
        let h = self.bandwidth;
        let (mut cdf, mut pdf) = (0.0, 0.0);
        self.for_each_centre(|c| {
            let t = (x - c) / h;
            if t > KERNEL_CUTOFF {
                cdf += 1.0;
            } else if t >= -KERNEL_CUTOFF {
                cdf += normal::cdf(t);
                if with_pdf {
                    pdf += normal::pdf(t);
                }
            }
        });
        let n = self.samples.len() as f64;
        (cdf / n, pdf / n)
    }

    /// CDF without the `[ε, 1-ε]` clamp. Exactly 0 at a finite lower bound
    /// and exactly 1 at a finite upper bound.
    pub fn cdf_unclamped(&self, x: f64) -> f64 {
        if self.support.lo.is_some_and(|lo| x <= lo) {
            return 0.0;
        }
        if self.support.hi.is_some_and(|hi| x >= hi) {
            return 1.0;
        }
        ((self.mixture_cdf(x) - self.offset) / self.mass).clamp(0.0, 1.0)
    }

    /// `F(x)` clamped to `[CDF_EPS, 1 - CDF_EPS]`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.cdf_unclamped(x).clamp(CDF_EPS, 1.0 - CDF_EPS)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if self.support.lo.is_some_and(|lo| x < lo) || self.support.hi.is_some_and(|hi| x > hi) {
            return 0.0;
        }
        self.mixture(x, true).1 / (self.bandwidth * self.mass)
    }

    fn grid_span(&self) -> (f64, f64) {
        let (min, max) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let pad = TAIL_BANDWIDTHS * self.bandwidth;
        (
            self.support.lo.unwrap_or(min - pad),
            self.support.hi.unwrap_or(max + pad),
        )
    }

    /// Tabulates F on an even grid, keeping only points where F strictly
    /// increases (saturated tails collapse to their first point).
    fn tabulate(&self, size: usize) -> Vec<(f64, f64)> {
        let (a, b) = self.grid_span();
        let step = (b - a) / (size - 1) as f64;
        let mut grid: Vec<(f64, f64)> = Vec::with_capacity(size);
        for k in 0..size {
            let x = if k == size - 1 { b } else { a + step * k as f64 };
            let f = self.cdf_unclamped(x);
            match grid.last() {
                Some(&(_, prev)) if f <= prev => {}
                _ => grid.push((x, f)),
            }
        }
        grid
    }

    /// Inverse CDF. Brackets `u` with the tabulated grid and refines with a
    /// safeguarded Newton iteration (bisection whenever a Newton step leaves
    /// the bracket), to `|F(x) - u| ≤ 1e-9` or a collapsed bracket.
    pub fn quantile(&self, u: f64) -> f64 {
        let grid = &self.cdf_grid;
        let (first, last) = (grid[0], grid[grid.len() - 1]);
        if u <= first.1 {
            return first.0;
        }
        if u >= last.1 {
            return last.0;
        }
        let k = grid.partition_point(|&(_, f)| f < u);
        let (mut a, mut fa) = grid[k - 1];
        let (mut b, mut fb) = grid[k];
        if fb == u {
            return b;
        }

        let scale = (last.0 - first.0).abs().max(f64::MIN_POSITIVE);
        let mut x = a + (b - a) * (u - fa) / (fb - fa);
        for _ in 0..200 {
            let (raw, dens) = self.mixture(x, true);
            let fx = ((raw - self.offset) / self.mass).clamp(0.0, 1.0);
            let err = fx - u;
            if err.abs() <= 1e-14 {
                return x;
            }
            if err < 0.0 {
                a = x;
                fa = fx;
            } else {
                b = x;
                fb = fx;
            }
            if b - a <= 1e-14 * scale {
                break;
            }
            let d = dens / (self.bandwidth * self.mass);
            let newton = x - err / d;
            x = if d > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
        }
        // pick the bracket end closer in probability
        if (u - fa).abs() <= (fb - u).abs() {
            a
        } else {
            b
        }
    }

    /// Draws from the fitted density: a resampled point plus kernel noise,
    /// folded back into the support at reflecting bounds.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::{Distribution, StandardNormal};
        loop {
            let i = rng.random_range(0..self.samples.len());
            let noise: f64 = StandardNormal.sample(rng);
            let mut x = self.samples[i] + self.bandwidth * noise;
            if let Some(lo) = self.support.lo {
                if x < lo {
                    x = 2.0 * lo - x;
                }
            }
            if let Some(hi) = self.support.hi {
                if x > hi {
                    x = 2.0 * hi - x;
                }
            }
            // a point reflected past the opposite bound is outside the
            // normalized density; redraw
            let inside = self.support.lo.is_none_or(|lo| x >= lo)
                && self.support.hi.is_none_or(|hi| x <= hi);
            if inside {
                return x;
            }
        }
    }
}
