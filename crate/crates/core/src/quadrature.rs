//! Gauss–Legendre rules: plain, tensorized and graded composite.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes (points of ℝ^d) with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub nodes: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl Rule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        crate::linalg::sum_compensated(
            self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(x)),
        )
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("quadrature needs at least one node".into()));
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root
        let theta = PI * (4.0 * i as f64 + 3.0) / (4.0 * nf + 2.0);
        let mut z = (1.0 - (nf - 1.0) / (8.0 * nf * nf * nf)) * theta.cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 * z.abs().max(1.0) {
                break;
            }
        }
        let (_, d) = legendre(n, z);
        if d != 0.0 {
            dp = d;
        }
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[n - 1 - i] = z;
        x[i] = -z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    Ok((x, w))
}

/// `(P_n(z), P_n'(z))` by the three-term recurrence.
fn legendre(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Gauss–Legendre on `[a, b]`.
pub fn gauss_legendre_interval(n: usize, a: f64, b: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(b > a) {
        return Err(Error::InvalidParameter(format!("empty interval [{a}, {b}]")));
    }
    let (x, w) = gauss_legendre(n)?;
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    Ok((x.iter().map(|z| c + h * z).collect(), w.iter().map(|v| h * v).collect()))
}

/// Tensorized Gauss–Legendre on `[-L, L]^d` with `n` nodes per axis.
pub fn tensor_box(n: usize, half_width: f64, d: usize) -> Result<Rule> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let (x, w) = gauss_legendre_interval(n, -half_width, half_width)?;
    tensorize(&x, &w, d)
}

pub(crate) fn tensorize(x: &[f64], w: &[f64], d: usize) -> Result<Rule> {
    let total = x
        .len()
        .checked_pow(d as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| Error::InvalidParameter("tensor rule too large".into()))?;
    let mut nodes = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        nodes.push(idx.iter().map(|&i| x[i]).collect());
        weights.push(idx.iter().map(|&i| w[i]).product());
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < x.len() {
                break;
            }
            idx[k] = 0;
        }
    }
    Ok(Rule { nodes, weights })
}

/// Layout of the graded composite rule.
#[derive(Debug, Clone, Copy)]
pub struct Grading {
    /// Gauss–Legendre order of each side panel.
    pub order: usize,
    /// Width of the central panel and of the uniform panels.
    pub width: f64,
    /// Extent after which panels grow geometrically up to the half width.
    pub uniform_extent: f64,
}

impl Default for Grading {
    fn default() -> Self {
        Self {
            order: 10,
            width: 1.0,
            uniform_extent: 50.0,
        }
    }
}

/// Symmetric composite Gauss–Legendre rule on `[-L, L]` with exactly `n` nodes.
///
/// A central panel `[-w/2, w/2]` is followed on each side by panels of width
/// `w` up to `uniform_extent`, then geometrically growing panels up to `L`.
/// Meant for slowly decaying integrands whose mass concentrates near zero.
pub fn graded_symmetric(n: usize, half_width: f64, grading: Grading) -> Result<(Vec<f64>, Vec<f64>)> {
    let Grading {
        order,
        width,
        uniform_extent,
    } = grading;
    if !(half_width > 0.0 && width > 0.0) || order == 0 {
        return Err(Error::InvalidParameter("graded rule needs positive widths".into()));
    }
    let a0 = 0.5 * width;
    let mut panels = if n > 1 { (n - 1) / (2 * order) } else { 0 };
    let mut center = n - 2 * panels * order;
    while center < order && panels > 0 {
        panels -= 1;
        center = n - 2 * panels * order;
    }
    if panels == 0 || half_width <= a0 {
        return gauss_legendre_interval(n, -half_width, half_width);
    }
    // keep at least one panel free to reach the half width
    let fit = ((uniform_extent.min(half_width) - a0) / width).floor().max(0.0) as usize;
    let mut uniform = fit.min(panels - 1);
    while uniform > 0 && a0 + uniform as f64 * width >= half_width {
        uniform -= 1;
    }
    let mut edges: Vec<f64> = (0..=uniform).map(|i| a0 + i as f64 * width).collect();
    let geometric = panels - uniform;
    let last = *edges.last().expect("nonempty");
    if geometric > 0 {
        let ratio = (half_width / last).powf(1.0 / geometric as f64);
        edges.extend((1..=geometric).map(|j| last * ratio.powi(j as i32)));
    }
    let (cx, cw) = gauss_legendre_interval(center, -a0, a0)?;
    let mut right: Vec<(f64, f64)> = Vec::with_capacity(panels * order);
    for pair in edges.windows(2) {
        if pair[1] <= pair[0] {
            return Err(Error::InvalidParameter(
                "graded rule panels do not fit inside the half width".into(),
            ));
        }
        let (x, w) = gauss_legendre_interval(order, pair[0], pair[1])?;
        right.extend(x.into_iter().zip(w));
    }
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for &(x, w) in right.iter().rev() {
        xs.push(-x);
        ws.push(w);
    }
    xs.extend(cx);
    ws.extend(cw);
    for &(x, w) in &right {
        xs.push(x);
        ws.push(w);
    }
    Ok((xs, ws))
}
