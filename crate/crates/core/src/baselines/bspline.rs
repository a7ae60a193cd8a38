//! Clamped B-spline bases on [0, 1].

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BsplineBasis {
    order: usize,
    breakpoints: Vec<f64>,
    // breakpoints with the end knots repeated `order` times
    knots: Vec<f64>,
}

impl BsplineBasis {
    pub fn new(order: usize, breakpoints: Vec<f64>) -> Result<Self> {
        if order == 0 {
            return Err(Error::invalid("B-spline order must be at least 1"));
        }
        if breakpoints.len() < 2 {
            return Err(Error::invalid("at least two breakpoints are required"));
        }
        if breakpoints[0] != 0.0 || *breakpoints.last().unwrap() != 1.0 {
            return Err(Error::invalid("breakpoints must start at 0 and end at 1"));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("breakpoints must be strictly increasing"));
        }
        let mut knots = Vec::with_capacity(breakpoints.len() + 2 * (order - 1));
        knots.extend(core::iter::repeat_n(0.0, order - 1));
        knots.extend_from_slice(&breakpoints);
        knots.extend(core::iter::repeat_n(1.0, order - 1));
        Ok(BsplineBasis {
            order,
            breakpoints,
            knots,
        })
    }

    /// `count` equispaced breakpoints including both endpoints.
    pub fn equispaced(order: usize, count: usize) -> Result<Self> {
        if count < 2 {
            return Err(Error::invalid("at least two breakpoints are required"));
        }
        let mut bp: Vec<f64> = (0..count).map(|i| i as f64 / (count - 1) as f64).collect();
        bp[count - 1] = 1.0;
        BsplineBasis::new(order, bp)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions: order plus interior breakpoints.
    pub fn count(&self) -> usize {
        self.order + self.breakpoints.len() - 2
    }

    fn degree(&self) -> usize {
        self.order - 1
    }

    /// Knot span index `mu` with `knots[mu] <= t < knots[mu + 1]`; the right end maps to the last span.
    fn span(&self, t: f64) -> usize {
        let p = self.degree();
        let last = self.count() - 1;
        if t >= 1.0 {
            return last;
        }
        // knots[p..=last+1] are the breakpoints
        let mut lo = p;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if t < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    fn check(&self, t: f64) -> Result<()> {
        if (0.0..=1.0).contains(&t) {
            Ok(())
        } else {
            Err(Error::OutOfDomain(t))
        }
    }

    /// Values of all basis functions at `t`.
    pub fn eval(&self, t: f64) -> Result<Vec<f64>> {
        self.eval_derivative(t, 0)
    }

    /// `deriv`-th derivative of every basis function at `t`.
    pub fn eval_derivative(&self, t: f64, deriv: usize) -> Result<Vec<f64>> {
        self.check(t)?;
        let mut out = vec![0.0; self.count()];
        if deriv >= self.order {
            return Ok(out);
        }
        let span = self.span(t);
        let local = self.local_derivatives(span, t, deriv);
        let first = span - self.degree();
        out[first..=span].copy_from_slice(&local);
        Ok(out)
    }

    /// Nonzero basis derivatives on `span` (Piegl & Tiller A2.3).
    fn local_derivatives(&self, span: usize, t: f64, deriv: usize) -> Vec<f64> {
        let p = self.degree();
        let u = &self.knots;
        let mut ndu = vec![vec![0.0; p + 1]; p + 1];
        let mut left = vec![0.0; p + 1];
        let mut right = vec![0.0; p + 1];
        ndu[0][0] = 1.0;
        for j in 1..=p {
            left[j] = t - u[span + 1 - j];
            right[j] = u[span + j] - t;
            let mut saved = 0.0;
            for r in 0..j {
                ndu[j][r] = right[r + 1] + left[j - r];
                let temp = ndu[r][j - 1] / ndu[j][r];
                ndu[r][j] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            ndu[j][j] = saved;
        }
        if deriv == 0 {
            return (0..=p).map(|j| ndu[j][p]).collect();
        }
        let mut ders = vec![0.0; p + 1];
        let mut a = [vec![0.0; p + 1], vec![0.0; p + 1]];
        for r in 0..=p {
            let (mut s1, mut s2) = (0usize, 1usize);
            a[0].iter_mut().for_each(|v| *v = 0.0);
            a[0][0] = 1.0;
            let mut d = 0.0;
            for k in 1..=deriv {
                d = 0.0;
                let rk = r as isize - k as isize;
                let pk = p - k;
                if r >= k {
                    a[s2][0] = a[s1][0] / ndu[pk + 1][rk as usize];
                    d = a[s2][0] * ndu[rk as usize][pk];
                }
                let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
                let j2 = if r as isize - 1 <= pk as isize {
                    k - 1
                } else {
                    p - r
                };
                for j in j1..=j2 {
                    let idx = (rk + j as isize) as usize;
                    a[s2][j] = (a[s1][j] - a[s1][j - 1]) / ndu[pk + 1][idx];
                    d += a[s2][j] * ndu[idx][pk];
                }
                if r <= pk {
                    a[s2][k] = -a[s1][k - 1] / ndu[pk + 1][r];
                    d += a[s2][k] * ndu[r][pk];
                }
                core::mem::swap(&mut s1, &mut s2);
            }
            ders[r] = d;
        }
        let factor: f64 = (0..deriv).map(|i| (p - i) as f64).product();
        ders.iter_mut().for_each(|v| *v *= factor);
        ders
    }

    /// Basis values at each point, one row per point.
    pub fn design(&self, points: &[f64]) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(points.len(), self.count());
        for (row, &t) in points.iter().enumerate() {
            for (col, v) in self.eval(t)?.into_iter().enumerate() {
                m[(row, col)] = v;
            }
        }
        Ok(m)
    }

    /// `G_pq = integral of B_p^(d) B_q^(d)` over [0, 1], by Gauss-Legendre per breakpoint interval.
    pub fn derivative_gram(&self, deriv: usize) -> DMatrix<f64> {
        let m = self.count();
        let mut g = DMatrix::zeros(m, m);
        // integrand degree <= 2 (order - 1); `order` nodes are exact to degree 2 order - 1
        let (nodes, weights) = gauss_legendre(self.order.max(1));
        for w in self.breakpoints.windows(2) {
            let (a, b) = (w[0], w[1]);
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (x, wt) in nodes.iter().zip(weights.iter()) {
                let t = mid + half * x;
                let vals = self
                    .eval_derivative(t, deriv)
                    .expect("quadrature node lies inside [0, 1]");
                for p in 0..m {
                    if vals[p] == 0.0 {
                        continue;
                    }
                    for q in 0..m {
                        g[(p, q)] += half * wt * vals[p] * vals[q];
                    }
                }
            }
        }
        g
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let n = count as f64;
    for i in 0..count {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
