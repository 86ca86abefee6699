//! Lowest eigenpairs of the discretized 1D Hamiltonian `-1/2 d^2/dx^2 + U`.
//!
//! Eigenvalues of the 3-point (tridiagonal) operator are isolated by Sturm
//! bisection and their vectors found by inverse iteration. Optionally each
//! pair is then polished by inverse iteration on the 5-point (pentadiagonal)
//! operator, shifted by the Rayleigh quotient of the 3-point vector, which
//! takes the energy error from O(dx^2) to O(dx^4).

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    ThreePoint,
    #[default]
    FivePoint,
}

/// Count eigenvalues of the 3-point operator strictly below `lambda`.
fn sturm_count(diag: &[f64], off: f64, lambda: f64) -> usize {
    let off2 = off * off;
    let mut count = 0;
    let mut q = 1.0;
    for (j, &d) in diag.iter().enumerate() {
        q = if j == 0 { d - lambda } else { d - lambda - off2 / q };
        if q == 0.0 {
            q = f64::EPSILON * (d.abs() + off.abs());
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, rows stored as
/// windows wide enough for the fill produced by partial pivoting.
struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    a: Vec<f64>,
}

impl Banded {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            width,
            a: vec![0.0; n * width],
        }
    }

    fn idx(&self, i: usize, col: usize) -> Option<usize> {
        let lo = i as isize - self.kl as isize;
        let off = col as isize - lo;
        (off >= 0 && (off as usize) < self.width && col < self.n).then(|| i * self.width + off as usize)
    }

    fn get(&self, i: usize, col: usize) -> f64 {
        self.idx(i, col).map_or(0.0, |k| self.a[k])
    }

    fn set(&mut self, i: usize, col: usize, v: f64) {
        let k = self.idx(i, col).expect("entry inside band");
        self.a[k] = v;
    }

    /// Solve `A x = b` in place by Gaussian elimination with partial
    /// pivoting. Exact zero pivots are nudged, as usual for inverse iteration.
    fn solve(mut self, b: &mut [f64]) {
        let n = self.n;
        let reach = self.kl + self.ku;
        for c in 0..n {
            let last = (c + self.kl).min(n - 1);
            let mut p = c;
            for r in c + 1..=last {
                if self.get(r, c).abs() > self.get(p, c).abs() {
                    p = r;
                }
            }
            let cmax = (c + reach).min(n - 1);
            if p != c {
                for col in c..=cmax {
                    let (u, v) = (self.get(c, col), self.get(p, col));
                    self.set(c, col, v);
                    self.set(p, col, u);
                }
                b.swap(c, p);
            }
            let mut piv = self.get(c, c);
            if piv == 0.0 {
                piv = f64::EPSILON;
                self.set(c, c, piv);
            }
            for r in c + 1..=last {
                let m = self.get(r, c) / piv;
                if m == 0.0 {
                    continue;
                }
                for col in c..=cmax {
                    let v = self.get(r, col) - m * self.get(c, col);
                    self.set(r, col, v);
                }
                b[r] -= m * b[c];
            }
        }
        for c in (0..n).rev() {
            let cmax = (c + reach).min(n - 1);
            let mut s = b[c];
            for col in c + 1..=cmax {
                s -= self.get(c, col) * b[col];
            }
            b[c] = s / self.get(c, c);
        }
    }
}

fn operator(potential: &[f64], dx: f64, stencil: Stencil, shift: f64) -> Banded {
    let n = potential.len();
    match stencil {
        Stencil::ThreePoint => {
            let mut m = Banded::new(n, 1, 1);
            let h = 0.5 / (dx * dx);
            for i in 0..n {
                m.set(i, i, 2.0 * h + potential[i] - shift);
                if i > 0 {
                    m.set(i, i - 1, -h);
                }
                if i + 1 < n {
                    m.set(i, i + 1, -h);
                }
            }
            m
        }
        Stencil::FivePoint => {
            let mut m = Banded::new(n, 2, 2);
            let h = 0.5 / (12.0 * dx * dx);
            for i in 0..n {
                m.set(i, i, 30.0 * h + potential[i] - shift);
                for (k, c) in [(1usize, -16.0 * h), (2, h)] {
                    if i >= k {
                        m.set(i, i - k, c);
                    }
                    if i + k < n {
                        m.set(i, i + k, c);
                    }
                }
            }
            m
        }
    }
}

/// `H psi` for the chosen stencil with zero values beyond the grid.
pub(crate) fn apply(potential: &[f64], dx: f64, stencil: Stencil, psi: &[f64]) -> Vec<f64> {
    let n = psi.len();
    let at = |j: isize| if j < 0 || j >= n as isize { 0.0 } else { psi[j as usize] };
    (0..n)
        .map(|i| {
            let j = i as isize;
            let lap = match stencil {
                Stencil::ThreePoint => (at(j - 1) - 2.0 * at(j) + at(j + 1)) / (dx * dx),
                Stencil::FivePoint => {
                    (-at(j - 2) + 16.0 * at(j - 1) - 30.0 * at(j) + 16.0 * at(j + 1) - at(j + 2))
                        / (12.0 * dx * dx)
                }
            };
            -0.5 * lap + potential[i] * psi[i]
        })
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let s = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

fn rayleigh(potential: &[f64], dx: f64, stencil: Stencil, v: &[f64]) -> f64 {
    dot(v, &apply(potential, dx, stencil, v)) / dot(v, v)
}

fn inverse_iteration(
    potential: &[f64],
    dx: f64,
    stencil: Stencil,
    shift: f64,
    start: &[f64],
    lower: &[Vec<f64>],
    sweeps: usize,
) -> Vec<f64> {
    let mut v = start.to_vec();
    for _ in 0..sweeps {
        for u in lower {
            let c = dot(u, &v);
            v.iter_mut().zip(u).for_each(|(x, y)| *x -= c * y);
        }
        normalize(&mut v);
        operator(potential, dx, stencil, shift).solve(&mut v);
        normalize(&mut v);
    }
    v
}

/// Eigenpair in the Euclidean (unweighted) normalization.
#[derive(Clone, Debug)]
pub(crate) struct Pair {
    pub energy: f64,
    pub vector: Vec<f64>,
}

/// Lowest `k` eigenpairs, energies ascending.
pub(crate) fn lowest(potential: &[f64], dx: f64, k: usize, stencil: Stencil) -> Result<Vec<Pair>> {
    let n = potential.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot compute {k} states on {n} points")));
    }
    let h = 0.5 / (dx * dx);
    let diag: Vec<f64> = potential.iter().map(|u| 2.0 * h + u).collect();
    let lo0 = potential.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi0 = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * h;

    let mut out: Vec<Pair> = Vec::with_capacity(k);
    let mut lower: Vec<Vec<f64>> = Vec::with_capacity(k);
    for i in 0..k {
        let (mut lo, mut hi) = (lo0, hi0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sturm_count(&diag, -h, mid) > i {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 4.0 * f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
                break;
            }
        }
        let lambda = 0.5 * (lo + hi);
        let start: Vec<f64> = (0..n).map(|j| 1.0 + 0.01 * ((j * 7919 + i * 104729) % 97) as f64).collect();
        let mut v = inverse_iteration(potential, dx, Stencil::ThreePoint, lambda, &start, &lower, 3);
        let mut energy = lambda;
        if stencil == Stencil::FivePoint {
            let sigma = rayleigh(potential, dx, Stencil::FivePoint, &v);
            v = inverse_iteration(potential, dx, Stencil::FivePoint, sigma, &v, &lower, 3);
            energy = rayleigh(potential, dx, Stencil::FivePoint, &v);
        }
        if !energy.is_finite() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Eigensolver(format!("state {i} did not converge")));
        }
        if let Some(prev) = out.last() {
            if energy <= prev.energy {
                return Err(Error::Eigensolver(format!(
                    "energies not increasing at state {i} ({energy} <= {})",
                    prev.energy
                )));
            }
        }
        lower.push(v.clone());
        out.push(Pair { energy, vector: v });
    }
    Ok(out)
}
