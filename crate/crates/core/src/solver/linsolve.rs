//! Preconditioned BiCGSTAB for the Crank–Nicolson systems `(I - i alpha H) x = b`.

use crate::grid::{SpatialGrid, C64};
use crate::spectral;

use super::operator::{prev, Operator};

pub trait Preconditioner {
    /// `out ~ S^{-1} r`.
    fn solve(&self, r: &[C64], out: &mut [C64]);
}

/// `S = I - i alpha H`.
pub struct CnSystem<'a> {
    pub op: &'a Operator,
    pub alpha: f64,
}

impl CnSystem<'_> {
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        self.op.apply_into(x, out);
        let s = C64::new(0.0, -self.alpha);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi + s * *o;
        }
    }
}

/// Exact solver for periodic tridiagonal systems (Thomas algorithm plus a
/// Sherman–Morrison correction for the two corner entries).
pub struct CyclicTridiagonal {
    sub: Vec<C64>,
    cprime: Vec<C64>,
    pivots: Vec<C64>,
    gamma: C64,
    beta: C64,
    z: Vec<C64>,
    denom: C64,
}

impl CyclicTridiagonal {
    /// Row `i` reads `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1]`, indices mod n.
    pub fn new(sub: Vec<C64>, diag: Vec<C64>, sup: Vec<C64>) -> Self {
        let n = diag.len();
        let gamma = -diag[0];
        let beta = sub[0];
        let alpha = sup[n - 1];
        let mut bb = diag;
        bb[0] -= gamma;
        bb[n - 1] -= alpha * beta / gamma;
        let mut cprime = vec![C64::new(0.0, 0.0); n];
        let mut pivots = vec![C64::new(0.0, 0.0); n];
        pivots[0] = bb[0];
        cprime[0] = sup[0] / bb[0];
        for i in 1..n {
            let m = bb[i] - sub[i] * cprime[i - 1];
            pivots[i] = m;
            cprime[i] = sup[i] / m;
        }
        let mut s = Self {
            sub,
            cprime,
            pivots,
            gamma,
            beta,
            z: Vec::new(),
            denom: C64::new(1.0, 0.0),
        };
        let mut u = vec![C64::new(0.0, 0.0); n];
        u[0] = gamma;
        u[n - 1] = alpha;
        let mut z = vec![C64::new(0.0, 0.0); n];
        s.thomas(&u, &mut z);
        s.denom = C64::new(1.0, 0.0) + z[0] + beta * z[n - 1] / gamma;
        s.z = z;
        s
    }

    fn thomas(&self, d: &[C64], x: &mut [C64]) {
        let n = d.len();
        x[0] = d[0] / self.pivots[0];
        for i in 1..n {
            x[i] = (d[i] - self.sub[i] * x[i - 1]) / self.pivots[i];
        }
        for i in (0..n - 1).rev() {
            let next = x[i + 1];
            x[i] -= self.cprime[i] * next;
        }
    }

    /// The CN matrix of a one-dimensional operator.
    pub fn for_cn(op: &Operator, alpha: f64) -> Self {
        let g = op.grid();
        let inv = 1.0 / (g.spacing() * g.spacing());
        let h = op.half_coefficients(0);
        let v = op.potential();
        let ia = C64::new(0.0, -alpha);
        let n = g.len();
        let mut sub = Vec::with_capacity(n);
        let mut diag = Vec::with_capacity(n);
        let mut sup = Vec::with_capacity(n);
        for i in 0..n {
            let hp = h[prev(g, i, 0)];
            sub.push(ia * hp * inv);
            sup.push(ia * h[i] * inv);
            diag.push(C64::new(1.0, 0.0) + ia * (v[i] - (h[i] + hp) * inv));
        }
        Self::new(sub, diag, sup)
    }
}

impl Preconditioner for CyclicTridiagonal {
    fn solve(&self, r: &[C64], out: &mut [C64]) {
        let n = r.len();
        self.thomas(r, out);
        let f = (out[0] + self.beta * out[n - 1] / self.gamma) / self.denom;
        for (o, z) in out.iter_mut().zip(&self.z) {
            *o -= f * z;
        }
    }
}

/// Fourier-diagonal inverse of the CN matrix with all coefficients replaced
/// by their means.
pub struct FourierMean {
    grid: SpatialGrid,
    inv_symbol: Vec<C64>,
}

impl FourierMean {
    pub fn for_cn(op: &Operator, alpha: f64) -> Self {
        let g = *op.grid();
        let dim = g.dim();
        let cbar = (0..dim)
            .map(|k| op.half_coefficients(k).iter().sum::<f64>() / g.len() as f64)
            .sum::<f64>()
            / dim as f64;
        let vbar = op.potential().iter().sum::<f64>() / g.len() as f64;
        let xi = spectral::wavenumbers(&g);
        let dx = g.spacing();
        let lap: Vec<f64> = xi
            .iter()
            .map(|x| -4.0 / (dx * dx) * (0.5 * x * dx).sin().powi(2))
            .collect();
        let inv_symbol = (0..g.len())
            .map(|k| {
                let idx = g.split(k);
                let lam = cbar * (0..dim).map(|a| lap[idx[a]]).sum::<f64>() + vbar;
                C64::new(1.0, -alpha * lam).inv()
            })
            .collect();
        Self { grid: g, inv_symbol }
    }
}

impl Preconditioner for FourierMean {
    fn solve(&self, r: &[C64], out: &mut [C64]) {
        out.copy_from_slice(r);
        spectral::forward(&self.grid, out);
        for (o, s) in out.iter_mut().zip(&self.inv_symbol) {
            *o *= s;
        }
        spectral::inverse(&self.grid, out);
    }
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveInfo {
    pub iterations: usize,
    /// `||b - S x|| / ||b||` recomputed from the returned iterate.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Right-preconditioned BiCGSTAB started from `K^{-1} b`.
pub fn bicgstab(
    system: &CnSystem<'_>,
    precond: &dyn Preconditioner,
    b: &[C64],
    x: &mut [C64],
    tol: f64,
    max_iter: usize,
) -> SolveInfo {
    let n = b.len();
    let zero = C64::new(0.0, 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = zero);
        return SolveInfo {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    precond.solve(b, x);
    let mut r = vec![zero; n];
    system.apply(x, &mut r);
    for (ri, bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let rhat = r.clone();
    let (mut rho, mut alpha, mut omega) = (C64::new(1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0));
    let mut v = vec![zero; n];
    let mut p = vec![zero; n];
    let mut y = vec![zero; n];
    let mut s = vec![zero; n];
    let mut z = vec![zero; n];
    let mut t = vec![zero; n];
    let mut iterations = 0;
    while norm(&r) > tol * bnorm && iterations < max_iter {
        iterations += 1;
        let rho_new = dot(&rhat, &r);
        if rho_new.norm() == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond.solve(&p, &mut y);
        system.apply(&y, &mut v);
        alpha = rho / dot(&rhat, &v);
        for i in 0..n {
            x[i] += alpha * y[i];
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol * bnorm {
            r.copy_from_slice(&s);
            break;
        }
        precond.solve(&s, &mut z);
        system.apply(&z, &mut t);
        let tt = dot(&t, &t).re;
        omega = if tt == 0.0 { zero } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    system.apply(x, &mut t);
    let res = t.iter().zip(b).map(|(a, bi)| (bi - a).norm_sqr()).sum::<f64>().sqrt() / bnorm;
    SolveInfo {
        iterations,
        relative_residual: res,
        converged: res <= tol,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::coefficients::{CoefficientNet, FieldSpec, Profile};
    use crate::solver::operator::build_operator;

    fn rough(dim: usize) -> CoefficientNet {
        CoefficientNet {
            c: vec![FieldSpec::stationary(1.0, 2.0, Profile::Random { seed: 11, cell: 0.07 }); dim],
            v: FieldSpec::stationary(0.0, 5.0, Profile::Random { seed: 12, cell: 0.2 }),
            c0: 1.0,
        }
    }

    fn rhs(n: usize) -> Vec<C64> {
        (0..n)
            .map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
            .collect()
    }

    #[test]
    fn cyclic_tridiagonal_is_exact() {
        let g = SpatialGrid::new(1, 1.0, 256).unwrap();
        let op = build_operator(&rough(1), 0.1, 0.0, g).unwrap();
        let sys = CnSystem { op: &op, alpha: 0.01 };
        let pre = CyclicTridiagonal::for_cn(&op, 0.01);
        let b = rhs(256);
        let mut x = vec![C64::new(0.0, 0.0); 256];
        pre.solve(&b, &mut x);
        let mut sx = vec![C64::new(0.0, 0.0); 256];
        sys.apply(&x, &mut sx);
        let err = sx.iter().zip(&b).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn bicgstab_2d_with_fourier_preconditioner() {
        let g = SpatialGrid::new(2, 1.0, 32).unwrap();
        let op = build_operator(&rough(2), 0.1, 0.0, g).unwrap();
        let sys = CnSystem { op: &op, alpha: 0.005 };
        let pre = FourierMean::for_cn(&op, 0.005);
        let b = rhs(g.len());
        let mut x = vec![C64::new(0.0, 0.0); g.len()];
        let info = bicgstab(&sys, &pre, &b, &mut x, 1e-12, 200);
        assert!(info.converged, "{info:?}");
        assert!(info.iterations < 60);
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = SpatialGrid::new(1, 1.0, 16).unwrap();
        let op = build_operator(&CoefficientNet::free(1), 0.5, 0.0, g).unwrap();
        let sys = CnSystem { op: &op, alpha: 0.1 };
        let pre = CyclicTridiagonal::for_cn(&op, 0.1);
        let mut x = vec![C64::new(1.0, 0.0); 16];
        let info = bicgstab(&sys, &pre, &vec![C64::new(0.0, 0.0); 16], &mut x, 1e-12, 10);
        assert!(info.converged);
        assert!(x.iter().all(|v| v.norm() == 0.0));
    }
}
