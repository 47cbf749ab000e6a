//! Cyclic Jacobi eigensolver for small Hermitian blocks.

use ndarray::Array2;

use crate::error::{KamError, Result};
use crate::C64;

pub const OFF_TOL: f64 = 1e-14;
pub const MAX_SWEEPS: usize = 100;

fn frob(h: &Array2<C64>) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn off_norm(h: &Array2<C64>) -> f64 {
    let n = h.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += h[[i, j]].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// Hermitian defect `|H - H*|_F / |H|_F`.
pub fn hermitian_defect(h: &Array2<C64>) -> f64 {
    let n = h.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += (h[[i, j]] - h[[j, i]].conj()).norm_sqr();
        }
    }
    let f = frob(h);
    if f == 0.0 {
        0.0
    } else {
        s.sqrt() / f
    }
}

/// Eigenpairs of a Hermitian matrix: ascending eigenvalues and a unitary
/// matrix whose columns are the eigenvectors. Each eigenvector is scaled so
/// that its first significant component is real and positive.
pub fn hermitian_eig(h: &Array2<C64>) -> Result<(Vec<f64>, Array2<C64>)> {
    let n = h.nrows();
    if h.ncols() != n {
        return Err(KamError::Layout("eigensolver needs a square matrix".into()));
    }
    let defect = hermitian_defect(h);
    if defect > 1e-12 {
        return Err(KamError::NotHermitian(defect));
    }
    let mut a = h.clone();
    for i in 0..n {
        for j in i + 1..n {
            let m = 0.5 * (a[[i, j]] + a[[j, i]].conj());
            a[[i, j]] = m;
            a[[j, i]] = m.conj();
        }
        a[[i, i]] = C64::new(a[[i, i]].re, 0.0);
    }
    let mut v = Array2::<C64>::eye(n);
    let scale = frob(&a);
    let mut converged = scale == 0.0 || n < 2;
    let mut sweeps = 0;
    while !converged {
        if sweeps >= MAX_SWEEPS {
            return Err(KamError::EigenFailure(sweeps));
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        converged = off_norm(&a) <= OFF_TOL * scale;
    }
    let mut idx: Vec<usize> = (0..n).collect();
    let vals: Vec<f64> = (0..n).map(|i| a[[i, i]].re).collect();
    let lead = |c: usize| -> usize {
        (0..n).find(|&r| v[[r, c]].norm() > 1e-8).unwrap_or(0)
    };
    idx.sort_by(|&x, &y| {
        vals[x]
            .partial_cmp(&vals[y])
            .unwrap()
            .then(lead(x).cmp(&lead(y)))
    });
    let mut out = Array2::<C64>::zeros((n, n));
    let mut ev = Vec::with_capacity(n);
    for (c, &i) in idx.iter().enumerate() {
        ev.push(vals[i]);
        let r0 = lead(i);
        let z = v[[r0, i]];
        let ph = if z.norm() > 0.0 { z.conj() / z.norm() } else { C64::new(1.0, 0.0) };
        for r in 0..n {
            out[[r, c]] = v[[r, i]] * ph;
        }
    }
    Ok((ev, out))
}

fn rotate(a: &mut Array2<C64>, v: &mut Array2<C64>, p: usize, q: usize) {
    let hpq = a[[p, q]];
    let c = hpq.norm();
    if c == 0.0 {
        return;
    }
    let app = a[[p, p]].re;
    let aqq = a[[q, q]].re;
    if c <= f64::EPSILON * 1e-3 * (app.abs() + aqq.abs()) {
        a[[p, q]] = C64::new(0.0, 0.0);
        a[[q, p]] = C64::new(0.0, 0.0);
        return;
    }
    let ph = hpq / c;
    let tau = (aqq - app) / (2.0 * c);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let co = 1.0 / (1.0 + t * t).sqrt();
    let si = t * co;
    // V = diag(1, conj(ph)) * [[co, si], [-si, co]] on the (p, q) plane.
    let vpp = C64::new(co, 0.0);
    let vpq = C64::new(si, 0.0);
    let vqp = -ph.conj() * si;
    let vqq = ph.conj() * co;
    let n = a.nrows();
    for r in 0..n {
        let x = a[[r, p]];
        let y = a[[r, q]];
        a[[r, p]] = x * vpp + y * vqp;
        a[[r, q]] = x * vpq + y * vqq;
    }
    for r in 0..n {
        let x = a[[p, r]];
        let y = a[[q, r]];
        a[[p, r]] = vpp.conj() * x + vqp.conj() * y;
        a[[q, r]] = vpq.conj() * x + vqq.conj() * y;
    }
    a[[p, q]] = C64::new(0.0, 0.0);
    a[[q, p]] = C64::new(0.0, 0.0);
    a[[p, p]] = C64::new(a[[p, p]].re, 0.0);
    a[[q, q]] = C64::new(a[[q, q]].re, 0.0);
    for r in 0..n {
        let x = v[[r, p]];
        let y = v[[r, q]];
        v[[r, p]] = x * vpp + y * vqp;
        v[[r, q]] = x * vpq + y * vqq;
    }
}

/// Symmetric real eigenproblem through the Hermitian solver.
pub fn symmetric_eig(h: &Array2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let hc = h.mapv(|x| C64::new(x, 0.0));
    let (vals, v) = hermitian_eig(&hc)?;
    Ok((vals, v.mapv(|z| z.re)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn diagonal_input() {
        let h = array![[c(3.0), c(0.0), c(0.0)], [c(0.0), c(1.0), c(0.0)], [c(0.0), c(0.0), c(2.0)]];
        let (vals, v) = hermitian_eig(&h).unwrap();
        assert_eq!(vals, vec![1.0, 2.0, 3.0]);
        assert_eq!(v[[1, 0]], c(1.0));
        assert_eq!(v[[2, 1]], c(1.0));
        assert_eq!(v[[0, 2]], c(1.0));
    }

    #[test]
    fn pauli_x() {
        let h = array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
        let (vals, _) = hermitian_eig(&h).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-15);
        assert!((vals[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_hermitian() {
        let h = array![[c(0.0), c(1.0)], [c(0.0), c(0.0)]];
        assert!(matches!(hermitian_eig(&h), Err(KamError::NotHermitian(_))));
    }
}
