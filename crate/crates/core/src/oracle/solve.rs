//! Sparse storage and a banded LU solver for `(I - Q) x = b`.

use std::collections::VecDeque;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Matrix bytes allowed for the band.
const BAND_BYTES: usize = 2 << 30;
pub const RATIONAL_MAX_STATES: usize = 10_000;

#[derive(Clone, Debug, Default)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut m = Csr { n, row_ptr: vec![0], ..Default::default() };
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                if m.cols.len() > *m.row_ptr.last().unwrap() && *m.cols.last().unwrap() == c {
                    *m.vals.last_mut().unwrap() += v;
                } else {
                    m.cols.push(c);
                    m.vals.push(v);
                }
            }
            m.row_ptr.push(m.cols.len());
        }
        m
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (self.cols[k], self.vals[k]))
    }

    pub fn transpose(&self) -> Csr {
        let mut rows = vec![Vec::new(); self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Csr::from_rows(rows)
    }

    /// `I - self`.
    pub fn identity_minus(&self) -> Csr {
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.row(i).map(|(j, v)| (j, -v)).collect();
                r.push((i, 1.0));
                r
            })
            .collect();
        Csr::from_rows(rows)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }
}

/// Reverse Cuthill-McKee order of the symmetrised pattern.
pub fn rcm_order(a: &Csr) -> Vec<usize> {
    let n = a.n;
    let mut adj = vec![Vec::new(); n];
    for i in 0..n {
        for (j, _) in a.row(i) {
            if i != j {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    for l in &mut adj {
        l.sort_unstable();
        l.dedup();
    }
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&i| (adj[i].len(), i));
    for &root in &by_degree {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut q = VecDeque::from([root]);
        while let Some(v) = q.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !seen[w]).collect();
            next.sort_by_key(|&w| (adj[w].len(), w));
            for w in next {
                seen[w] = true;
                q.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

struct Band<T> {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<T>,
}

impl<T: Clone> Band<T> {
    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width() + (j + self.kl - i)
    }
}

/// Permuted band layout of `a`: `perm[new] = old`.
fn layout(a: &Csr) -> (Vec<usize>, Vec<usize>, usize, usize) {
    let perm = rcm_order(a);
    let mut inv = vec![0; a.n];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    let (mut kl, mut ku) = (0, 0);
    for i in 0..a.n {
        for (j, _) in a.row(i) {
            let (pi, pj) = (inv[i], inv[j]);
            if pi > pj {
                kl = kl.max(pi - pj);
            } else {
                ku = ku.max(pj - pi);
            }
        }
    }
    (perm, inv, kl, ku)
}

struct FloatLu {
    band: Band<f64>,
    perm: Vec<usize>,
    inv: Vec<usize>,
}

impl FloatLu {
    fn new(a: &Csr) -> Result<Self> {
        let (perm, inv, kl, ku) = layout(a);
        let n = a.n;
        let w = kl + ku + 1;
        if n.saturating_mul(w).saturating_mul(8) > BAND_BYTES {
            return Err(Error::Resource(format!("band of {n} x {w} exceeds memory budget")));
        }
        let mut band = Band { n, kl, ku, data: vec![0.0; n * w] };
        for i in 0..n {
            for (j, v) in a.row(i) {
                let k = band.idx(inv[i], inv[j]);
                band.data[k] += v;
            }
        }
        for k in 0..n {
            let piv = band.data[band.idx(k, k)];
            if piv.abs() < 1e-300 || !piv.is_finite() {
                return Err(Error::Singular(format!("zero pivot at row {k}")));
            }
            let jmax = (k + band.ku).min(n - 1);
            for i in k + 1..=(k + band.kl).min(n - 1) {
                let ik = band.idx(i, k);
                if band.data[ik] == 0.0 {
                    continue;
                }
                let l = band.data[ik] / piv;
                band.data[ik] = l;
                for j in k + 1..=jmax {
                    let kj = band.data[band.idx(k, j)];
                    if kj != 0.0 {
                        let ij = band.idx(i, j);
                        band.data[ij] -= l * kj;
                    }
                }
            }
        }
        Ok(Self { band, perm, inv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let Band { n, kl, ku, .. } = self.band;
        let mut y: Vec<f64> = (0..n).map(|i| b[self.perm[i]]).collect();
        for i in 0..n {
            let mut s = y[i];
            for k in i.saturating_sub(kl)..i {
                s -= self.band.data[self.band.idx(i, k)] * y[k];
            }
            y[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for j in i + 1..=(i + ku).min(n - 1) {
                s -= self.band.data[self.band.idx(i, j)] * y[j];
            }
            y[i] = s / self.band.data[self.band.idx(i, i)];
        }
        (0..n).map(|old| y[self.inv[old]]).collect()
    }
}

/// Solves `a x = b` by banded LU with two rounds of iterative refinement.
///
/// No pivoting: intended for nonsingular M-matrices such as `I - Q`.
pub fn solve(a: &Csr, b: &[f64]) -> Result<Vec<f64>> {
    let lu = FloatLu::new(a)?;
    let mut x = lu.solve(b);
    for _ in 0..2 {
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let d = lu.solve(&r);
        for (xi, di) in x.iter_mut().zip(d) {
            *xi += di;
        }
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite solution".into()));
    }
    Ok(x)
}

pub fn to_rational(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite transition probability")
}

/// Exact solve over the rationals. Entries of `a` are converted exactly
/// from their binary floating-point values.
pub fn solve_rational(a: &Csr, b: &[BigRational]) -> Result<Vec<BigRational>> {
    let n = a.n;
    if n > RATIONAL_MAX_STATES {
        return Err(Error::Resource(format!("rational mode limited to {RATIONAL_MAX_STATES} states, got {n}")));
    }
    let (perm, inv, kl, ku) = layout(a);
    let w = kl + ku + 1;
    if n.saturating_mul(w) > 50_000_000 {
        return Err(Error::Resource("rational band too large".into()));
    }
    let zero = BigRational::zero();
    let mut band = Band { n, kl, ku, data: vec![zero.clone(); n * w] };
    for i in 0..n {
        for (j, v) in a.row(i) {
            let k = band.idx(inv[i], inv[j]);
            band.data[k] += to_rational(v);
        }
    }
    let mut y: Vec<BigRational> = (0..n).map(|i| b[perm[i]].clone()).collect();
    for k in 0..n {
        let piv = band.data[band.idx(k, k)].clone();
        if piv.is_zero() {
            return Err(Error::Singular(format!("zero pivot at row {k}")));
        }
        for i in k + 1..=(k + kl).min(n - 1) {
            let ik = band.idx(i, k);
            if band.data[ik].is_zero() {
                continue;
            }
            let l = &band.data[ik] / &piv;
            band.data[ik] = zero.clone();
            for j in k + 1..=(k + ku).min(n - 1) {
                let kj = band.data[band.idx(k, j)].clone();
                if !kj.is_zero() {
                    let ij = band.idx(i, j);
                    band.data[ij] -= &l * kj;
                }
            }
            let yk = y[k].clone();
            y[i] -= l * yk;
        }
    }
    for i in (0..n).rev() {
        let mut s = y[i].clone();
        for j in i + 1..=(i + ku).min(n - 1) {
            let e = &band.data[band.idx(i, j)];
            if !e.is_zero() {
                s -= e * &y[j];
            }
        }
        y[i] = s / &band.data[band.idx(i, i)];
    }
    Ok((0..n).map(|old| y[inv[old]].clone()).collect())
}

pub fn rational_one() -> BigRational {
    BigRational::one()
}

pub fn rational_int(k: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lap(n: usize) -> Csr {
        // I - Q for the walk on a path killed at both ends.
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 1.0)];
                if i > 0 {
                    r.push((i - 1, -0.5));
                }
                if i + 1 < n {
                    r.push((i + 1, -0.5));
                }
                r
            })
            .collect();
        Csr::from_rows(rows)
    }

    #[test]
    fn path_hitting_probabilities() {
        let n = 9;
        let a = lap(n);
        let mut b = vec![0.0; n];
        b[n - 1] = 0.5;
        let x = solve(&a, &b).unwrap();
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - (i + 1) as f64 / (n + 1) as f64).abs() < 1e-14);
        }
        let br: Vec<BigRational> = b.iter().map(|v| to_rational(*v)).collect();
        let xr = solve_rational(&a, &br).unwrap();
        for (i, xi) in xr.iter().enumerate() {
            assert_eq!(*xi, BigRational::new((i as i64 + 1).into(), (n as i64 + 1).into()));
        }
    }

    #[test]
    fn singular_detected() {
        let a = Csr::from_rows(vec![vec![(0, 1.0), (1, -1.0)], vec![(0, -1.0), (1, 1.0)]]);
        assert!(matches!(solve(&a, &[0.0, 0.0]), Err(Error::Singular(_))));
    }

    #[test]
    fn rcm_is_permutation() {
        let a = lap(50);
        let mut o = rcm_order(&a);
        o.sort();
        assert_eq!(o, (0..50).collect::<Vec<_>>());
    }
}
