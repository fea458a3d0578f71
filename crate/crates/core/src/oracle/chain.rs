//! Finite absorbing Markov chains built by exploration.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

use num_rational::BigRational;
use num_traits::Zero;

use super::solve::{solve, solve_rational, to_rational, Csr};
use crate::error::{arg, Error, Result};

/// Successor of a transient state.
#[derive(Clone, Debug, PartialEq)]
pub enum Next<S> {
    To(S),
    /// Absorbed into the set with this label index.
    Absorb(usize),
}

/// Transient states, their sub-stochastic kernel `Q`, and the one-step
/// absorption probabilities into each labelled absorbing set.
#[derive(Clone, Debug)]
pub struct FiniteChain<S> {
    states: Vec<S>,
    index: HashMap<S, usize>,
    q: Csr,
    labels: Vec<String>,
    absorb: Vec<Vec<f64>>,
}

impl<S: Clone + Eq + Hash> FiniteChain<S> {
    /// Breadth-first exploration from `roots`; fails past `cap` states.
    pub fn explore<F>(roots: impl IntoIterator<Item = S>, labels: &[&str], cap: usize, mut step: F) -> Result<Self>
    where
        F: FnMut(&S) -> Vec<(Next<S>, f64)>,
    {
        let mut states = Vec::new();
        let mut index = HashMap::new();
        let mut queue = VecDeque::new();
        for r in roots {
            if !index.contains_key(&r) {
                index.insert(r.clone(), states.len());
                states.push(r.clone());
                queue.push_back(r);
            }
        }
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
        let mut absorb_rows: Vec<Vec<f64>> = Vec::new();
        let mut i = 0;
        while i < states.len() {
            let s = states[i].clone();
            queue.pop_front();
            let mut row = Vec::new();
            let mut ab = vec![0.0; labels.len()];
            for (next, p) in step(&s) {
                match next {
                    Next::Absorb(l) => ab[l] += p,
                    Next::To(t) => {
                        let j = match index.get(&t) {
                            Some(&j) => j,
                            None => {
                                if states.len() >= cap {
                                    return Err(Error::Resource(format!("chain exceeds {cap} states")));
                                }
                                index.insert(t.clone(), states.len());
                                states.push(t.clone());
                                queue.push_back(t);
                                states.len() - 1
                            }
                        };
                        row.push((j, p));
                    }
                }
            }
            rows.push(row);
            absorb_rows.push(ab);
            i += 1;
        }
        let absorb = (0..labels.len()).map(|l| absorb_rows.iter().map(|r| r[l]).collect()).collect();
        Ok(Self {
            states,
            index,
            q: Csr::from_rows(rows),
            labels: labels.iter().map(|s| s.to_string()).collect(),
            absorb,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[S] {
        &self.states
    }

    pub fn index_of(&self, s: &S) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kernel(&self) -> &Csr {
        &self.q
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Argument(format!("unknown absorbing label {label:?}")))
    }

    /// Every transient state can reach some absorbing set.
    pub fn check_absorbing(&self) -> Result<()> {
        let n = self.len();
        let mut reach = vec![false; n];
        let mut back = vec![Vec::new(); n];
        let mut queue = VecDeque::new();
        for i in 0..n {
            for (j, _) in self.q.row(i) {
                back[j].push(i);
            }
            if self.absorb.iter().any(|a| a[i] > 0.0) {
                reach[i] = true;
                queue.push_back(i);
            }
        }
        while let Some(j) = queue.pop_front() {
            for &i in &back[j] {
                if !reach[i] {
                    reach[i] = true;
                    queue.push_back(i);
                }
            }
        }
        match reach.iter().position(|r| !r) {
            None => Ok(()),
            Some(i) => Err(Error::Singular(format!("absorption unreachable from transient state #{i}"))),
        }
    }

    /// `P_s(absorbed into label)` for every transient `s`.
    pub fn absorption_probabilities(&self, label: &str) -> Result<Vec<f64>> {
        let l = self.label_index(label)?;
        self.check_absorbing()?;
        solve(&self.q.identity_minus(), &self.absorb[l])
    }

    pub fn absorption_probabilities_exact(&self, label: &str) -> Result<Vec<BigRational>> {
        let l = self.label_index(label)?;
        self.check_absorbing()?;
        let b: Vec<BigRational> = self.absorb[l].iter().map(|v| to_rational(*v)).collect();
        solve_rational(&self.q.identity_minus(), &b)
    }

    /// `E_s[sum_{n < absorption} w(X_n)]` for every transient `s`.
    pub fn expected_additive(&self, w: &[f64]) -> Result<Vec<f64>> {
        self.check_absorbing()?;
        solve(&self.q.identity_minus(), w)
    }

    pub fn expected_additive_exact(&self, w: &[f64]) -> Result<Vec<BigRational>> {
        self.check_absorbing()?;
        let b: Vec<BigRational> = w.iter().map(|v| to_rational(*v)).collect();
        solve_rational(&self.q.identity_minus(), &b)
    }

    /// Expected visits to each state before absorption, from `start`.
    pub fn green_function(&self, start: usize) -> Result<Vec<f64>> {
        if start >= self.len() {
            return arg("start state out of range");
        }
        self.check_absorbing()?;
        let mut e = vec![0.0; self.len()];
        e[start] = 1.0;
        solve(&self.q.identity_minus().transpose(), &e)
    }

    /// Distribution at time `t` of the chain killed on absorption.
    pub fn killed_kernel(&self, start: usize, t: u64) -> Result<Vec<f64>> {
        if start >= self.len() {
            return arg("start state out of range");
        }
        let work = (t as f64) * (self.q.nnz().max(1) as f64);
        if work > 2e11 {
            return Err(Error::Resource(format!("kernel iteration of {work:.1e} operations")));
        }
        let mut it = self.kernel_iter(start);
        for _ in 0..t {
            it.advance();
        }
        Ok(it.dist)
    }

    pub fn kernel_iter(&self, start: usize) -> KernelIter<'_> {
        let mut dist = vec![0.0; self.len()];
        dist[start] = 1.0;
        KernelIter { q: &self.q, dist, t: 0 }
    }

    /// Rows of the fundamental-matrix identity check: `max |((I - Q) G - I)_{ij}|`
    /// over columns `G e_j` for the listed `j`.
    pub fn green_residual(&self, cols: &[usize]) -> Result<f64> {
        let a = self.q.identity_minus();
        let mut worst: f64 = 0.0;
        for &j in cols {
            // Column j of G solves (I - Q) g = e_j.
            let mut e = vec![0.0; self.len()];
            e[j] = 1.0;
            let g = solve(&a, &e)?;
            let r = a.mul_vec(&g);
            for (i, ri) in r.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((ri - want).abs());
            }
        }
        Ok(worst)
    }
}

/// Step-by-step `mu Q^t`.
pub struct KernelIter<'a> {
    q: &'a Csr,
    pub dist: Vec<f64>,
    pub t: u64,
}

impl KernelIter<'_> {
    pub fn advance(&mut self) {
        let mut next = vec![0.0; self.dist.len()];
        for (i, &p) in self.dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, v) in self.q.row(i) {
                next[j] += p * v;
            }
        }
        self.dist = next;
        self.t += 1;
    }
}

pub fn rational_sum<'a>(it: impl Iterator<Item = &'a BigRational>) -> BigRational {
    it.fold(BigRational::zero(), |a, b| a + b)
}
