use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::TriangleState;

/// Atoms closer than this in L1 are merged.
pub const MERGE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub weight: f64,
    pub state: TriangleState,
}

/// A finitely supported probability measure on the state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    atoms: Vec<Atom>,
}

impl ParticleEnsemble {
    /// Validates weights (positive, summing to 1 within 1e-12) and states,
    /// then merges coincident atoms.
    pub fn new(atoms: Vec<(f64, TriangleState)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("ensemble must contain at least one atom"));
        }
        let mut sum = 0.0;
        for (w, x) in &atoms {
            if !w.is_finite() || *w <= 0.0 {
                return Err(Error::invalid(format!("atom weight must be positive, got {w}")));
            }
            x.validate()?;
            sum += w;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("atom weights sum to {sum}, expected 1")));
        }
        let atoms = atoms
            .into_iter()
            .map(|(weight, state)| Atom { weight, state })
            .collect();
        Ok(Self::from_atoms_unchecked(atoms).merged())
    }

    /// Equal-weight ensemble over `states`.
    pub fn uniform(states: &[TriangleState]) -> Result<Self> {
        let w = 1.0 / states.len().max(1) as f64;
        let atoms: Vec<_> = states.iter().map(|x| (w, *x)).collect();
        if atoms.is_empty() {
            return Err(Error::invalid("ensemble must contain at least one atom"));
        }
        for (_, x) in &atoms {
            x.validate()?;
        }
        // 1/M weights may miss 1 by a few ulps for large M; skip the sum check.
        Ok(Self::from_atoms_unchecked(
            atoms
                .into_iter()
                .map(|(weight, state)| Atom { weight, state })
                .collect(),
        )
        .merged())
    }

    pub fn delta(x: TriangleState) -> Result<Self> {
        x.validate()?;
        Ok(Self {
            atoms: vec![Atom { weight: 1.0, state: x }],
        })
    }

    pub(crate) fn from_atoms_unchecked(atoms: Vec<Atom>) -> Self {
        Self { atoms }
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Weighted mean state, accumulated in atom order.
    pub fn mean(&self) -> TriangleState {
        let mut acc = [0.0; 5];
        for a in &self.atoms {
            for (s, v) in acc.iter_mut().zip(a.state.to_array()) {
                *s += a.weight * v;
            }
        }
        TriangleState::from_array(acc)
    }

    /// Weighted mean of `f` over the atoms.
    pub fn expect<F: Fn(&TriangleState) -> f64>(&self, f: F) -> f64 {
        self.atoms.iter().map(|a| a.weight * f(&a.state)).sum()
    }

    pub fn swap_ab(&self) -> Self {
        Self {
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    weight: a.weight,
                    state: a.state.swap_ab(),
                })
                .collect(),
        }
    }

    /// Merges atoms within [`MERGE_TOL`] of an earlier atom into it. The
    /// surviving atoms keep their original relative order.
    pub fn merged(self) -> Self {
        if self.atoms.len() < 2 {
            return self;
        }
        let mut out: Vec<Atom> = Vec::with_capacity(self.atoms.len());
        'outer: for a in self.atoms {
            for b in out.iter_mut() {
                if b.state.l1(&a.state) <= MERGE_TOL {
                    b.weight += a.weight;
                    continue 'outer;
                }
            }
            out.push(a);
        }
        Self { atoms: out }
    }

    /// True when the ensemble equals its own `A <-> B` mirror image as a
    /// measure (bit-exact states and weights).
    pub fn is_swap_symmetric(&self) -> bool {
        let mut used = vec![false; self.atoms.len()];
        for a in &self.atoms {
            let mirror = a.state.swap_ab();
            let found = self
                .atoms
                .iter()
                .enumerate()
                .find(|(j, b)| !used[*j] && b.state == mirror && b.weight == a.weight);
            match found {
                Some((j, _)) => used[j] = true,
                None => return false,
            }
        }
        true
    }

    /// L1 diameter of the support.
    pub fn diameter(&self) -> f64 {
        let mut d: f64 = 0.0;
        for (i, a) in self.atoms.iter().enumerate() {
            for b in &self.atoms[i + 1..] {
                d = d.max(a.state.l1(&b.state));
            }
        }
        d
    }
}
