use crate::error::LinalgError;
use crate::scalar::Scalar;

/// Permutation given by the image of every index: `Π·e_i = e_{forward[i]}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PermutationMap {
    forward: Vec<usize>,
}

impl PermutationMap {
    pub fn identity(n: usize) -> Self {
        PermutationMap { forward: (0..n).collect() }
    }

    pub fn new(forward: Vec<usize>) -> Result<Self, LinalgError> {
        let n = forward.len();
        let mut seen = vec![false; n];
        for &f in &forward {
            if f >= n || seen[f] {
                return Err(LinalgError::Invalid("not a bijection".into()));
            }
            seen[f] = true;
        }
        Ok(PermutationMap { forward })
    }

    pub fn len(&self) -> usize {
        self.forward.len()
    }
    pub fn is_empty(&self) -> bool {
        self.forward.is_empty()
    }
    pub fn forward(&self) -> &[usize] {
        &self.forward
    }
    pub fn image(&self, i: usize) -> usize {
        self.forward[i]
    }

    pub fn inverse(&self) -> PermutationMap {
        let mut inv = vec![0; self.len()];
        for (i, &f) in self.forward.iter().enumerate() {
            inv[f] = i;
        }
        PermutationMap { forward: inv }
    }

    /// `Π·x`
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); x.len()];
        for (i, &f) in self.forward.iter().enumerate() {
            y[f] = x[i];
        }
        y
    }

    /// `Πᴴ·x`
    pub fn apply_transpose<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        self.forward.iter().map(|&f| x[f]).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.forward.iter().enumerate().all(|(i, &f)| i == f)
    }
}
