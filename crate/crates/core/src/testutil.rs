use rand::Rng;
use rand_distr::StandardNormal;

use crate::encoding::{c, ComplexMatrix};

pub(crate) fn random_matrix<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(dim, |_, _| c(rng.sample(StandardNormal), rng.sample(StandardNormal)))
}

/// Haar-ish unitary from Gram-Schmidt on a Gaussian matrix.
pub(crate) fn random_unitary<R: Rng>(rng: &mut R, dim: usize) -> ComplexMatrix {
    random_matrix(rng, dim).gram_schmidt()
}
