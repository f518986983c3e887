//! Addressable Gaussian streams.
//!
//! Element `e` of stream `(seed, id)` is produced by a ChaCha8 generator
//! keyed by `seed`, switched to stream `id` and positioned at word `4e`; two
//! 64-bit draws feed one Box–Muller transform. Any element can therefore be
//! regenerated without producing the ones before it.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::Matrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SeededStream {
    pub seed: u64,
    pub id: u64,
}

impl SeededStream {
    pub fn new(seed: u64, id: u64) -> Self {
        SeededStream { seed, id }
    }

    fn rng_at(&self, element: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.id);
        rng.set_word_pos(4 * element as u128);
        rng
    }

    /// Fills `out` with elements `start, start+1, …`.
    pub fn fill(&self, start: u64, out: &mut [f64]) {
        let mut rng = self.rng_at(start);
        for v in out {
            *v = box_muller(&mut rng);
        }
    }

    pub fn element(&self, e: u64) -> f64 {
        box_muller(&mut self.rng_at(e))
    }

    /// Uniform draws in `[0, 1)` from the same keyed generator, starting at
    /// word zero. Used for index sampling and synthetic data.
    pub fn uniform_rng(&self) -> ChaCha8Rng {
        self.rng_at(0)
    }
}

fn box_muller(rng: &mut ChaCha8Rng) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * SCALE;
    let u2 = (rng.next_u64() >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `rows × cols` standard Gaussian matrix; entry `(i, j)` is element
/// `i + rows·j` of the stream.
pub fn gaussian_matrix(rows: usize, cols: usize, stream: SeededStream) -> Matrix {
    let mut m = Matrix::zeros(rows, cols);
    stream.fill(0, m.as_mut_slice());
    m
}

/// Rows `lo..hi` of the `rows × cols` matrix [`gaussian_matrix`] would build.
pub fn gaussian_rows(rows: usize, cols: usize, lo: usize, hi: usize, stream: SeededStream) -> Matrix {
    let mut m = Matrix::zeros(hi - lo, cols);
    for j in 0..cols {
        stream.fill((lo + rows * j) as u64, m.column_mut(j));
    }
    m
}
