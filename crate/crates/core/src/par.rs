//! Deterministic data-parallel helpers.
//!
//! Realization `i` of any ensemble draws from its own ChaCha stream
//! `(master_seed, i)`, and reductions fold fixed-size chunks in index order.
//! Output therefore depends only on the inputs, never on the worker count or
//! on whether the `parallel` feature is compiled in.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Realizations per reduction chunk. Part of the determinism contract:
/// changing it changes the floating-point summation order.
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Uses the ambient rayon pool. Without the `parallel` feature this is
    /// identical to [`Execution::Sequential`].
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// RNG for realization `stream` of an ensemble seeded with `master_seed`.
pub fn realization_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// `(0..n).map(f).collect()`, in parallel when requested. Order is preserved.
pub fn map_indexed<T, F>(exec: Execution, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Per-component running mean and centred second moment (Welford), merged
/// across chunks with Chan's pairwise update.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub count: usize,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Moments {
    fn zeros(dim: usize) -> Self {
        Self {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, sample: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let delta = x - *m;
            *m += delta / k;
            *s += delta * (x - *m);
        }
    }

    fn absorb(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        let na = self.count as f64;
        let nb = other.count as f64;
        let n = na + nb;
        for k in 0..self.mean.len() {
            let delta = other.mean[k] - self.mean[k];
            self.mean[k] += delta * nb / n;
            self.m2[k] += other.m2[k] + delta * delta * na * nb / n;
        }
        self.count += other.count;
    }

    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }

    /// Standard error of the mean from the unbiased sample variance.
    pub fn stderr(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.m2
            .iter()
            .map(|&m2| ((m2 / (n - 1.0)).max(0.0) / n).sqrt())
            .collect()
    }
}

/// Accumulates moments of a `dim`-vector observable over samples `0..n`.
///
/// `observe(i, out)` writes sample `i` into `out` (length `dim`).
pub fn accumulate<F>(exec: Execution, n: usize, dim: usize, observe: F) -> Moments
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    let chunks = n.div_ceil(CHUNK);
    let chunk_moments = |c: usize| {
        let mut m = Moments::zeros(dim);
        let mut buf = vec![0.0; dim];
        for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
            buf.iter_mut().for_each(|b| *b = 0.0);
            observe(i, &mut buf);
            m.push(&buf);
        }
        m
    };
    let partials = map_indexed(exec, chunks, chunk_moments);
    let mut total = Moments::zeros(dim);
    for p in &partials {
        total.absorb(p);
    }
    total
}
