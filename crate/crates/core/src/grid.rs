use crate::{Error, Result};

/// Uniform time grid `t_i = i * dt`, `i = 0..len`, starting at the switch-on time 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    len: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, len: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Configuration(format!("time step must be positive, got {dt:e}")));
        }
        if len == 0 {
            return Err(Error::Configuration("time grid needs at least one point".into()));
        }
        Ok(Self { dt, len })
    }

    /// Grid covering `[0, t_max]` with step `dt`; the last point is the largest
    /// multiple of `dt` not exceeding `t_max` (up to rounding).
    pub fn spanning(t_max: f64, dt: f64) -> Result<Self> {
        if !(t_max.is_finite() && t_max >= 0.0) {
            return Err(Error::Configuration(format!("t_max must be non-negative, got {t_max:e}")));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Configuration(format!("time step must be positive, got {dt:e}")));
        }
        let steps = (t_max / dt * (1.0 + 1e-12)).floor() as usize;
        Self::new(dt, steps + 1)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.dt
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.len - 1)
    }

    pub fn times(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.time(i))
    }
}
