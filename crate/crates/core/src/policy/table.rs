use crate::error::Result;

/// Index values sampled on a uniform age grid and linearly interpolated.
/// Linear interpolation of monotone samples is monotone.
#[derive(Debug, Clone)]
pub struct TabulatedIndex {
    step: f64,
    values: Vec<f64>,
}

impl TabulatedIndex {
    pub fn build(t_max: f64, step: f64, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let n = (t_max / step).ceil() as usize + 1;
        let values = (0..n).map(|i| f(i as f64 * step)).collect::<Result<Vec<_>>>()?;
        Ok(Self { step, values })
    }

    pub fn t_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// Interpolated value, or `None` outside the tabulated range.
    pub fn get(&self, age: f64) -> Option<f64> {
        let x = age / self.step;
        let i = x.floor();
        if !(i >= 0.0) || i as usize + 1 >= self.values.len() {
            return None;
        }
        let i = i as usize;
        let frac = x - i as f64;
        Some(self.values[i] + frac * (self.values[i + 1] - self.values[i]))
    }
}
