use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Probability density sampled on a uniform grid `start + i · step`.
///
/// Integrals and moments use the trapezoid rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pdf1D {
    start: f64,
    step: f64,
    densities: Vec<f64>,
}

fn trapezoid(values: impl ExactSizeIterator<Item = f64>, step: f64) -> f64 {
    let n = values.len();
    let mut s = 0.0;
    for (i, v) in values.enumerate() {
        s += if i == 0 || i + 1 == n { 0.5 * v } else { v };
    }
    s * step
}

impl Pdf1D {
    pub fn new(start: f64, step: f64, densities: Vec<f64>) -> Result<Self> {
        if !(step > 0.0 && step.is_finite() && start.is_finite()) {
            return Err(Error::InvalidInput(format!("bad grid start {start} / step {step}")));
        }
        if densities.len() < 2 {
            return Err(Error::InvalidInput("a density grid needs at least two points".into()));
        }
        if let Some(i) = densities.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "density at grid point {i} is {}",
                densities[i]
            )));
        }
        Ok(Self {
            start,
            step,
            densities,
        })
    }

    /// Scales the densities so the trapezoid integral is one.
    pub fn normalized(mut self) -> Result<Self> {
        let total = self.integral();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("density has no mass".into()));
        }
        for d in &mut self.densities {
            *d /= total;
        }
        Ok(self)
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn end(&self) -> f64 {
        self.grid(self.densities.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.densities.is_empty()
    }

    pub fn densities(&self) -> &[f64] {
        &self.densities
    }

    pub fn grid(&self, i: usize) -> f64 {
        self.start + self.step * i as f64
    }

    pub fn integral(&self) -> f64 {
        trapezoid(self.densities.iter().copied(), self.step)
    }

    pub fn mean(&self) -> f64 {
        trapezoid(
            self.densities.iter().enumerate().map(|(i, d)| self.grid(i) * d),
            self.step,
        )
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        trapezoid(
            self.densities
                .iter()
                .enumerate()
                .map(|(i, d)| (self.grid(i) - m).powi(2) * d),
            self.step,
        )
    }

    /// Linear interpolation; zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let pos = (x - self.start) / self.step;
        if pos < 0.0 || pos > (self.len() - 1) as f64 {
            return 0.0;
        }
        let i = (pos.floor() as usize).min(self.len() - 2);
        let f = pos - i as f64;
        self.densities[i] * (1.0 - f) + self.densities[i + 1] * f
    }

    /// `∫_{start}^{x}` of the piecewise-linear density.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.start {
            return 0.0;
        }
        if x >= self.end() {
            return self.integral();
        }
        let pos = (x - self.start) / self.step;
        let i = pos.floor() as usize;
        let f = pos - i as f64;
        let mut acc = 0.0;
        for k in 0..i {
            acc += 0.5 * (self.densities[k] + self.densities[k + 1]);
        }
        let d0 = self.densities[i];
        let d1 = self.densities[(i + 1).min(self.len() - 1)];
        acc += f * d0 + 0.5 * f * f * (d1 - d0);
        acc * self.step
    }

    /// `∫_{x}^{∞}` of the piecewise-linear density.
    pub fn survival(&self, x: f64) -> f64 {
        (self.integral() - self.cdf(x)).max(0.0)
    }

    /// Differential entropy in bits, `−∫ f log₂ f` (zero where f = 0).
    pub fn entropy_bits(&self) -> f64 {
        -trapezoid(
            self.densities
                .iter()
                .map(|&d| if d > 0.0 { d * d.log2() } else { 0.0 }),
            self.step,
        )
    }

    /// Density of `c · X` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0) {
            return Err(Error::InvalidInput(format!("scale factor {c} must be positive")));
        }
        Pdf1D::new(
            self.start * c,
            self.step * c,
            self.densities.iter().map(|d| d / c).collect(),
        )
    }

    /// Density of `a − X`: the grid is reflected and shifted.
    pub fn reflected(&self, a: f64) -> Self {
        let mut densities = self.densities.clone();
        densities.reverse();
        Self {
            start: a - self.end(),
            step: self.step,
            densities,
        }
    }

    /// Linear re-interpolation onto a grid of spacing `step` over the same
    /// support, renormalized.
    pub fn resampled(&self, step: f64) -> Result<Self> {
        if step == self.step {
            return Ok(self.clone());
        }
        let span = self.end() - self.start;
        let n = ((span / step).ceil() as usize + 1).max(2);
        let densities = (0..n).map(|i| self.value_at(self.start + step * i as f64)).collect();
        Pdf1D::new(self.start, step, densities)?.normalized()
    }

    /// Drops leading and trailing grid points whose density is below
    /// `rel · max`.
    pub fn trimmed(&self, rel: f64) -> Self {
        let max = self.densities.iter().copied().fold(0.0, f64::max);
        let cut = rel * max;
        let first = self.densities.iter().position(|d| *d > cut).unwrap_or(0);
        let last = self.densities.iter().rposition(|d| *d > cut).unwrap_or(self.len() - 1);
        let (lo, hi) = (first.saturating_sub(1), (last + 1).min(self.len() - 1));
        if hi <= lo {
            return self.clone();
        }
        Self {
            start: self.grid(lo),
            step: self.step,
            densities: self.densities[lo..=hi].to_vec(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["grid_value", "density"])?;
        for (i, d) in self.densities.iter().enumerate() {
            w.write_record([self.grid(i).to_string(), d.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let parse_err = |line: u64, msg: String| Error::Parse {
            path: path.display().to_string(),
            line,
            msg,
        };
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        if header != ["grid_value", "density"] {
            return Err(parse_err(1, "expected header `grid_value,density`".into()));
        }
        let mut xs = Vec::new();
        let mut ds = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = i as u64 + 2;
            let num = |k: usize| -> Result<f64> {
                rec.get(k)
                    .unwrap_or("")
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(line, format!("{e}")))
            };
            xs.push(num(0)?);
            ds.push(num(1)?);
        }
        if xs.len() < 2 {
            return Err(parse_err(2, "need at least two grid points".into()));
        }
        let step = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
        for (i, x) in xs.iter().enumerate() {
            if (x - (xs[0] + step * i as f64)).abs() > 1e-9 * step.max(x.abs()) {
                return Err(parse_err(i as u64 + 2, "grid is not uniform".into()));
            }
        }
        Pdf1D::new(xs[0], step, ds)
    }
}

/// Discrete density of `Σ X_k` for independent `X_k`.
///
/// Every input is re-gridded to the coarsest input step and tail-trimmed,
/// then all are convolved at once in the frequency domain.
pub fn convolve(pdfs: &[Pdf1D]) -> Result<Pdf1D> {
    use rustfft::{num_complex::Complex, FftPlanner};

    let first = pdfs
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to convolve".into()))?;
    if pdfs.len() == 1 {
        return Ok(first.clone());
    }
    let step = pdfs.iter().map(|p| p.step).fold(0.0, f64::max);
    let parts: Vec<Pdf1D> = pdfs
        .iter()
        .map(|p| Ok(p.resampled(step)?.trimmed(1e-14)))
        .collect::<Result<_>>()?;
    let out_len: usize = parts.iter().map(|p| p.len()).sum::<usize>() - (parts.len() - 1);
    let fft_len = out_len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(fft_len);
    let inv = planner.plan_fft_inverse(fft_len);
    let mut acc = vec![Complex::new(1.0, 0.0); fft_len];
    let mut buf = vec![Complex::new(0.0, 0.0); fft_len];
    for p in &parts {
        buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
        for (b, d) in buf.iter_mut().zip(&p.densities) {
            b.re = d * step;
        }
        fwd.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a *= b;
        }
    }
    inv.process(&mut acc);
    let scale = 1.0 / (fft_len as f64 * step);
    let peak = acc[..out_len].iter().map(|c| c.re).fold(0.0, f64::max);
    let densities: Vec<f64> = acc[..out_len]
        .iter()
        .map(|c| {
            let v = c.re;
            // Round-off leaves tiny negative or noise values far below the peak.
            if v > 1e-13 * peak {
                v * scale
            } else {
                0.0
            }
        })
        .collect();
    let start: f64 = parts.iter().map(|p| p.start).sum();
    Pdf1D::new(start, step, densities)?.normalized()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    pub(crate) fn gaussian(mu: f64, sd: f64, step: f64) -> Pdf1D {
        let start = mu - 10.0 * sd;
        let n = (20.0 * sd / step) as usize + 1;
        let d = (0..n)
            .map(|i| {
                let x = start + step * i as f64;
                (-(x - mu).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * PI).sqrt())
            })
            .collect();
        Pdf1D::new(start, step, d).unwrap()
    }

    #[test]
    fn uniform_entropy_is_zero() {
        let u = Pdf1D::new(0.0, 1.0 / 1000.0, vec![1.0; 1001]).unwrap();
        assert!((u.integral() - 1.0).abs() < 1e-12);
        assert!(u.entropy_bits().abs() < 1e-12);
    }

    #[test]
    fn gaussian_entropy_and_scaling() {
        let g = gaussian(0.0, 1.0, 0.01);
        let h = g.entropy_bits();
        let exact = 0.5 * (2.0 * PI * std::f64::consts::E).log2();
        assert!((h - exact).abs() < 1e-6, "{h}");
        let h2 = g.scaled(2.0).unwrap().entropy_bits();
        assert!((h2 - h - 1.0).abs() < 1e-9);
    }

    #[test]
    fn moments_and_cdf() {
        let g = gaussian(3.0, 0.5, 0.005);
        assert!((g.mean() - 3.0).abs() < 1e-9);
        assert!((g.variance() - 0.25).abs() < 1e-6);
        assert!((g.cdf(3.0) - 0.5).abs() < 1e-6);
        assert!((g.survival(3.0 + 0.5 * 1.959963984540054) - 0.025).abs() < 1e-5);
        assert!(g.cdf(-100.0) == 0.0 && (g.cdf(100.0) - g.integral()).abs() < 1e-15);
    }

    #[test]
    fn reflection_mirrors_mean() {
        let g = gaussian(2.0, 0.3, 0.01).normalized().unwrap();
        let q = g.reflected(5.0);
        assert!((q.mean() - (5.0 - g.mean())).abs() < 1e-12);
        let m = g.reflected(0.0);
        for x in [-2.5, -2.0, -1.7] {
            assert!((m.value_at(x) - g.value_at(-x)).abs() < 1e-9);
        }
    }

    #[test]
    fn convolution_adds_means_and_variances() {
        let a = gaussian(1.0, 0.2, 0.002);
        let b = gaussian(-0.5, 0.4, 0.003);
        let c = convolve(&[a.clone(), b.clone()]).unwrap();
        assert!((c.integral() - 1.0).abs() < 1e-12);
        assert!((c.mean() - (a.mean() + b.mean())).abs() < c.step());
        assert!(((c.variance() - 0.2) / 0.2).abs() < 0.01);
    }

    #[test]
    fn near_delta_shifts() {
        let a = gaussian(4.0, 0.5, 0.01);
        let delta = gaussian(2.5, 0.002, 0.001);
        let c = convolve(&[a.clone(), delta]).unwrap();
        assert!((c.mean() - (a.mean() + 2.5)).abs() < c.step());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.csv");
        let g = gaussian(1.0, 0.25, 0.01);
        g.write_csv(&p).unwrap();
        let back = Pdf1D::read_csv(&p).unwrap();
        assert_eq!(back.densities(), g.densities());
        assert!((back.step() - g.step()).abs() < 1e-12);
    }

    #[test]
    fn rejects_negative_density() {
        assert!(Pdf1D::new(0.0, 1.0, vec![0.1, -0.1]).is_err());
        assert!(Pdf1D::new(0.0, 0.0, vec![0.1, 0.1]).is_err());
    }
}
