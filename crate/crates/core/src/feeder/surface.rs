use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Monomials `O^p · T^q` of total degree ≤ `degree`: for each total degree
/// `d`, first `O^d`, then `T^d`, then the mixed terms with falling powers of O.
pub fn surface_terms(degree: usize) -> Vec<(u32, u32)> {
    let mut terms = vec![(0, 0)];
    for d in 1..=degree as u32 {
        terms.push((d, 0));
        terms.push((0, d));
        for p in (1..d).rev() {
            terms.push((p, d - p));
        }
    }
    terms
}

fn term_name(term: (u32, u32)) -> String {
    let part = |name: &str, p: u32| match p {
        0 => String::new(),
        1 => name.to_string(),
        _ => format!("{name}^{p}"),
    };
    match term {
        (0, 0) => "1".into(),
        (p, q) => [part("O", p), part("T", q)]
            .into_iter()
            .filter(|s| !s.is_empty())
            .collect::<Vec<_>>()
            .join("·"),
    }
}

/// One outage summarised for the surface fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub duration_min: f64,
    pub temp_c: f64,
    pub ratio: f64,
}

/// Least-squares polynomial `R(O, T)` over outage duration (min) and
/// temperature (°C).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SurfaceDocument", into = "SurfaceDocument")]
pub struct RatioSurface {
    degree: usize,
    coefficients: Vec<f64>,
    r_squared: f64,
    n_cases: usize,
}

#[derive(Serialize, Deserialize)]
struct SurfaceDocument {
    kind: String,
    degree: usize,
    terms: Vec<String>,
    coefficients: Vec<f64>,
    r_squared: f64,
    n_cases: usize,
}

impl From<RatioSurface> for SurfaceDocument {
    fn from(s: RatioSurface) -> Self {
        Self {
            kind: "ratio-surface".into(),
            degree: s.degree,
            terms: surface_terms(s.degree).into_iter().map(term_name).collect(),
            coefficients: s.coefficients,
            r_squared: s.r_squared,
            n_cases: s.n_cases,
        }
    }
}

impl TryFrom<SurfaceDocument> for RatioSurface {
    type Error = Error;

    fn try_from(d: SurfaceDocument) -> Result<Self> {
        if d.kind != "ratio-surface" {
            return Err(Error::InvalidInput(format!("unexpected surface kind {:?}", d.kind)));
        }
        let expected = surface_terms(d.degree).len();
        if d.coefficients.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: d.coefficients.len(),
            });
        }
        Ok(Self {
            degree: d.degree,
            coefficients: d.coefficients,
            r_squared: d.r_squared,
            n_cases: d.n_cases,
        })
    }
}

fn design_row(terms: &[(u32, u32)], o: f64, t: f64) -> Vec<f64> {
    terms
        .iter()
        .map(|&(p, q)| o.powi(p as i32) * t.powi(q as i32))
        .collect()
}

impl RatioSurface {
    /// Fits by SVD least squares on column-scaled design matrix.
    pub fn fit(points: &[SurfacePoint], degree: usize) -> Result<Self> {
        let terms = surface_terms(degree);
        let k = terms.len();
        let n = points.len();
        if n < k {
            return Err(Error::InsufficientData(format!(
                "{n} cases cannot determine {k} surface coefficients"
            )));
        }
        if points
            .iter()
            .any(|p| !(p.duration_min.is_finite() && p.temp_c.is_finite() && p.ratio.is_finite()))
        {
            return Err(Error::InvalidInput("non-finite surface data".into()));
        }
        let mut x = DMatrix::<f64>::zeros(n, k);
        for (i, p) in points.iter().enumerate() {
            for (j, v) in design_row(&terms, p.duration_min, p.temp_c).into_iter().enumerate() {
                x[(i, j)] = v;
            }
        }
        let scale: Vec<f64> = (0..k)
            .map(|j| {
                let m = x.column(j).amax();
                if m > 0.0 {
                    m
                } else {
                    1.0
                }
            })
            .collect();
        for (j, s) in scale.iter().enumerate() {
            x.column_mut(j).scale_mut(1.0 / s);
        }
        let y = DVector::from_iterator(n, points.iter().map(|p| p.ratio));
        let svd = x.clone().svd(true, true);
        let s_max = svd.singular_values.max();
        let (j_min, s_min) = svd.singular_values.argmin();
        if !(s_min > 1e-10 * s_max) {
            let v_t = svd.v_t.as_ref().expect("requested V");
            let dir = v_t.row(j_min);
            let mut parts: Vec<(f64, usize)> = dir.iter().enumerate().map(|(j, c)| (*c, j)).collect();
            parts.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()));
            let desc = parts
                .iter()
                .filter(|(c, _)| c.abs() > 1e-3)
                .map(|(c, j)| format!("{c:+.3}·{}", term_name(terms[*j])))
                .collect::<Vec<_>>()
                .join(" ");
            return Err(Error::RankDeficient(format!(
                "surface design matrix has no spread along {desc} (scaled columns)"
            )));
        }
        let beta = svd
            .solve(&y, 1e-12 * s_max)
            .map_err(|e| Error::Solver(e.to_string()))?;
        let coefficients: Vec<f64> = beta.iter().zip(&scale).map(|(b, s)| b / s).collect();
        let mut surface = Self {
            degree,
            coefficients,
            r_squared: 0.0,
            n_cases: n,
        };
        surface.r_squared = surface.r_squared_on(points);
        Ok(surface)
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn r_squared(&self) -> f64 {
        self.r_squared
    }

    pub fn n_cases(&self) -> usize {
        self.n_cases
    }

    pub fn eval(&self, duration_min: f64, temp_c: f64) -> f64 {
        surface_terms(self.degree)
            .iter()
            .zip(&self.coefficients)
            .map(|(&(p, q), c)| c * duration_min.powi(p as i32) * temp_c.powi(q as i32))
            .sum()
    }

    /// Coefficient of determination of this surface on `points`.
    pub fn r_squared_on(&self, points: &[SurfacePoint]) -> f64 {
        let mean = points.iter().map(|p| p.ratio).sum::<f64>() / points.len() as f64;
        let ss_tot: f64 = points.iter().map(|p| (p.ratio - mean).powi(2)).sum();
        let ss_res: f64 = points
            .iter()
            .map(|p| (p.ratio - self.eval(p.duration_min, p.temp_c)).powi(2))
            .sum();
        if ss_tot > 0.0 {
            1.0 - ss_res / ss_tot
        } else if ss_res <= 1e-20 {
            1.0
        } else {
            0.0
        }
    }

    /// Largest `|x_jᵀ r| / (‖x_j‖ ‖y‖)` over design columns; near zero for a
    /// least-squares fit.
    pub fn orthogonality_defect(&self, points: &[SurfacePoint]) -> f64 {
        let terms = surface_terms(self.degree);
        let y_norm = points.iter().map(|p| p.ratio * p.ratio).sum::<f64>().sqrt();
        let mut dots = vec![0.0; terms.len()];
        let mut norms = vec![0.0; terms.len()];
        for p in points {
            let r = p.ratio - self.eval(p.duration_min, p.temp_c);
            for (j, v) in design_row(&terms, p.duration_min, p.temp_c).into_iter().enumerate() {
                dots[j] += v * r;
                norms[j] += v * v;
            }
        }
        dots.iter()
            .zip(&norms)
            .map(|(d, n)| d.abs() / (n.sqrt() * y_norm).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
