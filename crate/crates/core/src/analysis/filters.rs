//! Smoothing filters on uniformly sampled signals.

use std::collections::HashMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAVGOL_WINDOW: usize = 21;
pub const SAVGOL_ORDER: usize = 3;
/// Default Gaussian width, s.
pub const GAUSSIAN_SIGMA_S: f64 = 5e-3;

/// A uniformly sampled signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub t0: f64,
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Series {
    pub fn new(t0: f64, dt: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || !t0.is_finite() {
            return Err(Error::InvalidSpec("series needs a finite start and dt > 0".into()));
        }
        if values.len() < 2 {
            return Err(Error::InvalidSpec("series needs at least two samples".into()));
        }
        Ok(Self { t0, dt, values })
    }

    /// Builds a series from explicit sample times, which must be uniform.
    pub fn from_samples(t: &[f64], values: Vec<f64>) -> Result<Self> {
        if t.len() != values.len() {
            return Err(Error::LengthMismatch(t.len(), values.len()));
        }
        if t.len() < 2 {
            return Err(Error::InvalidSpec("series needs at least two samples".into()));
        }
        let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
        let uniform = t
            .windows(2)
            .all(|w| w[1] > w[0] && ((w[1] - w[0]) - dt).abs() <= 1e-6 * dt);
        if !uniform {
            return Err(Error::InvalidSpec("sample times are not uniform".into()));
        }
        Self::new(t[0], dt, values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            t0: self.t0,
            dt: self.dt,
            values,
        }
    }
}

/// Weights that evaluate a least-squares polynomial at sample `at` of a
/// window of `len` samples.
fn savgol_weights(len: usize, order: usize, at: usize) -> Vec<f64> {
    let order = order.min(len - 1);
    let centre = at as f64;
    let v = DMatrix::from_fn(len, order + 1, |i, j| (i as f64 - centre).powi(j as i32));
    // Row 0 of the pseudo-inverse gives the fitted constant term.
    let pinv = v
        .pseudo_inverse(1e-12)
        .expect("Vandermonde pseudo-inverse with a positive tolerance");
    pinv.row(0).iter().copied().collect()
}

/// Savitzky-Golay smoothing. Near the ends the window shrinks symmetrically
/// and the order drops to fit, so polynomials up to `polyorder` are kept exactly.
pub fn savgol(values: &[f64], window: usize, polyorder: usize) -> Result<Vec<f64>> {
    if window.is_multiple_of(2) || window == 0 {
        return Err(Error::InvalidSpec(format!("window {window} must be odd")));
    }
    if polyorder >= window {
        return Err(Error::InvalidSpec(format!(
            "polyorder {polyorder} must be below the window {window}"
        )));
    }
    if window > values.len() {
        return Err(Error::InvalidSpec(format!(
            "window {window} exceeds the {} samples",
            values.len()
        )));
    }
    let half = window / 2;
    let n = values.len();
    let mut cache: HashMap<usize, Vec<f64>> = HashMap::new();
    let out = (0..n)
        .map(|i| {
            let h = half.min(i).min(n - 1 - i);
            let w = cache
                .entry(h)
                .or_insert_with(|| savgol_weights(2 * h + 1, polyorder, h));
            values[i - h..=i + h].iter().zip(w.iter()).map(|(x, c)| x * c).sum()
        })
        .collect();
    Ok(out)
}

/// Gaussian kernel sampled at `dt`, truncated at 4σ and normalised to unit sum.
pub fn gaussian_kernel(sigma: f64, dt: f64) -> Result<Vec<f64>> {
    if !(sigma > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidSpec("Gaussian filter needs σ > 0 and dt > 0".into()));
    }
    let radius = (4.0 * sigma / dt).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| {
            let t = k as f64 * dt;
            (-0.5 * (t / sigma).powi(2)).exp()
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / sum).collect())
}

/// Gaussian low-pass. At the ends the truncated kernel is renormalised.
pub fn gaussian_lowpass(series: &Series, sigma: f64) -> Result<Series> {
    let kernel = gaussian_kernel(sigma, series.dt)?;
    let r = (kernel.len() / 2) as i64;
    let n = series.len() as i64;
    let x = &series.values;
    let out = (0..n)
        .map(|i| {
            let (mut acc, mut norm) = (0.0, 0.0);
            for (k, w) in kernel.iter().enumerate() {
                let j = i + k as i64 - r;
                if (0..n).contains(&j) {
                    acc += w * x[j as usize];
                    norm += w;
                }
            }
            acc / norm
        })
        .collect();
    Ok(series.with_values(out))
}

/// Pointwise `√(F_z² + F_x²)`.
pub fn resultant(fz: &[f64], fx: &[f64]) -> Result<Vec<f64>> {
    if fz.len() != fx.len() {
        return Err(Error::LengthMismatch(fz.len(), fx.len()));
    }
    Ok(fz.iter().zip(fx).map(|(z, x)| z.hypot(*x)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn savgol_keeps_constants_and_cubics() {
        let c = vec![3.25; 50];
        for (a, b) in savgol(&c, 21, 3).unwrap().iter().zip(&c) {
            assert!((a - b).abs() < 1e-12);
        }
        let cubic: Vec<f64> = (0..60)
            .map(|i| {
                let t = i as f64 * 0.1;
                0.5 - 2.0 * t + 0.3 * t * t - 0.04 * t * t * t
            })
            .collect();
        for (a, b) in savgol(&cubic, 21, 3).unwrap().iter().zip(&cubic) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} {b}");
        }
    }

    #[test]
    fn savgol_matches_normal_equations() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37 % 11) as f64).sin() + 0.1 * i as f64).collect();
        let y = savgol(&x, 9, 2).unwrap();
        // Normal equations on window 10..=18 centred at 14.
        let mut ata = [[0.0f64; 3]; 3];
        let mut atb = [0.0f64; 3];
        for (u, xi) in (-4..=4).map(f64::from).zip(&x[10..=18]) {
            let row = [1.0, u, u * u];
            for r in 0..3 {
                atb[r] += row[r] * xi;
                for c in 0..3 {
                    ata[r][c] += row[r] * row[c];
                }
            }
        }
        let m = nalgebra::Matrix3::from_fn(|r, c| ata[r][c]);
        let b = nalgebra::Vector3::new(atb[0], atb[1], atb[2]);
        let coef = m.lu().solve(&b).unwrap();
        assert!((y[14] - coef[0]).abs() < 1e-10);
    }

    #[test]
    fn savgol_rejects_bad_windows() {
        let x = vec![1.0; 10];
        assert!(savgol(&x, 4, 2).is_err());
        assert!(savgol(&x, 5, 5).is_err());
        assert!(savgol(&x, 11, 3).is_err());
    }

    #[test]
    fn gaussian_impulse_returns_the_kernel() {
        let mut v = vec![0.0; 101];
        v[50] = 1.0;
        let s = Series::new(0.0, 1e-3, v).unwrap();
        let out = gaussian_lowpass(&s, 5e-3).unwrap();
        let k = gaussian_kernel(5e-3, 1e-3).unwrap();
        assert_eq!(k.len(), 41);
        for (i, w) in k.iter().enumerate() {
            assert!((out.values[30 + i] - w).abs() < 1e-15);
        }
    }

    #[test]
    fn resultant_examples() {
        assert_eq!(
            resultant(&[3.0, 0.0, -2.0], &[4.0, 0.0, 0.0]).unwrap(),
            vec![5.0, 0.0, 2.0]
        );
        assert!(resultant(&[1.0], &[]).is_err());
    }

    #[test]
    fn series_requires_uniform_time() {
        assert!(Series::from_samples(&[0.0, 0.1, 0.2], vec![1.0, 2.0, 3.0]).is_ok());
        assert!(Series::from_samples(&[0.0, 0.1, 0.25], vec![1.0, 2.0, 3.0]).is_err());
        assert!(Series::new(0.0, 0.0, vec![1.0, 2.0]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn filters_are_linear(
            x in proptest::collection::vec(-50.0f64..50.0, 40..120),
            a in -3.0f64..3.0,
            b in -3.0f64..3.0,
        ) {
            let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| (i as f64 * 0.3).sin() * 10.0 - 0.5 * v).collect();
            let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + b * q).collect();
            let check = |fx: &[f64], fy: &[f64], fm: &[f64]| {
                fx.iter().zip(fy).zip(fm).all(|((p, q), m)| (a * p + b * q - m).abs() < 1e-9)
            };
            let sg = |v: &[f64]| savgol(v, 21, 3).unwrap();
            proptest::prop_assert!(check(&sg(&x), &sg(&y), &sg(&mix)));
            let t: Vec<f64> = (0..x.len()).map(|i| i as f64 * 1e-3).collect();
            let g = |v: &[f64]| gaussian_lowpass(&Series::from_samples(&t, v.to_vec()).unwrap(), 0.005).unwrap().values;
            proptest::prop_assert!(check(&g(&x), &g(&y), &g(&mix)));
        }
    }
}
