//! Encoding-time measurements and the three-term timing model
//! `t = a*H*W + b*m*(log2(H*W) - 2) + c*m*W` (milliseconds).

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codefile::fmt_real;
use crate::encoder::{encode_image, EncodeParams};
use crate::error::{Error, Result};
use crate::image_io::{GrayImage, Polarity};
use crate::matcher::{least_squares_fit, median};
use crate::quasirandom::{halton, QuasiSequence};

/// Coefficients reported for the reference platform, in ms per unit regressor.
pub const REFERENCE_MODEL: [f64; 3] = [0.6853e-4, 3.8459e-4, 0.3943e-4];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingSample {
    pub height: usize,
    pub width: usize,
    pub length: usize,
    pub reps: usize,
    pub median_ms: f64,
}

impl TimingSample {
    pub fn regressors(&self) -> [f64; 3] {
        regressors(self.height, self.width, self.length)
    }
}

pub fn regressors(height: usize, width: usize, length: usize) -> [f64; 3] {
    let hw = (height * width) as f64;
    let m = length as f64;
    [hw, m * (hw.log2() - 2.0), m * width as f64]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Correlation between observed and predicted times.
    pub r: f64,
    pub rmse_ms: f64,
}

impl TimingModel {
    pub fn predict(&self, height: usize, width: usize, length: usize) -> f64 {
        let x = regressors(height, width, length);
        self.a * x[0] + self.b * x[1] + self.c * x[2]
    }

    pub fn reference() -> Self {
        let [a, b, c] = REFERENCE_MODEL;
        TimingModel {
            a,
            b,
            c,
            r: 0.99,
            rmse_ms: 2.66,
        }
    }

    pub fn to_line(&self) -> String {
        format!(
            "a={} b={} c={} r={} rmse_ms={}",
            fmt_real(self.a),
            fmt_real(self.b),
            fmt_real(self.c),
            fmt_real(self.r),
            fmt_real(self.rmse_ms)
        )
    }
}

/// Powers of two from `lo` to `hi` inclusive.
pub fn powers_of_two(lo: usize, hi: usize) -> Vec<usize> {
    std::iter::successors(Some(lo.next_power_of_two()), |v| Some(v * 2))
        .take_while(|&v| v <= hi)
        .collect()
}

fn random_image(rng: &mut ChaCha8Rng, height: usize, width: usize) -> GrayImage {
    let pixels = (0..height * width).map(|_| rng.random_range(0..=255u8) as f64).collect();
    GrayImage::new(width, height, pixels).expect("random image dimensions are valid")
}

fn time_once(img: &GrayImage, seq: &QuasiSequence, params: &EncodeParams) -> Result<f64> {
    let start = Instant::now();
    let code = encode_image(img, Polarity::LightOnDark, seq, params)?;
    let elapsed = start.elapsed();
    std::hint::black_box(code);
    Ok(elapsed.as_secs_f64() * 1e3)
}

/// Median encode time of `reps` fresh random images for one grid cell,
/// after one untimed warm-up encode.
pub fn time_cell(
    rng: &mut ChaCha8Rng,
    seq: &QuasiSequence,
    height: usize,
    width: usize,
    length: usize,
    reps: usize,
) -> Result<TimingSample> {
    let params = EncodeParams {
        max_points: Some(length),
        ..EncodeParams::default()
    };
    time_once(&random_image(rng, height, width), seq, &params)?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let img = random_image(rng, height, width);
        times.push(time_once(&img, seq, &params)?);
    }
    Ok(TimingSample {
        height,
        width,
        length,
        reps,
        // timer granularity can yield 0 on tiny cells
        median_ms: median(&times).max(1e-6),
    })
}

/// Time every `(H, W, m)` combination sequentially on one thread.
pub fn run_grid(
    heights: &[usize],
    widths: &[usize],
    lengths: &[usize],
    reps: usize,
    seed: u64,
) -> Result<Vec<TimingSample>> {
    if reps < 5 {
        return Err(Error::InvalidArgument(format!("reps must be >= 5, got {reps}")));
    }
    if let Some(bad) = heights.iter().chain(widths).chain(lengths).find(|&&v| v < 16) {
        return Err(Error::InvalidArgument(format!("grid sizes must be >= 16, got {bad}")));
    }
    let max_len = lengths.iter().copied().max().unwrap_or(0);
    if max_len == 0 || heights.is_empty() || widths.is_empty() {
        return Err(Error::InvalidArgument("empty timing grid".into()));
    }
    let seq = halton(max_len, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(heights.len() * widths.len() * lengths.len());
    for &h in heights {
        for &w in widths {
            for &m in lengths {
                samples.push(time_cell(&mut rng, &seq, h, w, m, reps)?);
            }
        }
    }
    Ok(samples)
}

fn distinct(values: impl Iterator<Item = usize>) -> usize {
    let mut v: Vec<usize> = values.collect();
    v.sort_unstable();
    v.dedup();
    v.len()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Nonnegative least squares over the three model regressors.
///
/// With three unknowns every active set can be tried: each subset of
/// regressors is solved without constraints, and the feasible solution with
/// the smallest residual wins.
pub fn fit_model(samples: &[TimingSample]) -> Result<TimingModel> {
    if samples.len() < 10 {
        return Err(Error::DegenerateDesign(format!(
            "{} samples, at least 10 needed",
            samples.len()
        )));
    }
    for (name, count) in [
        ("H", distinct(samples.iter().map(|s| s.height))),
        ("W", distinct(samples.iter().map(|s| s.width))),
        ("m", distinct(samples.iter().map(|s| s.length))),
    ] {
        if count < 2 {
            return Err(Error::DegenerateDesign(format!("factor {name} is constant")));
        }
    }

    let x: Vec<[f64; 3]> = samples.iter().map(TimingSample::regressors).collect();
    let y: Vec<f64> = samples.iter().map(|s| s.median_ms).collect();
    // column scaling keeps the solve well conditioned
    let scale: Vec<f64> = (0..3)
        .map(|k| x.iter().map(|r| r[k] * r[k]).sum::<f64>().sqrt().max(f64::MIN_POSITIVE))
        .collect();
    let target = DMatrix::from_column_slice(y.len(), 1, &y);

    let mut best: Option<([f64; 3], f64)> = None;
    for mask in 1u8..8 {
        let cols: Vec<usize> = (0..3).filter(|k| mask & (1 << k) != 0).collect();
        let design = DMatrix::from_fn(x.len(), cols.len(), |i, j| x[i][cols[j]] / scale[cols[j]]);
        let sol = least_squares_fit(&design, &target)?;
        let mut coef = [0.0; 3];
        for (j, &k) in cols.iter().enumerate() {
            coef[k] = sol.solution[(j, 0)] / scale[k];
        }
        if coef.iter().any(|&c| c < 0.0) {
            continue;
        }
        let sse: f64 = x
            .iter()
            .zip(&y)
            .map(|(r, t)| (coef[0] * r[0] + coef[1] * r[1] + coef[2] * r[2] - t).powi(2))
            .sum();
        if best.is_none_or(|(_, s)| sse < s) {
            best = Some((coef, sse));
        }
    }
    let (coef, sse) = best.unwrap_or(([0.0; 3], y.iter().map(|t| t * t).sum()));

    let predicted: Vec<f64> = x
        .iter()
        .map(|r| coef[0] * r[0] + coef[1] * r[1] + coef[2] * r[2])
        .collect();
    Ok(TimingModel {
        a: coef[0],
        b: coef[1],
        c: coef[2],
        r: pearson(&y, &predicted),
        rmse_ms: (sse / y.len() as f64).sqrt(),
    })
}

pub fn samples_to_csv(samples: &[TimingSample]) -> String {
    let mut out = String::from("H,W,m,reps,median_ms\n");
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{}",
            s.height,
            s.width,
            s.length,
            s.reps,
            fmt_real(s.median_ms)
        )
        .expect("writing to a String");
    }
    out
}

pub fn samples_from_csv(text: &str) -> Result<Vec<TimingSample>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default().trim();
    if header != "H,W,m,reps,median_ms" {
        return Err(Error::MalformedCsv(format!("unexpected timing header {header:?}")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            let bad = || Error::MalformedCsv(format!("timing line {}: {line:?}", i + 2));
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 5 {
                return Err(bad());
            }
            let int = |s: &str| s.parse::<usize>().map_err(|_| bad());
            let median_ms: f64 = cols[4].parse().map_err(|_| bad())?;
            if !(median_ms > 0.0) {
                return Err(bad());
            }
            Ok(TimingSample {
                height: int(cols[0])?,
                width: int(cols[1])?,
                length: int(cols[2])?,
                reps: int(cols[3])?,
                median_ms,
            })
        })
        .collect()
}
