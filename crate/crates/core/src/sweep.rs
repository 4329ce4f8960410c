//! Related-versus-unrelated dissimilarity bands as a function of `alpha`.

use std::fmt::Write as _;
use std::thread;

use crate::codefile::fmt_real;
use crate::corpus::CorpusPair;
use crate::encoder::{encode, DensityCode, EncodeParams};
use crate::error::{Error, Result};
use crate::image_io::{make_density_field, normalize, DensityField, Polarity, DEFAULT_LAMBDA};
use crate::matcher::delta_median;
use crate::quasirandom::halton;

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub alphas: Vec<f64>,
    pub degree: u32,
    pub lambda: f64,
    /// Halton length; `None` picks `round(max alpha * max mass)`.
    pub sequence_len: Option<usize>,
    pub polarity: Polarity,
    /// Worker threads across alpha values; 1 runs sequentially.
    pub threads: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            alphas: default_alphas(),
            degree: 3,
            lambda: DEFAULT_LAMBDA,
            sequence_len: None,
            polarity: Polarity::LightOnDark,
            threads: thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

/// `0.01, 0.02, ..., 0.50`.
pub fn default_alphas() -> Vec<f64> {
    alpha_range(0.01, 0.5, 0.01)
}

pub fn alpha_range(start: f64, end: f64, step: f64) -> Vec<f64> {
    if !(step > 0.0) || end < start {
        return Vec::new();
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    (0..count)
        .map(|k| ((start + k as f64 * step) * 1e12).round() / 1e12)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bands {
    pub related_min: f64,
    pub related_max: f64,
    pub unrelated_min: f64,
    pub unrelated_max: f64,
}

impl Bands {
    pub fn separated(&self) -> bool {
        self.related_max < self.unrelated_min
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub alpha: f64,
    /// `Err` holds the reason this alpha could not be evaluated.
    pub bands: std::result::Result<Bands, String>,
}

struct Prepared {
    pair: usize,
    field: DensityField,
}

fn minmax(values: &[f64]) -> (f64, f64) {
    values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn evaluate_alpha(prepared: &[Prepared], seq: &crate::quasirandom::QuasiSequence, alpha: f64, cfg: &SweepConfig) -> SweepRow {
    let params = EncodeParams {
        lambda: cfg.lambda,
        alpha: Some(alpha),
        max_points: None,
    };
    let codes: Result<Vec<DensityCode>> = prepared.iter().map(|p| encode(&p.field, seq, &params)).collect();
    let codes = match codes {
        Ok(c) => c,
        Err(e) => {
            return SweepRow {
                alpha,
                bands: Err(e.to_string()),
            }
        }
    };
    let mut related = Vec::new();
    let mut unrelated = Vec::new();
    for (i, vi) in codes.iter().enumerate() {
        for (j, wj) in codes.iter().enumerate() {
            if i == j {
                continue;
            }
            match delta_median(vi, wj, cfg.degree) {
                Ok(r) if prepared[i].pair == prepared[j].pair => related.push(r.delta),
                Ok(r) => unrelated.push(r.delta),
                Err(e) => {
                    return SweepRow {
                        alpha,
                        bands: Err(e.to_string()),
                    }
                }
            }
        }
    }
    let (related_min, related_max) = minmax(&related);
    let (unrelated_min, unrelated_max) = minmax(&unrelated);
    SweepRow {
        alpha,
        bands: Ok(Bands {
            related_min,
            related_max,
            unrelated_min,
            unrelated_max,
        }),
    }
}

/// Encode every corpus image at each alpha and collect `delta` over all
/// ordered pairs of distinct images, bucketed by whether they belong to the
/// same corpus pair.
pub fn run_sweep(pairs: &[CorpusPair], cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    if pairs.len() < 2 {
        return Err(Error::CorpusIncomplete(format!(
            "sweep needs at least 2 pairs, got {}",
            pairs.len()
        )));
    }
    if cfg.alphas.is_empty() {
        return Err(Error::InvalidArgument("empty alpha range".into()));
    }
    let mut prepared = Vec::with_capacity(2 * pairs.len());
    for p in pairs {
        for img in [&p.a, &p.b] {
            let nimg = normalize(img, cfg.polarity)?;
            prepared.push(Prepared {
                pair: p.id,
                field: make_density_field(&nimg, cfg.lambda)?,
            });
        }
    }
    let max_alpha = cfg.alphas.iter().cloned().fold(0.0, f64::max);
    let max_mass = prepared
        .iter()
        .map(|p| p.field.foreground_mass())
        .fold(0.0, f64::max);
    let seq_len = cfg
        .sequence_len
        .unwrap_or_else(|| ((max_alpha * max_mass).round() as usize).max(1));
    let seq = halton(seq_len, 2)?;

    let threads = cfg.threads.clamp(1, cfg.alphas.len());
    let mut rows: Vec<Option<SweepRow>> = vec![None; cfg.alphas.len()];
    thread::scope(|scope| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                let (prepared, seq) = (&prepared, &seq);
                scope.spawn(move || {
                    (t..cfg.alphas.len())
                        .step_by(threads)
                        .map(|k| (k, evaluate_alpha(prepared, seq, cfg.alphas[k], cfg)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, row) in h.join().expect("sweep worker panicked") {
                rows[k] = Some(row);
            }
        }
    });
    Ok(rows.into_iter().map(|r| r.expect("every alpha evaluated")).collect())
}

/// Longest run of consecutive rows whose bands are separated, as
/// `(first alpha, last alpha)`, considering only alphas in `[lo, hi]`.
pub fn longest_separated_run(rows: &[SweepRow], lo: f64, hi: f64) -> Option<(f64, f64)> {
    let mut best: Option<(f64, f64, usize)> = None;
    let mut current: Option<(f64, f64, usize)> = None;
    for row in rows {
        let inside = row.alpha >= lo - 1e-12 && row.alpha <= hi + 1e-12;
        let ok = inside && matches!(&row.bands, Ok(b) if b.separated());
        current = if ok {
            Some(current.map_or((row.alpha, row.alpha, 1), |(s, _, n)| (s, row.alpha, n + 1)))
        } else {
            None
        };
        if let Some(run) = current {
            if best.is_none_or(|b| run.2 > b.2) {
                best = Some(run);
            }
        }
    }
    best.map(|(s, e, _)| (s, e))
}

pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("alpha,valid,related_min,related_max,unrelated_min,unrelated_max,note\n");
    for row in rows {
        match &row.bands {
            Ok(b) => writeln!(
                out,
                "{},1,{},{},{},{},",
                row.alpha,
                fmt_real(b.related_min),
                fmt_real(b.related_max),
                fmt_real(b.unrelated_min),
                fmt_real(b.unrelated_max)
            ),
            Err(reason) => writeln!(out, "{},0,,,,,{}", row.alpha, reason.replace(',', ";")),
        }
        .expect("writing to a String");
    }
    out
}
