//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::panic;
use std::process::ExitCode;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dcode::bench::{self, TimingModel, TimingSample};
use dcode::corpus::{self, CorpusSpec, DEFAULT_BLUR_RADIUS};
use dcode::encoder::{code_length, encode, encode_image, DensityCode, EncodeParams};
use dcode::image_io::{make_density_field, normalize, DensityField, GrayImage, Polarity};
use dcode::matcher::{delta_median, least_squares_fit, median};
use dcode::quasirandom::halton;
use dcode::sweep::{self, SweepConfig};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Exact `t`-th element of the van der Corput sequence in `base`, produced by
/// incrementing a reversed-digit counter and carrying, then dividing two exact
/// integers once.
struct VanDerCorput {
    base: u64,
    digits: Vec<u64>,
}

impl VanDerCorput {
    fn new(base: u64) -> Self {
        VanDerCorput { base, digits: Vec::new() }
    }

    fn next_value(&mut self) -> f64 {
        let mut k = 0;
        loop {
            if k == self.digits.len() {
                self.digits.push(0);
            }
            self.digits[k] += 1;
            if self.digits[k] < self.base {
                break;
            }
            self.digits[k] = 0;
            k += 1;
        }
        let mut num: u64 = 0;
        let mut den: u64 = 1;
        for &d in &self.digits {
            num = num * self.base + d;
            den *= self.base;
        }
        // Horner over least-significant-first digits mirrors them about the point
        num as f64 / den as f64
    }
}

fn c1_uniform_field() -> Outcome {
    let start = Instant::now();
    let n = 64;
    let field = DensityField::from_weights(n, n, &vec![1.0; n * n], 1e-4).map_err(|e| e.to_string())?;
    let seq = halton(256, 2).map_err(|e| e.to_string())?;
    let code = encode(&field, &seq, &EncodeParams::default()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (j, p) in code.points().iter().enumerate() {
        let u = seq.point(j);
        worst = worst.max((p[0] - u[0] * n as f64).abs());
        worst = worst.max((p[1] - u[1] * n as f64).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        code.len() == 256 && worst <= 1e-9 && secs < 1.0,
        format!("m={} max_err={worst:.3e} time={secs:.3}s", code.len()),
    )
}

fn c2_halton_oracle() -> Outcome {
    let seq = halton(10_000, 2).map_err(|e| e.to_string())?;
    let mut oracles = [VanDerCorput::new(2), VanDerCorput::new(3)];
    let mut mismatches = 0;
    for j in 0..seq.len() {
        let p = seq.point(j);
        for (dim, oracle) in oracles.iter_mut().enumerate() {
            if p[dim].to_bits() != oracle.next_value().to_bits() {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0, format!("points=10000 bases=[2,3] mismatches={mismatches}"))
}

fn c3_affine_absorption() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v: Vec<[f64; 2]> = (0..500)
            .map(|_| [rng.random_range(0.0..128.0), rng.random_range(0.0..128.0)])
            .collect();
        let (a, b, c, d) = loop {
            let m: [f64; 4] = std::array::from_fn(|_| rng.random_range(-2.0..2.0));
            if m[0] * m[3] - m[1] * m[2] > 0.1 {
                break (m[0], m[1], m[2], m[3]);
            }
        };
        let (tx, ty) = (rng.random_range(-50.0..50.0), rng.random_range(-50.0..50.0));
        let w: Vec<[f64; 2]> = v.iter().map(|p| [a * p[0] + b * p[1] + tx, c * p[0] + d * p[1] + ty]).collect();
        let r = delta_median(&DensityCode::from_points(v), &DensityCode::from_points(w), 1)
            .map_err(|e| e.to_string())?;
        worst = worst.max(r.delta);
    }
    check(worst <= 1e-6, format!("trials=20 m=500 max_delta={worst:.3e}"))
}

fn paste(figure: &GrayImage, canvas: usize, dx: usize, dy: usize) -> Result<GrayImage, String> {
    let (fw, fh) = (figure.width(), figure.height());
    GrayImage::from_fn(canvas, canvas, |r, c| {
        if r >= dy && r < dy + fh && c >= dx && c < dx + fw {
            figure.get(r - dy, c - dx)
        } else {
            0.0
        }
    })
    .map_err(|e| e.to_string())
}

fn c4_translation() -> Outcome {
    let figure = corpus::generate_figure(11, 128, DEFAULT_BLUR_RADIUS).map_err(|e| e.to_string())?;
    let seq = halton(1024, 2).map_err(|e| e.to_string())?;
    let params = EncodeParams::default();
    let a = encode_image(&paste(&figure, 160, 0, 0)?, Polarity::LightOnDark, &seq, &params).map_err(|e| e.to_string())?;
    let b = encode_image(&paste(&figure, 160, 13, 7)?, Polarity::LightOnDark, &seq, &params).map_err(|e| e.to_string())?;
    let dx: Vec<f64> = a.points().iter().zip(b.points()).map(|(p, q)| q[0] - p[0]).collect();
    let dy: Vec<f64> = a.points().iter().zip(b.points()).map(|(p, q)| q[1] - p[1]).collect();
    let (mx, my) = (median(&dx), median(&dy));
    let err = (mx - 13.0).abs().max((my - 7.0).abs());
    check(
        a.len() == 1024 && err <= 0.5,
        format!("median_shift=({mx:.4}, {my:.4}) err={err:.4}"),
    )
}

fn c5_separation() -> Outcome {
    let start = Instant::now();
    let pairs = corpus::generate_corpus(&CorpusSpec::default()).map_err(|e| e.to_string())?;
    let cfg = SweepConfig {
        degree: 3,
        ..SweepConfig::default()
    };
    let rows = sweep::run_sweep(&pairs, &cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let run = sweep::longest_separated_run(&rows, 0.05, 0.5);
    let width = run.map_or(0.0, |(s, e)| e - s);
    let bands = rows
        .iter()
        .find(|r| (r.alpha - 0.25).abs() < 1e-9)
        .and_then(|r| r.bands.clone().ok())
        .map_or("n/a".to_string(), |b| {
            format!("related<={:.3} unrelated>={:.3}", b.related_max, b.unrelated_min)
        });
    check(
        width >= 0.2 - 1e-9 && secs < 300.0,
        format!("run={run:?} width={width:.2} at_0.25: {bands} time={secs:.1}s"),
    )
}

fn c6_speed() -> Outcome {
    let img = corpus::generate_figure(5, 256, DEFAULT_BLUR_RADIUS).map_err(|e| e.to_string())?;
    let seq = halton(1025, 2).map_err(|e| e.to_string())?;
    let params = EncodeParams::default();
    let mut times = Vec::new();
    for _ in 0..21 {
        let start = Instant::now();
        let code = encode_image(&img, Polarity::LightOnDark, &seq, &params);
        times.push(start.elapsed().as_secs_f64() * 1e3);
        std::hint::black_box(code.map_err(|e| e.to_string())?);
    }
    let med = median(&times);
    check(med <= 100.0, format!("256x256 m=1025 median={med:.3}ms"))
}

fn c7_timing_model() -> Outcome {
    let start = Instant::now();
    let sizes = bench::powers_of_two(16, 512);
    let lengths = bench::powers_of_two(16, 1024);
    let samples = bench::run_grid(&sizes, &sizes, &lengths, 10, 7).map_err(|e| e.to_string())?;
    let model = bench::fit_model(&samples).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();

    let planted = TimingModel {
        a: 5.0e-5,
        b: 3.0e-4,
        c: 2.0e-5,
        ..TimingModel::reference()
    };
    let synthetic: Vec<TimingSample> = samples
        .iter()
        .map(|s| TimingSample {
            median_ms: planted.predict(s.height, s.width, s.length),
            ..*s
        })
        .collect();
    let fit = bench::fit_model(&synthetic).map_err(|e| e.to_string())?;
    let rel = [(fit.a, planted.a), (fit.b, planted.b), (fit.c, planted.c)]
        .iter()
        .map(|(x, y)| ((x - y) / y).abs())
        .fold(0.0, f64::max);
    check(
        model.r >= 0.95 && rel <= 1e-6 && secs < 600.0,
        format!("cells={} {} synthetic_rel_err={rel:.2e} time={secs:.1}s", samples.len(), model.to_line()),
    )
}

fn c8_least_squares() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut worst_orth, mut worst_rec): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let b = DMatrix::from_fn(200, 10, |_, _| rng.random_range(-1.0..1.0));
        let w = DMatrix::from_fn(200, 2, |_, _| rng.random_range(-100.0..100.0));
        let t = least_squares_fit(&b, &w).map_err(|e| e.to_string())?.solution;
        let orth = (b.transpose() * (&b * &t - &w)).norm();
        let bound = 1e-8 * (1.0 + b.transpose().norm() * w.norm());
        worst_orth = worst_orth.max(orth / bound);

        let t0 = DMatrix::from_fn(10, 2, |_, _| rng.random_range(-5.0..5.0));
        let planted = &b * &t0;
        let t1 = least_squares_fit(&b, &planted).map_err(|e| e.to_string())?.solution;
        worst_rec = worst_rec.max((t1 - &t0).norm() / t0.norm());
    }
    check(
        worst_orth <= 1.0 && worst_rec <= 1e-9,
        format!("trials=100 orth/bound={worst_orth:.3e} planted_rel_err={worst_rec:.3e}"),
    )
}

fn c9_truncation_prefix() -> Outcome {
    let fig_a = corpus::generate_figure(21, 96, DEFAULT_BLUR_RADIUS).map_err(|e| e.to_string())?;
    let fig_b = corpus::generate_figure(22, 96, DEFAULT_BLUR_RADIUS).map_err(|e| e.to_string())?;
    let seq = halton(1024, 2).map_err(|e| e.to_string())?;
    let at = |m| EncodeParams {
        max_points: Some(m),
        ..EncodeParams::default()
    };
    let v = encode_image(&fig_a, Polarity::LightOnDark, &seq, &at(700)).map_err(|e| e.to_string())?;
    let w = encode_image(&fig_b, Polarity::LightOnDark, &seq, &at(500)).map_err(|e| e.to_string())?;
    let full = delta_median(&v, &w, 3).map_err(|e| e.to_string())?.delta;
    let cut = delta_median(&v.truncated(500), &w.truncated(500), 3).map_err(|e| e.to_string())?.delta;

    let short = encode_image(&fig_a, Polarity::LightOnDark, &seq, &at(512)).map_err(|e| e.to_string())?;
    let long = encode_image(&fig_a, Polarity::LightOnDark, &seq, &at(1024)).map_err(|e| e.to_string())?;
    let prefix_ok = short.points() == &long.points()[..512];
    check(
        full.to_bits() == cut.to_bits() && prefix_ok,
        format!("delta={full:.6} truncated={cut:.6} prefix_512_of_1024={prefix_ok}"),
    )
}

/// An image whose normalized foreground mass is exactly `mass` pixels of 1.
fn image_with_mass(mass: usize, size: usize) -> Result<GrayImage, String> {
    GrayImage::from_fn(size, size, |r, c| if r * size + c < mass { 1.0 } else { 0.0 }).map_err(|e| e.to_string())
}

fn c10_code_length() -> Outcome {
    let mut got = Vec::new();
    let mut ok = true;
    for (mass, expect_long, expect_short) in [(3729usize, 932usize, 932usize), (8923, 2231, 1025)] {
        let nimg = normalize(&image_with_mass(mass, 128)?, Polarity::LightOnDark).map_err(|e| e.to_string())?;
        ok &= nimg.foreground_mass() == mass as f64;
        let field = make_density_field(&nimg, 1e-4).map_err(|e| e.to_string())?;
        for (len, expect) in [(4096, expect_long), (1025, expect_short)] {
            let seq = halton(len, 2).map_err(|e| e.to_string())?;
            let params = EncodeParams {
                alpha: Some(0.25),
                ..EncodeParams::default()
            };
            let m = encode(&field, &seq, &params).map_err(|e| e.to_string())?.len();
            let rule = code_length(mass as f64, Some(0.25), len).map_err(|e| e.to_string())?;
            ok &= m == expect && rule == expect;
            got.push(format!("mass={mass} seq={len} m={m}"));
        }
    }
    check(ok, got.join(" "))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("uniform-field closed form", c1_uniform_field),
        ("halton oracle", c2_halton_oracle),
        ("affine absorption", c3_affine_absorption),
        ("translation equivariance", c4_translation),
        ("separation sweep", c5_separation),
        ("encoding speed", c6_speed),
        ("timing-model structure", c7_timing_model),
        ("least-squares correctness", c8_least_squares),
        ("truncation and prefix laws", c9_truncation_prefix),
        ("code-length rule", c10_code_length),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS  {:>2} {name}: {detail}", k + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL  {:>2} {name}: {detail}", k + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
