//! Synthetic test corpus: blurred branching "plants" and "wind" warps of them.
//!
//! Each pair holds a figure `A` and `B = A o psi^-1`, where `psi` is a
//! bivariate cubic whose Jacobian is upper triangular with a positive
//! diagonal: `x' = psi_x(x, y)`, `y' = psi_y(y)`. Density codes of `A` and `B`
//! are then related point-for-point by `psi`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image_io::{load_image, write_pgm, GrayImage, ImageFormat};
use crate::matcher::{all_powers, ExponentSet};

/// Full-scale pixel value of generated figures (16-bit PGM).
pub const FIGURE_MAXVAL: u16 = 65535;

pub const DEFAULT_BLUR_RADIUS: f64 = 1.5;

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub pair_count: usize,
    pub size: usize,
    pub seed: u64,
    pub warp_degree: u32,
    pub blur_radius: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            pair_count: 6,
            size: 128,
            seed: 42,
            warp_degree: 3,
            blur_radius: DEFAULT_BLUR_RADIUS,
        }
    }
}

impl CorpusSpec {
    fn validate(&self) -> Result<()> {
        if self.pair_count < 2 {
            return Err(Error::InvalidArgument(format!(
                "corpus needs at least 2 pairs, got {}",
                self.pair_count
            )));
        }
        if self.size < 64 {
            return Err(Error::InvalidArgument(format!(
                "corpus images must be at least 64 pixels, got {}",
                self.size
            )));
        }
        if self.warp_degree != 3 {
            return Err(Error::InvalidArgument("only cubic warps are generated".into()));
        }
        Ok(())
    }
}

/// Coefficients of a bivariate cubic map over the monomials of
/// `all_powers(2, 3)` in continuous pixel coordinates `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpCoeffs {
    pub x: [f64; 10],
    pub y: [f64; 10],
}

impl WarpCoeffs {
    pub fn identity() -> Self {
        let exps = cubic_exponents();
        let mut w = WarpCoeffs {
            x: [0.0; 10],
            y: [0.0; 10],
        };
        w.x[index_of(&exps, 1, 0)] = 1.0;
        w.y[index_of(&exps, 0, 1)] = 1.0;
        w
    }

    pub fn translation(dx: f64, dy: f64) -> Self {
        let mut w = WarpCoeffs::identity();
        w.x[0] = dx;
        w.y[0] = dy;
        w
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let exps = cubic_exponents();
        (poly(&exps, &self.x, x, y), poly(&exps, &self.y, x, y))
    }

    /// Partial derivatives `(dpsi_x/dx, dpsi_y/dx, dpsi_y/dy)`.
    fn partials(&self, exps: &ExponentSet, x: f64, y: f64) -> (f64, f64, f64) {
        let mut xx = 0.0;
        let mut yx = 0.0;
        let mut yy = 0.0;
        for (t, e) in exps.vectors().iter().enumerate() {
            let (px, py) = (e[0] as i32, e[1] as i32);
            if px > 0 {
                let d = px as f64 * x.powi(px - 1) * y.powi(py);
                xx += self.x[t] * d;
                yx += self.y[t] * d;
            }
            if py > 0 {
                yy += self.y[t] * py as f64 * x.powi(px) * y.powi(py - 1);
            }
        }
        (xx, yx, yy)
    }

    /// Check the triangular-Jacobian family condition on a 17x17 grid over
    /// the `size x size` rectangle.
    pub fn check_family(&self, size: f64) -> Result<()> {
        let exps = cubic_exponents();
        for i in 0..17 {
            for j in 0..17 {
                let (x, y) = (size * i as f64 / 16.0, size * j as f64 / 16.0);
                let (xx, yx, yy) = self.partials(&exps, x, y);
                if yx.abs() > 1e-9 * (1.0 + yy.abs()) {
                    return Err(Error::NotInFamily(format!(
                        "dpsi_y/dx = {yx} at ({x}, {y})"
                    )));
                }
                if !(xx > 0.0) || !(yy > 0.0) {
                    return Err(Error::NotInFamily(format!(
                        "non-positive diagonal ({xx}, {yy}) at ({x}, {y})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn to_field(coeffs: &[f64; 10]) -> String {
        coeffs
            .iter()
            .map(|c| format!("{c:.16e}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn from_field(text: &str) -> Result<[f64; 10]> {
        let values: Vec<f64> = text
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::MalformedCsv(format!("warp coefficient: {e}")))?;
        values
            .try_into()
            .map_err(|v: Vec<f64>| Error::MalformedCsv(format!("expected 10 warp coefficients, got {}", v.len())))
    }
}

fn cubic_exponents() -> ExponentSet {
    all_powers(2, 3)
}

fn index_of(exps: &ExponentSet, px: u32, py: u32) -> usize {
    exps.vectors()
        .iter()
        .position(|e| e[0] == px && e[1] == py)
        .expect("monomial present in cubic basis")
}

fn poly(exps: &ExponentSet, coeffs: &[f64; 10], x: f64, y: f64) -> f64 {
    exps.vectors()
        .iter()
        .zip(coeffs)
        .map(|(e, c)| c * x.powi(e[0] as i32) * y.powi(e[1] as i32))
        .sum()
}

/// Solve `f(t) = target` for `t` in `[0, hi]` with `f` increasing there, or
/// `None` when the target lies outside `f([0, hi])`.
fn solve_monotone(f: impl Fn(f64) -> (f64, f64), target: f64, guess: f64, hi: f64) -> Option<f64> {
    let (f_lo, _) = f(0.0);
    let (f_hi, _) = f(hi);
    if target < f_lo || target > f_hi {
        return None;
    }
    let (mut a, mut b) = (0.0, hi);
    let mut t = guess.clamp(0.0, hi);
    for _ in 0..100 {
        let (v, dv) = f(t);
        let r = v - target;
        if r == 0.0 {
            return Some(t);
        }
        if r < 0.0 {
            a = t;
        } else {
            b = t;
        }
        let newton = t - r / dv;
        let next = if dv > 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - t).abs() <= 1e-13 * hi.max(1.0) {
            return Some(next);
        }
        t = next;
    }
    Some(t)
}

/// Resample `img` under the forward map `psi`: output pixel `p` reads the
/// input at `psi^-1(p)` with bilinear interpolation. Samples falling
/// outside the image read as the image minimum (the background).
pub fn warp_image(img: &GrayImage, coeffs: &WarpCoeffs) -> Result<GrayImage> {
    let (w, h) = (img.width(), img.height());
    coeffs.check_family(w.max(h) as f64)?;
    let exps = cubic_exponents();
    let (background, _) = img.min_max();
    let (sx, sy) = (w as f64, h as f64);

    let sample = |x: f64, y: f64| -> f64 {
        // continuous coordinate -> index space with pixel centers on integers
        let (fx, fy) = (x - 0.5, y - 0.5);
        let (c0, r0) = (fx.floor(), fy.floor());
        let (tx, ty) = (fx - c0, fy - r0);
        let at = |r: f64, c: f64| -> f64 {
            if r < 0.0 || c < 0.0 || r >= sy || c >= sx {
                background
            } else {
                img.get(r as usize, c as usize)
            }
        };
        let top = lerp(at(r0, c0), at(r0, c0 + 1.0), tx);
        let bottom = lerp(at(r0 + 1.0, c0), at(r0 + 1.0, c0 + 1.0), tx);
        lerp(top, bottom, ty)
    };

    GrayImage::from_fn(w, h, |r, c| {
        let (tx, ty) = (c as f64 + 0.5, r as f64 + 0.5);
        let psi_y = |y: f64| {
            let (_, _, dyy) = coeffs.partials(&exps, 0.0, y);
            (poly(&exps, &coeffs.y, 0.0, y), dyy)
        };
        let Some(y) = solve_monotone(psi_y, ty, ty, sy) else {
            return background;
        };
        let psi_x = |x: f64| {
            let (dxx, _, _) = coeffs.partials(&exps, x, y);
            (poly(&exps, &coeffs.x, x, y), dxx)
        };
        let Some(x) = solve_monotone(psi_x, tx, tx, sx) else {
            return background;
        };
        sample(x, y)
    })
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t == 0.0 {
        a
    } else {
        a + (b - a) * t
    }
}

/// Separable Gaussian blur with standard deviation `sigma` pixels; edges
/// are treated as zero.
fn gaussian_blur(pixels: &[f64], size: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return pixels.to_vec();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm: f64 = kernel.iter().sum();
    let kernel: Vec<f64> = kernel.iter().map(|k| k / norm).collect();
    let n = size as isize;

    let mut tmp = vec![0.0; pixels.len()];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let cc = c + k as isize - radius;
                if (0..n).contains(&cc) {
                    acc += kv * pixels[(r * n + cc) as usize];
                }
            }
            tmp[(r * n + c) as usize] = acc;
        }
    }
    let mut out = vec![0.0; pixels.len()];
    for r in 0..n {
        for c in 0..n {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let rr = r + k as isize - radius;
                if (0..n).contains(&rr) {
                    acc += kv * tmp[(rr * n + c) as usize];
                }
            }
            out[(r * n + c) as usize] = acc;
        }
    }
    out
}

struct Canvas {
    size: usize,
    pixels: Vec<f64>,
}

impl Canvas {
    /// Paint a round-capped segment of the given width.
    fn segment(&mut self, a: (f64, f64), b: (f64, f64), width: f64) {
        let half = 0.5 * width.max(1.0);
        let (x0, x1) = (a.0.min(b.0) - half, a.0.max(b.0) + half);
        let (y0, y1) = (a.1.min(b.1) - half, a.1.max(b.1) + half);
        let clampi = |v: f64| v.floor().clamp(0.0, self.size as f64 - 1.0) as usize;
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        for r in clampi(y0)..=clampi(y1) {
            for c in clampi(x0)..=clampi(x1) {
                let (px, py) = (c as f64 + 0.5, r as f64 + 0.5);
                let t = if len2 > 0.0 {
                    (((px - a.0) * dx + (py - a.1) * dy) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let d = (px - a.0 - t * dx).hypot(py - a.1 - t * dy);
                if d <= half {
                    self.pixels[r * self.size + c] = 1.0;
                }
            }
        }
    }
}

struct Plant<'a> {
    rng: &'a mut ChaCha8Rng,
    canvas: Canvas,
    max_depth: u32,
    spread: f64,
    decay: f64,
}

impl Plant<'_> {
    fn branch(&mut self, from: (f64, f64), angle: f64, length: f64, width: f64, depth: u32) {
        let to = (from.0 + length * angle.sin(), from.1 - length * angle.cos());
        self.canvas.segment(from, to, width);
        if depth >= self.max_depth || length < 2.0 {
            return;
        }
        let children = if self.rng.random_bool(0.35) { 3 } else { 2 };
        for k in 0..children {
            let side = if children == 2 {
                if k == 0 { -1.0 } else { 1.0 }
            } else {
                k as f64 - 1.0
            };
            let turn = side * self.spread * self.rng.random_range(0.5..1.3)
                + self.rng.random_range(-0.15..0.15);
            let shrink = self.decay * self.rng.random_range(0.8..1.15);
            self.branch(to, angle + turn, length * shrink, width * 0.72, depth + 1);
        }
    }
}

/// Deterministic blurred branching figure, light on dark, values in
/// `0..=FIGURE_MAXVAL` (rounded to integers).
pub fn generate_figure(seed: u64, size: usize, blur_radius: f64) -> Result<GrayImage> {
    if size < 64 {
        return Err(Error::InvalidArgument(format!("figure size must be >= 64, got {size}")));
    }
    let s = size as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_depth = rng.random_range(4..=6);
    let spread = rng.random_range(0.3..0.75);
    let decay = rng.random_range(0.62..0.78);
    let lean = rng.random_range(-0.25..0.25);
    let base = (s * rng.random_range(0.42..0.58), s * 0.86);
    let trunk = s * rng.random_range(0.16..0.22);
    let mut width = s * 0.035;

    let floor = 0.02 * s * s;
    loop {
        let mut branch_rng = rng.clone();
        let mut plant = Plant {
            rng: &mut branch_rng,
            canvas: Canvas {
                size,
                pixels: vec![0.0; size * size],
            },
            max_depth,
            spread,
            decay,
        };
        plant.branch(base, lean, trunk, width, 0);
        let blurred = gaussian_blur(&plant.canvas.pixels, size, blur_radius);
        let peak = blurred.iter().cloned().fold(0.0, f64::max);
        let scaled: Vec<f64> = blurred
            .iter()
            .map(|v| (v / peak * FIGURE_MAXVAL as f64).round())
            .collect();
        let mass: f64 = scaled.iter().sum::<f64>() / FIGURE_MAXVAL as f64;
        if mass > floor {
            return GrayImage::new(size, size, scaled);
        }
        width *= 1.25;
    }
}

/// A random "wind" warp for a figure of the given size: rows bend sideways
/// by a cubic in height above the base, with a mild vertical squash and a
/// height-dependent horizontal stretch.
pub fn wind_warp(rng: &mut ChaCha8Rng, size: usize) -> WarpCoeffs {
    let s = size as f64;
    let base = 0.86 * s;
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let bend2 = sign * rng.random_range(0.10..0.22);
    let bend3 = sign * rng.random_range(0.0..0.15);
    let stretch = rng.random_range(-0.12..0.12);
    let squash = rng.random_range(0.0..0.08);
    let xc = 0.5 * s;

    // h = (base - y) / s; polynomial coefficients in y of h^k
    let h_pow = |k: usize| -> [f64; 4] {
        let mut p = [0.0; 4];
        p[0] = 1.0;
        for _ in 0..k {
            let mut next = [0.0; 4];
            for i in 0..4 {
                if p[i] != 0.0 {
                    next[i] += p[i] * base / s;
                    if i + 1 < 4 {
                        next[i + 1] -= p[i] / s;
                    }
                }
            }
            p = next;
        }
        p
    };
    let exps = cubic_exponents();
    let mut w = WarpCoeffs {
        x: [0.0; 10],
        y: [0.0; 10],
    };
    // x' = x + s (bend2 h^2 + bend3 h^3) + stretch h (x - xc)
    w.x[index_of(&exps, 1, 0)] += 1.0;
    let (h1, h2, h3) = (h_pow(1), h_pow(2), h_pow(3));
    for i in 0..4 {
        w.x[index_of(&exps, 0, i as u32)] += s * (bend2 * h2[i] + bend3 * h3[i]) - stretch * xc * h1[i];
        if i < 3 {
            w.x[index_of(&exps, 1, i as u32)] += stretch * h1[i];
        }
    }
    // y' = base - (1 - squash) (base - y)
    w.y[index_of(&exps, 0, 0)] = squash * base;
    w.y[index_of(&exps, 0, 1)] = 1.0 - squash;
    w
}

#[derive(Debug, Clone)]
pub struct CorpusPair {
    /// 1-based pair number.
    pub id: usize,
    pub seed: u64,
    pub a: GrayImage,
    pub b: GrayImage,
    pub warp: WarpCoeffs,
}

fn pair_seed(seed: u64, k: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(k as u64)
}

pub fn generate_corpus(spec: &CorpusSpec) -> Result<Vec<CorpusPair>> {
    spec.validate()?;
    (1..=spec.pair_count)
        .map(|id| {
            let seed = pair_seed(spec.seed, id);
            let a = generate_figure(seed, spec.size, spec.blur_radius)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xA5A5_5A5A_0F0F_F0F0);
            let warp = wind_warp(&mut rng, spec.size);
            let warped = warp_image(&a, &warp)?;
            let b = GrayImage::new(
                spec.size,
                spec.size,
                warped.pixels().iter().map(|v| v.round()).collect(),
            )?;
            Ok(CorpusPair {
                id,
                seed,
                a,
                b,
                warp,
            })
        })
        .collect()
}

pub const MANIFEST: &str = "manifest.csv";

fn image_names(id: usize) -> (String, String) {
    (format!("pair{id}_A.pgm"), format!("pair{id}_B.pgm"))
}

/// Write `pair<k>_A.pgm`, `pair<k>_B.pgm` and `manifest.csv` into `dir`.
pub fn write_corpus(pairs: &[CorpusPair], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = String::from("pair,seed,image_a,image_b,warp_x,warp_y\n");
    for p in pairs {
        let (na, nb) = image_names(p.id);
        write_pgm(&p.a, FIGURE_MAXVAL, &dir.join(&na))?;
        write_pgm(&p.b, FIGURE_MAXVAL, &dir.join(&nb))?;
        writeln!(
            manifest,
            "{},{},{na},{nb},{},{}",
            p.id,
            p.seed,
            WarpCoeffs::to_field(&p.warp.x),
            WarpCoeffs::to_field(&p.warp.y)
        )
        .expect("writing to a String");
    }
    let path = dir.join(MANIFEST);
    fs::write(&path, manifest).map_err(|e| Error::io(path, e))
}

/// Read a corpus written by [`write_corpus`].
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusPair>> {
    let path: PathBuf = dir.join(MANIFEST);
    let text = fs::read_to_string(&path)
        .map_err(|e| Error::CorpusIncomplete(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(Error::MalformedCsv(format!(
                "{} line {}: expected 6 columns, got {}",
                MANIFEST,
                i + 1,
                cols.len()
            )));
        }
        let bad = |what: &str| Error::MalformedCsv(format!("{} line {}: bad {what}", MANIFEST, i + 1));
        let id: usize = cols[0].parse().map_err(|_| bad("pair id"))?;
        let seed: u64 = cols[1].parse().map_err(|_| bad("seed"))?;
        let load = |name: &str| {
            let p = dir.join(name);
            if !p.exists() {
                return Err(Error::CorpusIncomplete(format!("missing {}", p.display())));
            }
            load_image(&p, ImageFormat::Pgm)
        };
        pairs.push(CorpusPair {
            id,
            seed,
            a: load(cols[2])?,
            b: load(cols[3])?,
            warp: WarpCoeffs {
                x: WarpCoeffs::from_field(cols[4])?,
                y: WarpCoeffs::from_field(cols[5])?,
            },
        });
    }
    if pairs.len() < 2 {
        return Err(Error::CorpusIncomplete(format!(
            "{} lists {} pairs, at least 2 needed",
            path.display(),
            pairs.len()
        )));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image_io::{normalize, Polarity};

    #[test]
    fn figures_are_deterministic_and_massive() {
        let a = generate_figure(7, 128, 1.5).unwrap();
        assert_eq!(a, generate_figure(7, 128, 1.5).unwrap());
        assert_ne!(a, generate_figure(8, 128, 1.5).unwrap());
        let (lo, hi) = a.min_max();
        assert!(lo < hi);
        let n = normalize(&a, Polarity::LightOnDark).unwrap();
        assert!(n.foreground_mass() > 0.02 * 128.0 * 128.0);
    }

    #[test]
    fn identity_warp_is_exact() {
        let a = generate_figure(3, 64, 1.0).unwrap();
        assert_eq!(warp_image(&a, &WarpCoeffs::identity()).unwrap(), a);
    }

    #[test]
    fn whole_pixel_translation_shifts() {
        let a = generate_figure(4, 64, 1.0).unwrap();
        let (dx, dy) = (3usize, 2usize);
        let b = warp_image(&a, &WarpCoeffs::translation(dx as f64, dy as f64)).unwrap();
        for r in dy..64 {
            for c in dx..64 {
                assert_eq!(b.get(r, c), a.get(r - dy, c - dx));
            }
        }
    }

    #[test]
    fn wind_warps_are_in_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            wind_warp(&mut rng, 128).check_family(128.0).unwrap();
        }
    }

    #[test]
    fn rotations_are_rejected() {
        let exps = cubic_exponents();
        let mut w = WarpCoeffs::identity();
        w.y[index_of(&exps, 1, 0)] = 0.3;
        assert!(matches!(w.check_family(64.0), Err(Error::NotInFamily(_))));
        let mut flip = WarpCoeffs::identity();
        flip.x[index_of(&exps, 1, 0)] = -1.0;
        assert!(matches!(flip.check_family(64.0), Err(Error::NotInFamily(_))));
        let a = generate_figure(1, 64, 1.0).unwrap();
        assert!(warp_image(&a, &w).is_err());
    }

    #[test]
    fn warp_matches_forward_map_on_a_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let w = wind_warp(&mut rng, 128);
        let (x, y) = w.apply(40.0, 60.0);
        // invert via the same solver used by warp_image
        let exps = cubic_exponents();
        let yy = solve_monotone(|t| (poly(&exps, &w.y, 0.0, t), w.partials(&exps, 0.0, t).2), y, y, 128.0).unwrap();
        assert!((yy - 60.0).abs() < 1e-9);
        let xx = solve_monotone(|t| (poly(&exps, &w.x, t, yy), w.partials(&exps, t, yy).0), x, x, 128.0).unwrap();
        assert!((xx - 40.0).abs() < 1e-9);
    }

    #[test]
    fn corpus_round_trips_through_disk() {
        let spec = CorpusSpec {
            pair_count: 2,
            size: 64,
            ..CorpusSpec::default()
        };
        let pairs = generate_corpus(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_corpus(&pairs, dir.path()).unwrap();
        let back = load_corpus(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        for (p, q) in pairs.iter().zip(&back) {
            assert_eq!(p.a, q.a);
            assert_eq!(p.b, q.b);
            assert_eq!(p.warp, q.warp);
            assert_eq!(p.seed, q.seed);
        }
        fs::remove_file(dir.path().join("pair2_B.pgm")).unwrap();
        assert!(matches!(load_corpus(dir.path()), Err(Error::CorpusIncomplete(_))));
    }

    #[test]
    fn spec_is_validated() {
        let bad = CorpusSpec {
            pair_count: 1,
            ..CorpusSpec::default()
        };
        assert!(generate_corpus(&bad).is_err());
        let small = CorpusSpec {
            size: 32,
            ..CorpusSpec::default()
        };
        assert!(generate_corpus(&small).is_err());
    }
}
