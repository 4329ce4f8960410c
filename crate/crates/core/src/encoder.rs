//! Density coding: each quasi-uniform point is pushed through the inverse of
//! the image's cumulative mapping.
//!
//! The y coordinate is drawn first from the row-marginal CDF. The x
//! coordinate is then drawn from a conditional row density interpolated
//! between the two rows that bracket y. Both CDFs are inverted by
//! dichotomic search followed by linear interpolation inside the bracket.
//! Output coordinates are continuous, in pixel-side units, with 0 at the
//! image edge: a point lies in `(0, width) x (0, height)`. Array indices
//! are obtained by subtracting 0.5 and clamping.

use crate::error::{Error, Result};
use crate::image_io::{make_density_field, normalize, DensityField, GrayImage, Polarity};
use crate::quasirandom::QuasiSequence;

/// Where a code came from. Recorded in code-file headers.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub width: usize,
    pub height: usize,
    pub lambda: f64,
    pub alpha: Option<f64>,
    pub polarity: Polarity,
    pub sequence: String,
}

/// An ordered list of 2-D code points `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCode {
    points: Vec<[f64; 2]>,
    provenance: Option<Provenance>,
}

impl DensityCode {
    /// A bare code without provenance, e.g. read from an external source.
    pub fn from_points(points: Vec<[f64; 2]>) -> Self {
        DensityCode {
            points,
            provenance: None,
        }
    }

    pub fn with_provenance(points: Vec<[f64; 2]>, provenance: Provenance) -> Self {
        DensityCode {
            points,
            provenance: Some(provenance),
        }
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// The first `m` points (all of them if the code is shorter).
    pub fn truncated(&self, m: usize) -> DensityCode {
        DensityCode {
            points: self.points[..m.min(self.points.len())].to_vec(),
            provenance: self.provenance.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncodeParams {
    pub lambda: f64,
    /// Points per unit of foreground mass; `None` uses the whole sequence.
    pub alpha: Option<f64>,
    /// Cap on the number of sequence points used; `None` means all of them.
    pub max_points: Option<usize>,
}

impl Default for EncodeParams {
    fn default() -> Self {
        EncodeParams {
            lambda: crate::image_io::DEFAULT_LAMBDA,
            alpha: None,
            max_points: None,
        }
    }
}

/// Number of code points: `min(available, round(alpha * mass))`, or
/// `available` in fixed-length mode.
pub fn code_length(foreground_mass: f64, alpha: Option<f64>, available: usize) -> Result<usize> {
    if available == 0 {
        return Err(Error::SequenceTooShort {
            requested: 1,
            available,
        });
    }
    let Some(alpha) = alpha else {
        return Ok(available);
    };
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidAlpha(alpha));
    }
    let wanted = (alpha * foreground_mass).round();
    if !(wanted >= 1.0) {
        return Err(Error::EmptyCode {
            alpha,
            mass: foreground_mass,
        });
    }
    Ok(if wanted >= available as f64 {
        available
    } else {
        wanted as usize
    })
}

/// Result of inverting a 1-D discrete CDF: continuous coordinate, the
/// bracketing bin boundary `inf` and the interpolation weight inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Bracket {
    inf: usize,
    weight: f64,
}

impl Bracket {
    fn coordinate(self) -> f64 {
        self.inf as f64 + self.weight
    }
}

/// Invert a CDF given as `cdf[i - 1] = P(i)` for `i = 1..=S`, with the
/// implicit `P(0) = 0` and `P(S) = 1`.
fn invert_cdf(cdf: &[f64], u: f64) -> Bracket {
    let at = |i: usize| if i == 0 { 0.0 } else { cdf[i - 1] };
    let mut inf = 0;
    let mut sup = cdf.len();
    while sup - inf > 1 {
        let mid = (inf + sup) / 2;
        if u >= at(mid) {
            inf = mid;
        } else {
            sup = mid;
        }
    }
    let lo = at(inf);
    let span = at(sup) - lo;
    debug_assert!(span > 0.0, "zero-width CDF bracket at u = {u}");
    Bracket {
        inf,
        weight: (u - lo) / span,
    }
}

/// Reusable scratch space for per-point conditional row CDFs.
struct Inverter<'a> {
    field: &'a DensityField,
    row_cdf: Vec<f64>,
}

impl<'a> Inverter<'a> {
    fn new(field: &'a DensityField) -> Self {
        Inverter {
            field,
            row_cdf: vec![0.0; field.width()],
        }
    }

    fn invert(&mut self, u: [f64; 2]) -> [f64; 2] {
        let field = self.field;
        let ybr = invert_cdf(field.row_cdf(), u[1]);

        // conditional row density between rows `inf - 1` and `inf` (0-based),
        // where row -1 is empty
        let w = ybr.weight;
        let upper = field.row(ybr.inf.min(field.height() - 1));
        let mut acc = 0.0;
        if ybr.inf > 0 {
            let lower = field.row(ybr.inf - 1);
            for ((dst, &a), &b) in self.row_cdf.iter_mut().zip(lower).zip(upper) {
                acc += a + (b - a) * w;
                *dst = acc;
            }
        } else {
            for (dst, &b) in self.row_cdf.iter_mut().zip(upper) {
                acc += w * b;
                *dst = acc;
            }
        }
        for p in &mut self.row_cdf {
            *p /= acc;
        }

        let xbr = invert_cdf(&self.row_cdf, u[0]);
        [xbr.coordinate(), ybr.coordinate()]
    }
}

/// Map a single point of `(0, 1)^2` to continuous pixel coordinates `(x, y)`.
pub fn invert_point(field: &DensityField, u: [f64; 2]) -> [f64; 2] {
    Inverter::new(field).invert(u)
}

/// Encode a density field against a 2-D quasi-uniform sequence.
pub fn encode(field: &DensityField, seq: &QuasiSequence, params: &EncodeParams) -> Result<DensityCode> {
    if seq.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: seq.dim(),
        });
    }
    let available = params.max_points.unwrap_or(seq.len());
    let m = code_length(field.foreground_mass(), params.alpha, available)?;
    if m > seq.len() {
        return Err(Error::SequenceTooShort {
            requested: m,
            available: seq.len(),
        });
    }
    let mut inverter = Inverter::new(field);
    let points = seq
        .points()
        .take(m)
        .map(|u| inverter.invert([u[0], u[1]]))
        .collect();
    Ok(DensityCode::with_provenance(
        points,
        Provenance {
            width: field.width(),
            height: field.height(),
            lambda: field.lambda(),
            alpha: params.alpha,
            polarity: field.polarity(),
            sequence: seq.name().to_string(),
        },
    ))
}

/// Normalize, regularize and encode an image in one call.
pub fn encode_image(
    img: &GrayImage,
    polarity: Polarity,
    seq: &QuasiSequence,
    params: &EncodeParams,
) -> Result<DensityCode> {
    let nimg = normalize(img, polarity)?;
    let field = make_density_field(&nimg, params.lambda)?;
    encode(&field, seq, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quasirandom::halton;

    fn uniform_field(w: usize, h: usize) -> DensityField {
        DensityField::from_weights(w, h, &vec![1.0; w * h], 1e-4).unwrap()
    }

    #[test]
    fn code_length_rules() {
        assert_eq!(code_length(5000.0, Some(0.25), 2048).unwrap(), 1250);
        assert_eq!(code_length(123.0, None, 1025).unwrap(), 1025);
        assert_eq!(code_length(8923.0, Some(0.5), 8000).unwrap(), 4462);
        assert_eq!(code_length(8923.0, Some(0.5), 4000).unwrap(), 4000);
        assert!(matches!(code_length(10.0, Some(0.01), 100), Err(Error::EmptyCode { .. })));
        assert!(matches!(code_length(10.0, Some(0.0), 100), Err(Error::InvalidAlpha(_))));
        assert!(code_length(10.0, None, 0).is_err());
    }

    #[test]
    fn cdf_inversion_brackets() {
        let cdf = [0.25, 0.5, 0.75, 1.0];
        assert_eq!(invert_cdf(&cdf, 0.1).coordinate(), 0.4);
        assert_eq!(invert_cdf(&cdf, 0.5).coordinate(), 2.0);
        assert_eq!(invert_cdf(&cdf, 0.875).coordinate(), 3.5);
        assert_eq!(invert_cdf(&cdf, 0.999).inf, 3);
    }

    #[test]
    fn uniform_two_by_two_center() {
        let field = uniform_field(2, 2);
        assert_eq!(field.row_cdf(), &[0.5, 1.0]);
        assert_eq!(invert_point(&field, [0.5, 0.5]), [1.0, 1.0]);
    }

    #[test]
    fn uniform_field_is_affine_in_u() {
        let (w, h) = (7, 5);
        let field = uniform_field(w, h);
        for u in [[0.01, 0.99], [0.3, 0.7], [0.123, 0.456], [0.999, 0.001]] {
            let p = invert_point(&field, u);
            assert!((p[0] - u[0] * w as f64).abs() < 1e-12, "{p:?}");
            assert!((p[1] - u[1] * h as f64).abs() < 1e-12, "{p:?}");
        }
    }

    #[test]
    fn delta_like_density_stays_in_its_pixel() {
        let mut weights = vec![0.0; 16 * 16];
        weights[0] = 1.0;
        let field = DensityField::from_weights(16, 16, &weights, 1e-12).unwrap();
        let seq = halton(200, 2).unwrap();
        for u in seq.points() {
            let p = invert_point(&field, [u[0], u[1]]);
            assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]), "{p:?}");
        }
    }

    #[test]
    fn encode_scales_halton_on_uniform_field() {
        let field = uniform_field(16, 16);
        let seq = halton(64, 2).unwrap();
        let code = encode(&field, &seq, &EncodeParams::default()).unwrap();
        assert_eq!(code.len(), 64);
        for (p, u) in code.points().iter().zip(seq.points()) {
            assert!((p[0] - 16.0 * u[0]).abs() <= 1e-9);
            assert!((p[1] - 16.0 * u[1]).abs() <= 1e-9);
        }
    }

    #[test]
    fn encode_checks_sequence() {
        let field = uniform_field(8, 8);
        let seq3 = halton(10, 3).unwrap();
        assert!(matches!(
            encode(&field, &seq3, &EncodeParams::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let seq = halton(10, 2).unwrap();
        let params = EncodeParams {
            max_points: Some(20),
            ..EncodeParams::default()
        };
        assert!(matches!(
            encode(&field, &seq, &params),
            Err(Error::SequenceTooShort { requested: 20, available: 10 })
        ));
    }

    #[test]
    fn alpha_mode_uses_mass() {
        // mass 64 on an 8x8 all-ones field
        let field = uniform_field(8, 8);
        let seq = halton(100, 2).unwrap();
        let params = EncodeParams {
            alpha: Some(0.5),
            ..EncodeParams::default()
        };
        assert_eq!(encode(&field, &seq, &params).unwrap().len(), 32);
    }
}
