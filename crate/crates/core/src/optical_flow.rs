//! Dense Horn–Schunck optical flow and the normalized flow-magnitude image.
//!
//! Images are stored row-major; `x` is the column, `y` the row, and a
//! positive `v` points down the image.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// One grayscale frame of a video.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    index: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, index: usize, pixels: Vec<u8>) -> Result<Self> {
        if width < 2 || height < 2 {
            return Err(Error::DegenerateFrame { width, height });
        }
        if pixels.len() != width * height {
            return Err(Error::LengthMismatch {
                expected: width * height,
                found: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            index,
            pixels,
        })
    }

    /// Builds a frame by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        index: usize,
        mut f: impl FnMut(usize, usize) -> u8,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, index, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Timestamp index `k` of the frame within its sequence.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn with_index(mut self, index: usize) -> Self {
        self.index = index;
        self
    }

    /// The frame rotated by 180 degrees.
    pub fn rotated_180(&self) -> Self {
        let mut pixels = self.pixels.clone();
        pixels.reverse();
        Self {
            pixels,
            ..self.clone()
        }
    }
}

/// Per-pixel displacement between frame `index` and frame `index + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    width: usize,
    height: usize,
    index: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize, index: usize) -> Self {
        Self {
            width,
            height,
            index,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn from_components(
        width: usize,
        height: usize,
        index: usize,
        u: Vec<f64>,
        v: Vec<f64>,
    ) -> Result<Self> {
        let n = width * height;
        if n == 0 {
            return Err(Error::DegenerateFrame { width, height });
        }
        for len in [u.len(), v.len()] {
            if len != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if u.iter().chain(v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(
                "flow components must be finite".into(),
            ));
        }
        Ok(Self {
            width,
            height,
            index,
            u,
            v,
        })
    }

    /// A field with the same vector `(u, v)` at every pixel.
    pub fn uniform(width: usize, height: usize, index: usize, u: f64, v: f64) -> Result<Self> {
        let n = width * height;
        Self::from_components(width, height, index, vec![u; n], vec![v; n])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Index of the source frame (the earlier of the pair).
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    /// Iterates `(u, v)` pairs in row-major order.
    pub fn vectors(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.u.iter().copied().zip(self.v.iter().copied())
    }

    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        self.vectors().map(|(u, v)| libm::sqrt(u * u + v * v))
    }
}

/// Horn–Schunck solver settings.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FlowParams {
    /// Smoothness weight; larger values give smoother fields.
    pub alpha: f64,
    /// Maximum number of Jacobi sweeps.
    pub iterations: usize,
    /// Stop once the mean squared per-pixel update drops below this.
    pub epsilon: f64,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            iterations: 100,
            epsilon: 1e-4,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidParameter(
                "alpha must be finite and > 0".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("iterations must be >= 1".into()));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::InvalidParameter("epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Brightness derivatives at every pixel.
struct Derivatives {
    ex: Vec<f64>,
    ey: Vec<f64>,
    et: Vec<f64>,
}

/// Estimates `Ex`, `Ey`, `Et` with the 2x2x2 cube stencil.
///
/// The cube differences live on cell corners, half a pixel off the pixel
/// grid. Each pixel takes the mean of the four cubes that share it, with
/// edge replication outside the image, so the estimate is centred on the
/// pixel and the scheme commutes with a 180 degree rotation.
fn derivatives(prev: &Frame, next: &Frame) -> Derivatives {
    let (w, h) = (prev.width, prev.height);
    let at = |img: &Frame, x: isize, y: isize| -> f64 {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        f64::from(img.pixels[y * w + x])
    };

    // Cells indexed (a, b) with a in -1..=h-1 and b in -1..=w-1, stored shifted by one.
    let cw = w + 1;
    let ch = h + 1;
    let mut cx = vec![0.0; cw * ch];
    let mut cy = vec![0.0; cw * ch];
    let mut ct = vec![0.0; cw * ch];
    for a in 0..ch {
        let y0 = a as isize - 1;
        let y1 = y0 + 1;
        for b in 0..cw {
            let x0 = b as isize - 1;
            let x1 = x0 + 1;
            let p00 = at(prev, x0, y0);
            let p01 = at(prev, x1, y0);
            let p10 = at(prev, x0, y1);
            let p11 = at(prev, x1, y1);
            let n00 = at(next, x0, y0);
            let n01 = at(next, x1, y0);
            let n10 = at(next, x0, y1);
            let n11 = at(next, x1, y1);
            let i = a * cw + b;
            cx[i] = 0.25 * ((p01 - p00) + (p11 - p10) + (n01 - n00) + (n11 - n10));
            cy[i] = 0.25 * ((p10 - p00) + (p11 - p01) + (n10 - n00) + (n11 - n01));
            ct[i] = 0.25 * ((n00 - p00) + (n01 - p01) + (n10 - p10) + (n11 - p11));
        }
    }

    let n = w * h;
    let mut ex = Vec::with_capacity(n);
    let mut ey = Vec::with_capacity(n);
    let mut et = Vec::with_capacity(n);
    for y in 0..h {
        for x in 0..w {
            // pixel (x, y) touches cells (y..=y+1, x..=x+1) in shifted coordinates
            let c00 = y * cw + x;
            let c01 = c00 + 1;
            let c10 = c00 + cw;
            let c11 = c10 + 1;
            ex.push(0.25 * (cx[c00] + cx[c01] + cx[c10] + cx[c11]));
            ey.push(0.25 * (cy[c00] + cy[c01] + cy[c10] + cy[c11]));
            et.push(0.25 * (ct[c00] + ct[c01] + ct[c10] + ct[c11]));
        }
    }
    Derivatives { ex, ey, et }
}

/// Weighted 8-neighbour mean: 1/6 for edge neighbours, 1/12 for diagonals,
/// renormalized over the neighbours inside the image.
fn local_average(field: &[f64], w: usize, h: usize, out: &mut [f64]) {
    const EDGE: f64 = 1.0 / 6.0;
    const DIAG: f64 = 1.0 / 12.0;
    const NEIGHBOURS: [(isize, isize, f64); 8] = [
        (-1, -1, DIAG),
        (0, -1, EDGE),
        (1, -1, DIAG),
        (-1, 0, EDGE),
        (1, 0, EDGE),
        (-1, 1, DIAG),
        (0, 1, EDGE),
        (1, 1, DIAG),
    ];
    for y in 0..h {
        for x in 0..w {
            let interior = x > 0 && y > 0 && x + 1 < w && y + 1 < h;
            let mut sum = 0.0;
            let mut weight = 0.0;
            for &(dx, dy, k) in &NEIGHBOURS {
                let nx = x as isize + dx;
                let ny = y as isize + dy;
                if interior || (nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h) {
                    sum += k * field[ny as usize * w + nx as usize];
                    weight += k;
                }
            }
            out[y * w + x] = sum / weight;
        }
    }
}

/// Dense optical flow from `prev` to `next` by Horn–Schunck iteration.
///
/// The flow starts at zero and is updated with Jacobi sweeps until either
/// `params.iterations` sweeps have run or the mean squared update
/// `mean((du)^2 + (dv)^2)` falls below `params.epsilon`.
pub fn compute_dense_flow(prev: &Frame, next: &Frame, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if prev.width < 2 || prev.height < 2 {
        return Err(Error::DegenerateFrame {
            width: prev.width,
            height: prev.height,
        });
    }
    if (prev.width, prev.height) != (next.width, next.height) {
        return Err(Error::DimensionMismatch {
            expected: (prev.width, prev.height),
            found: (next.width, next.height),
        });
    }

    let (w, h) = (prev.width, prev.height);
    let n = w * h;
    let d = derivatives(prev, next);
    let alpha2 = params.alpha * params.alpha;
    let denom: Vec<f64> =
        d.ex.iter()
            .zip(&d.ey)
            .map(|(ex, ey)| alpha2 + ex * ex + ey * ey)
            .collect();

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut u_avg = vec![0.0; n];
    let mut v_avg = vec![0.0; n];
    for _ in 0..params.iterations {
        local_average(&u, w, h, &mut u_avg);
        local_average(&v, w, h, &mut v_avg);
        let mut sq_update = 0.0;
        for i in 0..n {
            let residual = (d.ex[i] * u_avg[i] + d.ey[i] * v_avg[i] + d.et[i]) / denom[i];
            let nu = u_avg[i] - d.ex[i] * residual;
            let nv = v_avg[i] - d.ey[i] * residual;
            sq_update += (nu - u[i]) * (nu - u[i]) + (nv - v[i]) * (nv - v[i]);
            u[i] = nu;
            v[i] = nv;
        }
        if sq_update / (n as f64) < params.epsilon {
            break;
        }
    }

    Ok(FlowField {
        width: w,
        height: h,
        index: prev.index,
        u,
        v,
    })
}

/// Flow magnitude scaled so the largest vector maps to 255.
///
/// An all-zero field yields an all-zero image. Scaling rounds half away
/// from zero.
pub fn magnitude_image(flow: &FlowField) -> Frame {
    let mags: Vec<f64> = flow.magnitudes().collect();
    let max = mags.iter().copied().fold(0.0_f64, f64::max);
    let pixels = if max > 0.0 {
        mags.iter()
            .map(|&m| libm::round(m / max * 255.0).clamp(0.0, 255.0) as u8)
            .collect()
    } else {
        vec![0; mags.len()]
    };
    Frame {
        width: flow.width,
        height: flow.height,
        index: flow.index,
        pixels,
    }
}
