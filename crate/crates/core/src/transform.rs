//! Spatial-frequency <-> angular-delay transforms, delay truncation,
//! per-sample normalization and the real vector layout used by the solver.
//!
//! Vector layout: all real parts row-major, then all imaginary parts
//! row-major. For an `Nd x Nt` matrix the vector has `N = 2 Nd Nt` entries and
//! entry `c * Nd * Nt + i * Nt + j` is component `c` (0 = re, 1 = im) of
//! `H[i, j]`. The same index is `(i, j, c)` in the `Nd x Nt x 2` tensor view.

use nalgebra::DVector;

use crate::linalg::{all_finite_complex, dft_matrix, Complex64, ComplexMatrix, RealTensor3};
use crate::{Error, Result};

/// One channel realization, `Ns x Nt` in the spatial-frequency domain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSample {
    pub spatial_freq: ComplexMatrix,
    pub tag: Option<String>,
}

impl ChannelSample {
    pub fn new(spatial_freq: ComplexMatrix) -> Result<Self> {
        if spatial_freq.is_empty() {
            return Err(Error::shape("channel sample is empty"));
        }
        if !all_finite_complex(&spatial_freq) {
            return Err(Error::invalid("channel sample has non-finite entries"));
        }
        Ok(ChannelSample {
            spatial_freq,
            tag: None,
        })
    }

    pub fn subcarriers(&self) -> usize {
        self.spatial_freq.nrows()
    }

    pub fn antennas(&self) -> usize {
        self.spatial_freq.ncols()
    }
}

/// Truncated angular-delay matrix scaled into `[-1, 1]` componentwise.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedChannel {
    pub angular_delay: ComplexMatrix,
    /// Divide-by factor applied during normalization; always positive.
    pub scale: f64,
    /// Delay rows before truncation (`Ns`).
    pub full_rows: usize,
}

impl TruncatedChannel {
    pub fn denormalize(&self) -> ComplexMatrix {
        self.angular_delay.map(|z| z * self.scale)
    }

    pub fn shape(&self) -> GridShape {
        GridShape::new(self.angular_delay.nrows(), self.angular_delay.ncols())
    }
}

/// Logical `rows x cols` complex grid behind a real CSI vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub rows: usize,
    pub cols: usize,
}

impl GridShape {
    pub fn new(rows: usize, cols: usize) -> Self {
        GridShape { rows, cols }
    }

    /// Length of the real vector, `2 rows cols`.
    pub fn len(&self) -> usize {
        2 * self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }
}

/// Real CSI vector together with the grid it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct CsiVector {
    shape: GridShape,
    values: DVector<f64>,
}

impl CsiVector {
    pub fn new(shape: GridShape, values: DVector<f64>) -> Result<Self> {
        if values.len() != shape.len() {
            return Err(Error::invalid(format!(
                "vector length {} does not match 2*{}*{}",
                values.len(),
                shape.rows,
                shape.cols
            )));
        }
        Ok(CsiVector { shape, values })
    }

    pub fn zeros(shape: GridShape) -> Self {
        CsiVector {
            shape,
            values: DVector::zeros(shape.len()),
        }
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn into_values(self) -> DVector<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `rows x cols x 2` tensor view (channel 0 real, channel 1 imaginary).
    pub fn to_tensor(&self) -> RealTensor3 {
        let plane = self.shape.rows * self.shape.cols;
        let cols = self.shape.cols;
        RealTensor3::from_fn([self.shape.rows, cols, 2], |i, j, c| {
            self.values[c * plane + i * cols + j]
        })
    }

    pub fn from_tensor(t: &RealTensor3) -> Result<Self> {
        let [rows, cols, channels] = t.dims();
        if channels != 2 {
            return Err(Error::shape(format!("expected 2 channels, got {channels}")));
        }
        let shape = GridShape::new(rows, cols);
        let plane = rows * cols;
        let mut values = DVector::zeros(shape.len());
        for i in 0..rows {
            for j in 0..cols {
                values[i * cols + j] = t.get(i, j, 0);
                values[plane + i * cols + j] = t.get(i, j, 1);
            }
        }
        Ok(CsiVector { shape, values })
    }
}

/// Cached unitary DFT pair for one `(Ns, Nt)` geometry.
#[derive(Clone, Debug)]
pub struct AngularDelayTransform {
    fs: ComplexMatrix,
    ft: ComplexMatrix,
}

impl AngularDelayTransform {
    pub fn new(subcarriers: usize, antennas: usize) -> Result<Self> {
        Ok(AngularDelayTransform {
            fs: dft_matrix(subcarriers)?,
            ft: dft_matrix(antennas)?,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.fs.nrows(), self.ft.nrows())
    }

    fn check(&self, m: &ComplexMatrix) -> Result<()> {
        if m.shape() != self.dims() {
            return Err(Error::shape(format!(
                "matrix is {}x{}, transform expects {}x{}",
                m.nrows(),
                m.ncols(),
                self.fs.nrows(),
                self.ft.nrows()
            )));
        }
        Ok(())
    }

    /// `H = F_s H~ F_t`.
    pub fn to_angular_delay(&self, spatial_freq: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(spatial_freq)?;
        Ok(&self.fs * spatial_freq * &self.ft)
    }

    /// `H~ = F_s^H H F_t^H`.
    pub fn to_spatial_freq(&self, angular_delay: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(angular_delay)?;
        Ok(self.fs.adjoint() * angular_delay * self.ft.adjoint())
    }
}

pub fn to_angular_delay(sample: &ChannelSample) -> Result<ComplexMatrix> {
    AngularDelayTransform::new(sample.subcarriers(), sample.antennas())?
        .to_angular_delay(&sample.spatial_freq)
}

pub fn to_spatial_freq(angular_delay: &ComplexMatrix) -> Result<ComplexMatrix> {
    AngularDelayTransform::new(angular_delay.nrows(), angular_delay.ncols())?
        .to_spatial_freq(angular_delay)
}

/// Keeps the first `nd` delay rows.
pub fn truncate_delay(h: &ComplexMatrix, nd: usize) -> Result<ComplexMatrix> {
    if nd == 0 || nd > h.nrows() {
        return Err(Error::invalid(format!(
            "cannot keep {nd} of {} delay rows",
            h.nrows()
        )));
    }
    Ok(h.rows(0, nd).into_owned())
}

/// Fraction of `||H||_F^2` held by the first `nd` delay rows.
pub fn energy_retained(h: &ComplexMatrix, nd: usize) -> Result<f64> {
    let total = h.norm_squared();
    if total == 0.0 {
        return Err(Error::DegenerateSample("all-zero channel".into()));
    }
    Ok(truncate_delay(h, nd)?.norm_squared() / total)
}

/// Appends zero delay rows up to `ns`.
pub fn zero_pad_delay(truncated: &ComplexMatrix, ns: usize) -> Result<ComplexMatrix> {
    let (nd, nt) = truncated.shape();
    if ns < nd {
        return Err(Error::invalid(format!("cannot pad {nd} delay rows to {ns}")));
    }
    let mut out = ComplexMatrix::zeros(ns, nt);
    out.rows_mut(0, nd).copy_from(truncated);
    Ok(out)
}

/// Scales by the largest real or imaginary magnitude so every component
/// lands in `[-1, 1]`.
pub fn normalize(truncated: &ComplexMatrix) -> Result<TruncatedChannel> {
    let scale = truncated
        .iter()
        .fold(0.0f64, |m, z| m.max(z.re.abs()).max(z.im.abs()));
    if scale == 0.0 {
        return Err(Error::DegenerateSample("cannot normalize an all-zero channel".into()));
    }
    if !scale.is_finite() {
        return Err(Error::invalid("channel has non-finite entries"));
    }
    Ok(TruncatedChannel {
        angular_delay: truncated.map(|z| z / scale),
        scale,
        full_rows: truncated.nrows(),
    })
}

/// Transform, truncate to `nd` rows and normalize one sample.
pub fn prepare(
    sample: &ChannelSample,
    nd: usize,
    transform: &AngularDelayTransform,
) -> Result<TruncatedChannel> {
    let full = transform.to_angular_delay(&sample.spatial_freq)?;
    let mut tc = normalize(&truncate_delay(&full, nd)?)?;
    tc.full_rows = full.nrows();
    Ok(tc)
}

pub fn vectorize(tc: &TruncatedChannel) -> CsiVector {
    vectorize_matrix(&tc.angular_delay)
}

pub fn vectorize_matrix(m: &ComplexMatrix) -> CsiVector {
    let (rows, cols) = m.shape();
    let plane = rows * cols;
    let mut values = DVector::zeros(2 * plane);
    for i in 0..rows {
        for j in 0..cols {
            values[i * cols + j] = m[(i, j)].re;
            values[plane + i * cols + j] = m[(i, j)].im;
        }
    }
    CsiVector {
        shape: GridShape::new(rows, cols),
        values,
    }
}

pub fn devectorize(v: &DVector<f64>, rows: usize, cols: usize) -> Result<ComplexMatrix> {
    let plane = rows * cols;
    if v.len() != 2 * plane {
        return Err(Error::invalid(format!(
            "vector length {} does not match 2*{rows}*{cols}",
            v.len()
        )));
    }
    Ok(ComplexMatrix::from_fn(rows, cols, |i, j| {
        Complex64::new(v[i * cols + j], v[plane + i * cols + j])
    }))
}

impl CsiVector {
    pub fn to_matrix(&self) -> ComplexMatrix {
        devectorize(&self.values, self.shape.rows, self.shape.cols)
            .expect("CsiVector length matches its shape")
    }
}
