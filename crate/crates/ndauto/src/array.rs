use crate::error::{Error, Result};

/// Storage precision of an [`Array`].
///
/// Values are always held as `f64`; `Single` additionally constrains every
/// value to be exactly representable as `f32` (enforced by quantizing on
/// construction), so single-precision containers round-trip bitwise.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Precision {
    Double,
    Single,
}

impl Precision {
    pub fn promote(self, other: Precision) -> Precision {
        if self == Precision::Double || other == Precision::Double {
            Precision::Double
        } else {
            Precision::Single
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            Precision::Double => 0,
            Precision::Single => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Precision> {
        match tag {
            0 => Ok(Precision::Double),
            1 => Ok(Precision::Single),
            t => Err(Error::Container(format!("unknown precision tag {t}"))),
        }
    }

    #[inline]
    pub fn quantize(self, v: f64) -> f64 {
        match self {
            Precision::Double => v,
            Precision::Single => v as f32 as f64,
        }
    }
}

/// Dense n-dimensional array in row-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct Array {
    shape: Vec<usize>,
    data: Vec<f64>,
    precision: Precision,
}

impl Array {
    pub fn zeros(shape: &[usize]) -> Array {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![0.0; n],
            precision: Precision::Double,
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Array {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: vec![value; n],
            precision: Precision::Double,
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Array> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::shape(
                "Array::from_vec",
                format!("{n} values for shape {shape:?}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Array {
            shape: shape.to_vec(),
            data,
            precision: Precision::Double,
        })
    }

    /// Builds an array already quantized to `precision`.
    pub fn from_vec_prec(shape: &[usize], mut data: Vec<f64>, precision: Precision) -> Result<Array> {
        if precision == Precision::Single {
            for v in &mut data {
                *v = *v as f32 as f64;
            }
        }
        let mut a = Array::from_vec(shape, data)?;
        a.precision = precision;
        Ok(a)
    }

    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Array {
        let n = shape.iter().product();
        Array {
            shape: shape.to_vec(),
            data: (0..n).map(|i| f(i)).collect(),
            precision: Precision::Double,
        }
    }

    pub fn scalar(value: f64) -> Array {
        Array {
            shape: vec![1],
            data: vec![value],
            precision: Precision::Double,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn dim(&self, axis: usize) -> usize {
        self.shape[axis]
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Returns the same values re-quantized to `precision`.
    pub fn with_precision(&self, precision: Precision) -> Array {
        Array::from_vec_prec(&self.shape, self.data.clone(), precision).expect("shape unchanged")
    }

    pub fn as_scalar(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(Error::shape("as_scalar", "1 element", format!("{:?}", self.shape)));
        }
        Ok(self.data[0])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Array {
        let data = self.data.iter().map(|&v| self.precision.quantize(f(v))).collect();
        Array {
            shape: self.shape.clone(),
            data,
            precision: self.precision,
        }
    }

    /// Elementwise combination; shapes must match exactly.
    pub fn zip_map(&self, other: &Array, context: &str, f: impl Fn(f64, f64) -> f64) -> Result<Array> {
        if self.shape != other.shape {
            return Err(Error::shape(
                context,
                format!("{:?}", self.shape),
                format!("{:?}", other.shape),
            ));
        }
        let precision = self.precision.promote(other.precision);
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| precision.quantize(f(a, b)))
            .collect();
        Ok(Array {
            shape: self.shape.clone(),
            data,
            precision,
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index into a rank-3 array laid out as channel-major planes.
    #[inline]
    pub fn idx3(&self, c: usize, y: usize, x: usize) -> usize {
        debug_assert_eq!(self.rank(), 3);
        (c * self.shape[1] + y) * self.shape[2] + x
    }

    #[inline]
    pub fn at3(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[self.idx3(c, y, x)]
    }

    #[inline]
    pub fn set3(&mut self, c: usize, y: usize, x: usize, v: f64) {
        let i = self.idx3(c, y, x);
        self.data[i] = self.precision.quantize(v);
    }

    /// Index into a rank-2 array.
    #[inline]
    pub fn idx2(&self, y: usize, x: usize) -> usize {
        debug_assert_eq!(self.rank(), 2);
        y * self.shape[1] + x
    }

    #[inline]
    pub fn at2(&self, y: usize, x: usize) -> f64 {
        self.data[self.idx2(y, x)]
    }

    #[inline]
    pub fn set2(&mut self, y: usize, x: usize, v: f64) {
        let i = self.idx2(y, x);
        self.data[i] = self.precision.quantize(v);
    }
}

/// Relative L2 distance `|a - b|_2 / max(|a|_2, tiny)`.
pub fn rel_l2(a: &Array, b: &Array) -> f64 {
    assert_eq!(a.shape(), b.shape(), "rel_l2 shape mismatch");
    let mut num = 0.0;
    let mut den = 0.0;
    for (&x, &y) in a.data().iter().zip(b.data()) {
        num += (x - y) * (x - y);
        den += x * x;
    }
    (num / den.max(1e-300)).sqrt()
}
