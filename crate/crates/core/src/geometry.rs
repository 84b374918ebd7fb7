//! Points in R¹, R², R³ and half-open axis-aligned boxes.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MAX_DIM: usize = 3;

/// A finite point in R^p, p ∈ {1, 2, 3}, stored inline.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point<T> {
    coords: [T; MAX_DIM],
    dim: u8,
}

impl<T: Scalar> Point<T> {
    pub fn new(coords: &[T]) -> Result<Self> {
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(Error::invalid(format!(
                "point dimension must be 1, 2 or 3 (got {})",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Self::from_slice_unchecked(coords))
    }

    pub(crate) fn from_slice_unchecked(coords: &[T]) -> Self {
        let mut buf = [T::zero(); MAX_DIM];
        buf[..coords.len()].copy_from_slice(coords);
        Self {
            coords: buf,
            dim: coords.len() as u8,
        }
    }

    pub fn scalar(x: T) -> Result<Self> {
        Self::new(&[x])
    }

    pub fn xy(x: T, y: T) -> Result<Self> {
        Self::new(&[x, y])
    }

    pub fn xyz(x: T, y: T, z: T) -> Result<Self> {
        Self::new(&[x, y, z])
    }

    pub fn origin(dim: usize) -> Self {
        assert!((1..=MAX_DIM).contains(&dim));
        Self {
            coords: [T::zero(); MAX_DIM],
            dim: dim as u8,
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    #[inline]
    pub fn coords(&self) -> &[T] {
        &self.coords[..self.dim()]
    }

    #[inline]
    pub fn get(&self, i: usize) -> T {
        self.coords()[i]
    }

    pub fn norm(&self) -> T {
        self.coords().iter().fold(T::zero(), |acc, &c| acc + c * c).sqrt()
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.coords()
            .iter()
            .zip(other.coords())
            .fold(T::zero(), |acc, (&a, &b)| acc.max((a - b).abs()))
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        self.dim == other.dim && self.max_abs_diff(other) <= tol
    }

    /// Lexicographic comparison on coordinates; points are finite so this is total.
    pub fn lex_cmp(&self, other: &Self) -> std::cmp::Ordering {
        for (a, b) in self.coords().iter().zip(other.coords()) {
            match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Equal) | None => continue,
                Some(ord) => return ord,
            }
        }
        self.dim.cmp(&other.dim)
    }

    pub fn cast<U: Scalar>(&self) -> Point<U> {
        let v: Vec<U> = self.coords().iter().map(|c| U::lit(c.as_f64())).collect();
        Point::from_slice_unchecked(&v)
    }
}

impl<T: Scalar> Serialize for Point<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.coords().serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for Point<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = Vec::<T>::deserialize(deserializer)?;
        Point::new(&v).map_err(serde::de::Error::custom)
    }
}

/// Product of half-open intervals `(low, high]`. Bounds may be infinite.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HalfOpenBox<T> {
    low: [T; MAX_DIM],
    high: [T; MAX_DIM],
    dim: u8,
}

#[derive(Serialize, Deserialize)]
struct BoxRepr<T> {
    low: Vec<T>,
    high: Vec<T>,
}

impl<T: Scalar> HalfOpenBox<T> {
    pub fn new(low: &[T], high: &[T]) -> Result<Self> {
        if low.len() != high.len() {
            return Err(Error::DimensionMismatch {
                expected: low.len(),
                found: high.len(),
            });
        }
        if low.is_empty() || low.len() > MAX_DIM {
            return Err(Error::invalid("box dimension must be 1, 2 or 3"));
        }
        for (l, h) in low.iter().zip(high) {
            if l.is_nan() || h.is_nan() || !(l < h) {
                return Err(Error::invalid(format!(
                    "box bounds must satisfy low < high (got {l} .. {h})"
                )));
            }
        }
        let mut lo = [T::zero(); MAX_DIM];
        let mut hi = [T::zero(); MAX_DIM];
        lo[..low.len()].copy_from_slice(low);
        hi[..high.len()].copy_from_slice(high);
        Ok(Self {
            low: lo,
            high: hi,
            dim: low.len() as u8,
        })
    }

    /// `(x0, x1] × (y0, y1]`.
    pub fn rect(x0: T, x1: T, y0: T, y1: T) -> Result<Self> {
        Self::new(&[x0, y0], &[x1, y1])
    }

    pub fn interval(lo: T, hi: T) -> Result<Self> {
        Self::new(&[lo], &[hi])
    }

    /// The whole space R^dim.
    pub fn full(dim: usize) -> Self {
        let lo = vec![T::neg_infinity(); dim];
        let hi = vec![T::infinity(); dim];
        Self::new(&lo, &hi).expect("valid full box")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn low(&self) -> &[T] {
        &self.low[..self.dim()]
    }

    pub fn high(&self) -> &[T] {
        &self.high[..self.dim()]
    }

    #[inline]
    pub fn contains(&self, p: &Point<T>) -> bool {
        debug_assert_eq!(p.dim(), self.dim());
        self.contains_coords(p.coords())
    }

    #[inline]
    pub fn contains_coords(&self, x: &[T]) -> bool {
        x.iter()
            .zip(self.low())
            .zip(self.high())
            .all(|((&v, &l), &h)| l < v && v <= h)
    }

    /// True when `p` lies within `tol` of a face of the box.
    pub fn near_boundary(&self, p: &Point<T>, tol: T) -> bool {
        let x = p.coords();
        let inside_slab = x
            .iter()
            .zip(self.low())
            .zip(self.high())
            .all(|((&v, &l), &h)| v > l - tol && v <= h + tol);
        if !inside_slab {
            return false;
        }
        x.iter()
            .zip(self.low())
            .zip(self.high())
            .any(|((&v, &l), &h)| (v - l).abs() <= tol || (v - h).abs() <= tol)
    }

    pub fn intersection(&self, other: &Self) -> Option<Self> {
        if self.dim != other.dim {
            return None;
        }
        let lo: Vec<T> = self.low().iter().zip(other.low()).map(|(&a, &b)| a.max(b)).collect();
        let hi: Vec<T> = self.high().iter().zip(other.high()).map(|(&a, &b)| a.min(b)).collect();
        Self::new(&lo, &hi).ok()
    }

    /// True when the boxes share a set of positive volume.
    pub fn overlaps(&self, other: &Self) -> bool {
        self.intersection(other).is_some()
    }

    /// Corner points; requires finite bounds.
    pub fn corners(&self) -> Vec<Point<T>> {
        let d = self.dim();
        (0..(1usize << d))
            .map(|mask| {
                let c: Vec<T> = (0..d)
                    .map(|i| {
                        if mask & (1 << i) == 0 {
                            self.low[i]
                        } else {
                            self.high[i]
                        }
                    })
                    .collect();
                Point::from_slice_unchecked(&c)
            })
            .collect()
    }

    pub fn is_bounded(&self) -> bool {
        self.low().iter().chain(self.high()).all(|v| v.is_finite())
    }

    pub fn cast<U: Scalar>(&self) -> HalfOpenBox<U> {
        let lo: Vec<U> = self.low().iter().map(|c| U::lit(c.as_f64())).collect();
        let hi: Vec<U> = self.high().iter().map(|c| U::lit(c.as_f64())).collect();
        HalfOpenBox::new(&lo, &hi).expect("cast preserves ordering")
    }
}

impl<T: Scalar> Serialize for HalfOpenBox<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        BoxRepr {
            low: self.low().to_vec(),
            high: self.high().to_vec(),
        }
        .serialize(serializer)
    }
}

impl<'de, T: Scalar> Deserialize<'de> for HalfOpenBox<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = BoxRepr::<T>::deserialize(deserializer)?;
        HalfOpenBox::new(&r.low, &r.high).map_err(serde::de::Error::custom)
    }
}
