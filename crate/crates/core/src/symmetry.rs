//! Finite transformation groups acting on R¹, R² and R³, and their orbits.
//!
//! Three families are supported: cyclic rotation groups of the plane, the
//! two-element reflection group `{x, 2μ − x}` of the line, and cyclic rotation
//! groups about a fixed axis in space. Groups keep their elements in a fixed
//! order (element 0 is always the identity) so orbits and symmetrized measures
//! are reproducible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{HalfOpenBox, Point};
use crate::scalar::{sin_cos_turn, Scalar};

/// Planar rotation by `theta ∈ [0, 2π)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation2<T> {
    theta: T,
    cos: T,
    sin: T,
}

impl<T: Scalar> Rotation2<T> {
    pub fn new(theta: T) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::invalid("rotation angle must be finite"));
        }
        let theta = canonical_angle(theta);
        let quarter = T::two_pi() / T::lit(4.0);
        let (sin, cos) = if theta == T::zero() {
            (T::zero(), T::one())
        } else if theta == quarter {
            (T::one(), T::zero())
        } else if theta == quarter + quarter {
            (T::zero(), -T::one())
        } else if theta == quarter * T::lit(3.0) {
            (-T::one(), T::zero())
        } else {
            theta.sin_cos()
        };
        Ok(Self { theta, cos, sin })
    }

    /// Rotation by `2π·j/k`; exact at quarter turns.
    pub fn from_turn(j: usize, k: usize) -> Self {
        let (sin, cos) = sin_cos_turn(j, k);
        let theta = canonical_angle(T::two_pi() * T::from_usize_lossy(j % k) / T::from_usize_lossy(k));
        Self { theta, cos, sin }
    }

    pub fn identity() -> Self {
        Self {
            theta: T::zero(),
            cos: T::one(),
            sin: T::zero(),
        }
    }

    pub fn theta(&self) -> T {
        self.theta
    }

    pub fn matrix(&self) -> [[T; 2]; 2] {
        [[self.cos, -self.sin], [self.sin, self.cos]]
    }

    #[inline]
    pub fn apply_xy(&self, x: T, y: T) -> (T, T) {
        (self.cos * x - self.sin * y, self.sin * x + self.cos * y)
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self {
            theta: canonical_angle(self.theta + other.theta),
            cos: self.cos * other.cos - self.sin * other.sin,
            sin: self.sin * other.cos + self.cos * other.sin,
        }
    }

    pub fn inverse(&self) -> Self {
        Self {
            theta: canonical_angle(-self.theta),
            cos: self.cos,
            sin: -self.sin,
        }
    }
}

fn canonical_angle<T: Scalar>(theta: T) -> T {
    let tau = T::two_pi();
    let mut t = theta % tau;
    if t < T::zero() {
        t = t + tau;
    }
    if t >= tau {
        t = T::zero();
    }
    t
}

/// Either the identity or the reflection `x ↦ 2μ − x` of the real line.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reflection1<T> {
    center: T,
    reflect: bool,
}

impl<T: Scalar> Reflection1<T> {
    pub fn new(center: T, reflect: bool) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::invalid("reflection center must be finite"));
        }
        Ok(Self { center, reflect })
    }

    pub fn center(&self) -> T {
        self.center
    }

    pub fn is_reflection(&self) -> bool {
        self.reflect
    }

    #[inline]
    pub fn apply_scalar(&self, x: T) -> T {
        if self.reflect {
            (self.center + self.center) - x
        } else {
            x
        }
    }
}

/// Rotation of R³ stored as its orthogonal matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation3<T> {
    m: [[T; 3]; 3],
}

impl<T: Scalar> Rotation3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, o, z], [z, z, o]],
        }
    }

    pub fn from_matrix(m: [[T; 3]; 3]) -> Result<Self> {
        let r = Self { m };
        let tol = T::mat_tol() * T::lit(10.0);
        if r.orthogonality_defect() > tol || (r.determinant() - T::one()).abs() > tol {
            return Err(Error::invalid("matrix is not a proper rotation"));
        }
        Ok(r)
    }

    /// Counterclockwise rotation about the x axis.
    pub fn about_x(sin: T, cos: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[o, z, z], [z, cos, -sin], [z, sin, cos]],
        }
    }

    /// Counterclockwise rotation about the y axis.
    pub fn about_y(sin: T, cos: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[cos, z, sin], [z, o, z], [-sin, z, cos]],
        }
    }

    /// Counterclockwise rotation about the z axis.
    pub fn about_z(sin: T, cos: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        Self {
            m: [[cos, -sin, z], [sin, cos, z], [z, z, o]],
        }
    }

    /// Rotation about a unit `axis`, built as `R·A_z·Rᵀ` where `R` maps the z
    /// axis onto `axis`. Coordinate axes use the basic matrices directly.
    pub fn about_axis(axis: [T; 3], sin: T, cos: T) -> Self {
        let (o, z) = (T::one(), T::zero());
        if axis == [o, z, z] {
            return Self::about_x(sin, cos);
        }
        if axis == [z, o, z] {
            return Self::about_y(sin, cos);
        }
        if axis == [z, z, o] {
            return Self::about_z(sin, cos);
        }
        let frame = frame_for_axis(axis);
        frame.compose(&Self::about_z(sin, cos)).compose(&frame.inverse())
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        self.m
    }

    #[inline]
    pub fn apply_xyz(&self, v: [T; 3]) -> [T; 3] {
        let m = &self.m;
        [
            m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
            m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
            m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
        ]
    }

    /// Matrix product `self · other` (apply `other` first).
    pub fn compose(&self, other: &Self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).fold(T::zero(), |acc, l| acc + self.m[i][l] * other.m[l][j]);
            }
        }
        Self { m: out }
    }

    pub fn inverse(&self) -> Self {
        let mut out = [[T::zero(); 3]; 3];
        for (i, row) in out.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = self.m[j][i];
            }
        }
        Self { m: out }
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Max entry of |RᵀR − I|.
    pub fn orthogonality_defect(&self) -> T {
        let p = self.inverse().compose(self);
        let mut worst = T::zero();
        for (i, row) in p.m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let target = if i == j { T::one() } else { T::zero() };
                worst = worst.max((v - target).abs());
            }
        }
        worst
    }

    fn max_entry_diff(&self, other: &Self) -> T {
        let mut worst = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                worst = worst.max((self.m[i][j] - other.m[i][j]).abs());
            }
        }
        worst
    }
}

/// Right-handed orthonormal frame whose third column is `axis`.
fn frame_for_axis<T: Scalar>(axis: [T; 3]) -> Rotation3<T> {
    let helper = if axis[0].abs() < T::lit(0.9) {
        [T::one(), T::zero(), T::zero()]
    } else {
        [T::zero(), T::one(), T::zero()]
    };
    let dot = helper[0] * axis[0] + helper[1] * axis[1] + helper[2] * axis[2];
    let mut u = [
        helper[0] - dot * axis[0],
        helper[1] - dot * axis[1],
        helper[2] - dot * axis[2],
    ];
    let n = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
    for c in &mut u {
        *c = *c / n;
    }
    let v = [
        axis[1] * u[2] - axis[2] * u[1],
        axis[2] * u[0] - axis[0] * u[2],
        axis[0] * u[1] - axis[1] * u[0],
    ];
    Rotation3 {
        m: [[u[0], v[0], axis[0]], [u[1], v[1], axis[1]], [u[2], v[2], axis[2]]],
    }
}

/// The closed-form matrix of `A_x(θx)·A_y(θy)·A_z(θz)`.
pub fn euler_rotation<T: Scalar>(theta_x: T, theta_y: T, theta_z: T) -> Result<Rotation3<T>> {
    if !(theta_x.is_finite() && theta_y.is_finite() && theta_z.is_finite()) {
        return Err(Error::invalid("Euler angles must be finite"));
    }
    let (sx, cx) = theta_x.sin_cos();
    let (sy, cy) = theta_y.sin_cos();
    let (sz, cz) = theta_z.sin_cos();
    Ok(Rotation3 {
        m: [
            [cy * cz, -cy * sz, sy],
            [cx * sz + sx * sy * cz, cx * cz - sx * sy * sz, -sx * cy],
            [sx * sz - cx * sy * cz, sx * cz + cx * sy * sz, cx * cy],
        ],
    })
}

/// One element of a finite group.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupElement<T> {
    Rotation2(Rotation2<T>),
    Reflection1(Reflection1<T>),
    Rotation3(Rotation3<T>),
}

impl<T: Scalar> GroupElement<T> {
    pub fn dim(&self) -> usize {
        match self {
            GroupElement::Reflection1(_) => 1,
            GroupElement::Rotation2(_) => 2,
            GroupElement::Rotation3(_) => 3,
        }
    }

    pub fn apply(&self, x: &Point<T>) -> Result<Point<T>> {
        Error::check_dim(self.dim(), x.dim())?;
        Ok(self.apply_unchecked(x))
    }

    /// Applies the element; the caller guarantees matching dimensions.
    #[inline]
    pub fn apply_unchecked(&self, x: &Point<T>) -> Point<T> {
        match self {
            GroupElement::Reflection1(r) => Point::from_slice_unchecked(&[r.apply_scalar(x.get(0))]),
            GroupElement::Rotation2(r) => {
                let (a, b) = r.apply_xy(x.get(0), x.get(1));
                Point::from_slice_unchecked(&[a, b])
            }
            GroupElement::Rotation3(r) => {
                let v = r.apply_xyz([x.get(0), x.get(1), x.get(2)]);
                Point::from_slice_unchecked(&v)
            }
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (GroupElement::Rotation2(a), GroupElement::Rotation2(b)) => Ok(GroupElement::Rotation2(a.compose(b))),
            (GroupElement::Reflection1(a), GroupElement::Reflection1(b)) => {
                if a.center != b.center {
                    return Err(Error::invalid(
                        "reflections about different centers do not compose to a reflection",
                    ));
                }
                Ok(GroupElement::Reflection1(Reflection1 {
                    center: a.center,
                    reflect: a.reflect != b.reflect,
                }))
            }
            (GroupElement::Rotation3(a), GroupElement::Rotation3(b)) => Ok(GroupElement::Rotation3(a.compose(b))),
            _ => Err(Error::invalid("cannot compose elements of different kinds")),
        }
    }

    pub fn inverse(&self) -> Self {
        match self {
            GroupElement::Rotation2(r) => GroupElement::Rotation2(r.inverse()),
            GroupElement::Reflection1(r) => GroupElement::Reflection1(*r),
            GroupElement::Rotation3(r) => GroupElement::Rotation3(r.inverse()),
        }
    }

    pub fn approx_eq(&self, other: &Self, tol: T) -> bool {
        match (self, other) {
            (GroupElement::Rotation2(a), GroupElement::Rotation2(b)) => {
                (a.cos - b.cos).abs() <= tol && (a.sin - b.sin).abs() <= tol
            }
            (GroupElement::Reflection1(a), GroupElement::Reflection1(b)) => {
                a.reflect == b.reflect && (!a.reflect || (a.center - b.center).abs() <= tol)
            }
            (GroupElement::Rotation3(a), GroupElement::Rotation3(b)) => a.max_entry_diff(b) <= tol,
            _ => false,
        }
    }

    pub fn is_identity(&self, tol: T) -> bool {
        match self {
            GroupElement::Rotation2(r) => (r.cos - T::one()).abs() <= tol && r.sin.abs() <= tol,
            GroupElement::Reflection1(r) => !r.reflect,
            GroupElement::Rotation3(r) => r.max_entry_diff(&Rotation3::identity()) <= tol,
        }
    }

    /// Image of an axis-aligned box when it is again an axis-aligned box
    /// (identity, reflections, signed-permutation rotations). Boundary
    /// open/closed sides may swap; the image agrees up to a null set.
    pub fn box_image(&self, b: &HalfOpenBox<T>) -> Option<HalfOpenBox<T>> {
        let whole = b.low().iter().all(|v| *v == T::neg_infinity()) && b.high().iter().all(|v| *v == T::infinity());
        if whole {
            return Some(*b);
        }
        match self {
            GroupElement::Reflection1(r) => {
                if !r.reflect {
                    return Some(*b);
                }
                let c2 = r.center + r.center;
                HalfOpenBox::interval(c2 - b.high()[0], c2 - b.low()[0]).ok()
            }
            GroupElement::Rotation2(r) => {
                let m = r.matrix();
                image_signed_permutation(&[m[0].to_vec(), m[1].to_vec()], b)
            }
            GroupElement::Rotation3(r) => {
                let m = r.matrix();
                image_signed_permutation(&[m[0].to_vec(), m[1].to_vec(), m[2].to_vec()], b)
            }
        }
    }

    /// Axis-aligned bounding box of the image of a bounded box.
    pub fn image_bounding_box(&self, b: &HalfOpenBox<T>) -> HalfOpenBox<T> {
        let d = b.dim();
        let mut lo = vec![T::infinity(); d];
        let mut hi = vec![T::neg_infinity(); d];
        for c in b.corners() {
            let y = self.apply_unchecked(&c);
            for i in 0..d {
                lo[i] = lo[i].min(y.get(i));
                hi[i] = hi[i].max(y.get(i));
            }
        }
        HalfOpenBox::new(&lo, &hi).expect("image of a proper box is proper")
    }
}

fn image_signed_permutation<T: Scalar>(m: &[Vec<T>], b: &HalfOpenBox<T>) -> Option<HalfOpenBox<T>> {
    let d = m.len();
    let mut lo = vec![T::zero(); d];
    let mut hi = vec![T::zero(); d];
    for i in 0..d {
        let mut found = false;
        for j in 0..d {
            let v = m[i][j];
            if v == T::zero() {
                continue;
            }
            if found || v.abs() != T::one() {
                return None;
            }
            found = true;
            if v > T::zero() {
                lo[i] = b.low()[j];
                hi[i] = b.high()[j];
            } else {
                lo[i] = -b.high()[j];
                hi[i] = -b.low()[j];
            }
        }
        if !found {
            return None;
        }
    }
    HalfOpenBox::new(&lo, &hi).ok()
}

/// How a group was constructed; used for serialization and reporting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupSpec<T> {
    Cyclic2d { k: usize },
    Reflection { mu: T },
    Cyclic3d { k: usize, axis: [T; 3] },
    Custom { k: usize },
}

/// Ordered finite group of transformations of a single kind.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteGroup<T> {
    spec: GroupSpec<T>,
    elements: Vec<GroupElement<T>>,
}

impl<T: Scalar> FiniteGroup<T> {
    /// Builds a group from explicit elements, verifying identity, closure
    /// and inverses. The identity is moved to position 0.
    pub fn from_elements(mut elements: Vec<GroupElement<T>>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::invalid("a group needs at least one element"));
        }
        let dim = elements[0].dim();
        if elements.iter().any(|e| e.dim() != dim) {
            return Err(Error::invalid("group elements must share one kind"));
        }
        let tol = T::mat_tol();
        if let Some(pos) = elements.iter().position(|e| e.is_identity(tol)) {
            elements.swap(0, pos);
        }
        let g = Self {
            spec: GroupSpec::Custom { k: elements.len() },
            elements,
        };
        g.verify_axioms()?;
        Ok(g)
    }

    pub fn spec(&self) -> &GroupSpec<T> {
        &self.spec
    }

    pub fn elements(&self) -> &[GroupElement<T>] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn trivial(dim: usize) -> Result<Self> {
        match dim {
            1 => make_reflection_group(T::zero()).map(|g| Self {
                spec: GroupSpec::Custom { k: 1 },
                elements: vec![g.elements[0]],
            }),
            2 => make_cyclic_group_2d(1),
            3 => make_cyclic_group_3d(1, [T::zero(), T::zero(), T::one()]),
            _ => Err(Error::invalid("dimension must be 1, 2 or 3")),
        }
    }

    /// Exhaustive check of identity membership, closure and inverses
    /// within the matrix tolerance.
    pub fn verify_axioms(&self) -> Result<()> {
        let tol = T::mat_tol();
        if !self.elements.iter().any(|e| e.is_identity(tol)) {
            return Err(Error::GroupAxiom("identity is missing".into()));
        }
        for (i, a) in self.elements.iter().enumerate() {
            let inv = a.inverse();
            if !self.elements.iter().any(|e| e.approx_eq(&inv, tol)) {
                return Err(Error::GroupAxiom(format!("element {i} has no inverse in the group")));
            }
            for (j, b) in self.elements.iter().enumerate() {
                let c = a.compose(b).map_err(|e| Error::GroupAxiom(e.to_string()))?;
                if !self.elements.iter().any(|e| e.approx_eq(&c, tol)) {
                    return Err(Error::GroupAxiom(format!(
                        "composite of elements {i} and {j} is not in the group"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Rotations by `2πj/k`, `j = 0..k`, of the plane.
pub fn make_cyclic_group_2d<T: Scalar>(k: usize) -> Result<FiniteGroup<T>> {
    if k == 0 {
        return Err(Error::invalid("group order k must be at least 1"));
    }
    let elements = (0..k)
        .map(|j| GroupElement::Rotation2(Rotation2::from_turn(j, k)))
        .collect();
    Ok(FiniteGroup {
        spec: GroupSpec::Cyclic2d { k },
        elements,
    })
}

/// `{x, 2μ − x}`.
pub fn make_reflection_group<T: Scalar>(mu: T) -> Result<FiniteGroup<T>> {
    let elements = vec![
        GroupElement::Reflection1(Reflection1::new(mu, false)?),
        GroupElement::Reflection1(Reflection1::new(mu, true)?),
    ];
    Ok(FiniteGroup {
        spec: GroupSpec::Reflection { mu },
        elements,
    })
}

/// Rotations by `2πj/k` about a unit axis in R³.
pub fn make_cyclic_group_3d<T: Scalar>(k: usize, axis: [T; 3]) -> Result<FiniteGroup<T>> {
    if k == 0 {
        return Err(Error::invalid("group order k must be at least 1"));
    }
    if axis.iter().any(|c| !c.is_finite()) {
        return Err(Error::invalid("rotation axis must be finite"));
    }
    let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    if norm == T::zero() {
        return Err(Error::invalid("rotation axis must be nonzero"));
    }
    if (norm - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::lit(16.0)) {
        return Err(Error::invalid(format!(
            "rotation axis must have unit length (got {norm})"
        )));
    }
    let elements = (0..k)
        .map(|j| {
            let (s, c) = sin_cos_turn(j, k);
            GroupElement::Rotation3(Rotation3::about_axis(axis, s, c))
        })
        .collect();
    Ok(FiniteGroup {
        spec: GroupSpec::Cyclic3d { k, axis },
        elements,
    })
}

/// `[g_1(x), …, g_k(x)]` in element order, duplicates kept.
pub fn orbit<T: Scalar>(group: &FiniteGroup<T>, x: &Point<T>) -> Result<Vec<Point<T>>> {
    Error::check_dim(group.dim(), x.dim())?;
    Ok(group.elements.iter().map(|g| g.apply_unchecked(x)).collect())
}
