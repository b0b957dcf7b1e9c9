//! Minimal fixed-size vector helpers over `[T; 3]`.

use crate::scalar::Scalar;

pub type Point3<T> = [T; 3];

#[inline]
pub fn add<T: Scalar>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn sub<T: Scalar>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn scale<T: Scalar>(a: Point3<T>, s: T) -> Point3<T> {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[inline]
pub fn dot<T: Scalar>(a: Point3<T>, b: Point3<T>) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross<T: Scalar>(a: Point3<T>, b: Point3<T>) -> Point3<T> {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm2<T: Scalar>(a: Point3<T>) -> T {
    dot(a, a)
}

#[inline]
pub fn norm<T: Scalar>(a: Point3<T>) -> T {
    dot(a, a).sqrt()
}

#[inline]
pub fn lerp<T: Scalar>(a: Point3<T>, b: Point3<T>, t: T) -> Point3<T> {
    add(a, scale(sub(b, a), t))
}

pub fn normalized<T: Scalar>(a: Point3<T>) -> Point3<T> {
    let n = norm(a);
    if n > T::zero() {
        scale(a, T::one() / n)
    } else {
        a
    }
}

pub fn cast<T: Scalar, U: Scalar>(a: Point3<T>) -> Point3<U> {
    [U::c(a[0].as_f64()), U::c(a[1].as_f64()), U::c(a[2].as_f64())]
}

/// Axis-aligned bounding box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb<T> {
    pub min: Point3<T>,
    pub max: Point3<T>,
}

impl<T: Scalar> Aabb<T> {
    pub fn empty() -> Self {
        Self {
            min: [T::infinity(); 3],
            max: [T::neg_infinity(); 3],
        }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Point3<T>>) -> Self {
        let mut b = Self::empty();
        for p in points {
            b.grow(*p);
        }
        b
    }

    pub fn grow(&mut self, p: Point3<T>) {
        for a in 0..3 {
            self.min[a] = self.min[a].min(p[a]);
            self.max[a] = self.max[a].max(p[a]);
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let mut b = *self;
        b.grow(other.min);
        b.grow(other.max);
        b
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|a| self.min[a] > self.max[a])
    }

    pub fn extent(&self) -> Point3<T> {
        sub(self.max, self.min)
    }

    pub fn center(&self) -> Point3<T> {
        scale(add(self.min, self.max), T::c(0.5))
    }

    pub fn contains(&self, p: Point3<T>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance2(&self, p: Point3<T>) -> T {
        let mut d2 = T::zero();
        for a in 0..3 {
            let d = (self.min[a] - p[a]).max(p[a] - self.max[a]).max(T::zero());
            d2 += d * d;
        }
        d2
    }
}
