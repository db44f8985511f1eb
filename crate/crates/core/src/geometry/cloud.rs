use crate::error::{invalid, Error, Result};

pub type Point3 = [f64; 3];

#[inline]
pub fn dist2(a: &Point3, b: &Point3) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// A raw scene: positions in meters, RGB colors in `[0, 1]`, optional unit normals.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    positions: Vec<Point3>,
    colors: Vec<Point3>,
    normals: Option<Vec<Point3>>,
}

const NORMAL_TOLERANCE: f64 = 1e-6;

impl PointCloud {
    pub fn new(positions: Vec<Point3>, colors: Vec<Point3>) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::EmptyInput);
        }
        if colors.len() != positions.len() {
            return Err(Error::DimensionMismatch {
                context: "point colors",
                expected: positions.len(),
                actual: colors.len(),
            });
        }
        if positions.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("point positions"));
        }
        if let Some(i) = colors
            .iter()
            .position(|c| c.iter().any(|v| !(0.0..=1.0).contains(v)))
        {
            return Err(invalid("colors", format!("color of point {i} outside [0, 1]")));
        }
        Ok(Self {
            positions,
            colors,
            normals: None,
        })
    }

    /// Cloud with every color set to mid-grey.
    pub fn from_positions(positions: Vec<Point3>) -> Result<Self> {
        let colors = vec![[0.5; 3]; positions.len()];
        Self::new(positions, colors)
    }

    pub fn with_normals(mut self, normals: Vec<Point3>) -> Result<Self> {
        if normals.len() != self.positions.len() {
            return Err(Error::DimensionMismatch {
                context: "point normals",
                expected: self.positions.len(),
                actual: normals.len(),
            });
        }
        for (i, n) in normals.iter().enumerate() {
            let norm = dist2(n, &[0.0; 3]).sqrt();
            if !norm.is_finite() || (norm - 1.0).abs() > NORMAL_TOLERANCE {
                return Err(invalid("normals", format!("normal {i} has norm {norm}")));
            }
        }
        self.normals = Some(normals);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Point3] {
        &self.positions
    }

    pub fn colors(&self) -> &[Point3] {
        &self.colors
    }

    pub fn normals(&self) -> Option<&[Point3]> {
        self.normals.as_deref()
    }

    /// Reorders points so that new point `i` is old point `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            positions: order.iter().map(|&i| self.positions[i]).collect(),
            colors: order.iter().map(|&i| self.colors[i]).collect(),
            normals: self
                .normals
                .as_ref()
                .map(|n| order.iter().map(|&i| n[i]).collect()),
        }
    }

    pub fn translated(&self, offset: Point3) -> Self {
        let mut out = self.clone();
        for p in &mut out.positions {
            for a in 0..3 {
                p[a] += offset[a];
            }
        }
        out
    }
}

/// Axis-aligned box stored as center and size, the `(cx, cy, cz, sx, sy, sz)` layout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub center: Point3,
    pub size: Point3,
}

impl Aabb {
    pub fn new(center: Point3, size: Point3) -> Result<Self> {
        if center.iter().chain(size.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("box"));
        }
        if size.iter().any(|&s| s <= 0.0) {
            return Err(Error::InvalidBox(size));
        }
        Ok(Self { center, size })
    }

    pub fn from_array(b: [f64; 6]) -> Result<Self> {
        Self::new([b[0], b[1], b[2]], [b[3], b[4], b[5]])
    }

    pub fn to_array(&self) -> [f64; 6] {
        let [cx, cy, cz] = self.center;
        let [sx, sy, sz] = self.size;
        [cx, cy, cz, sx, sy, sz]
    }

    pub fn min(&self, axis: usize) -> f64 {
        self.center[axis] - 0.5 * self.size[axis]
    }

    pub fn max(&self, axis: usize) -> f64 {
        self.center[axis] + 0.5 * self.size[axis]
    }

    pub fn volume(&self) -> f64 {
        self.size.iter().product()
    }

    pub fn intersection_volume(&self, other: &Aabb) -> f64 {
        (0..3)
            .map(|a| (self.max(a).min(other.max(a)) - self.min(a).max(other.min(a))).max(0.0))
            .product()
    }

    /// Volume of the smallest axis-aligned box enclosing both.
    pub fn hull_volume(&self, other: &Aabb) -> f64 {
        (0..3)
            .map(|a| self.max(a).max(other.max(a)) - self.min(a).min(other.min(a)))
            .product()
    }
}
